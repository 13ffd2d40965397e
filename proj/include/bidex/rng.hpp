#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include <Eigen/Core>

namespace bidex {

/// SplitMix64 finalizer. Used both as a hash and as the core of CounterRng.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of integers. Seeds for work units are
/// derived as hash_seed({master, object, scale, candidate}).
inline std::uint64_t hash_seed(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x5bd1e9955bd1e995ULL;
    for (auto p : parts)
        h = mix64(h ^ mix64(p));
    return h;
}

/// Counter-based generator: the i-th draw is a pure function of (key, i),
/// so results never depend on how work is split between threads.
class CounterRng
{
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(mix64(key)), counter_(counter) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    double normal()
    {
        // Box-Muller; one value per call keeps the counter arithmetic simple.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300)
            u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <int N>
    Eigen::Matrix<double, N, 1> unit_vector()
    {
        Eigen::Matrix<double, N, 1> v;
        double n2 = 0.0;
        do {
            for (int i = 0; i < N; ++i)
                v[i] = normal();
            n2 = v.squaredNorm();
        } while (n2 < 1e-24);
        return v / std::sqrt(n2);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace bidex
