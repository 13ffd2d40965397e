#include "bidex/regions.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "bidex/parallel.hpp"
#include "bidex/rng.hpp"

namespace bidex {

std::vector<std::size_t> sample_region_contacts(const Region& region, std::size_t count, std::uint64_t seed)
{
    if (region.members.empty())
        throw std::invalid_argument("sample_region_contacts: empty region");
    CounterRng rng(hash_seed({seed, region.anchor}));
    std::vector<std::size_t> out;
    out.reserve(count);
    if (region.members.size() < count) {
        for (std::size_t k = 0; k < count; ++k)
            out.push_back(region.members[rng.below(region.members.size())]);
        return out;
    }
    // Partial Fisher-Yates.
    std::vector<std::size_t> pool = region.members;
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t j = k + rng.below(pool.size() - k);
        std::swap(pool[k], pool[j]);
        out.push_back(pool[k]);
    }
    return out;
}

ContactState contacts_from_samples(const SurfaceSamples& samples, const std::vector<std::size_t>& indices,
                                   const Vec3& reference, double mu)
{
    ContactState cs(mu);
    for (std::size_t idx : indices)
        cs.add(samples.points[idx] - reference, -samples.normals[idx]);
    return cs;
}

std::vector<Wrench> gwb_directions(std::size_t count, std::uint64_t seed)
{
    std::vector<Wrench> dirs;
    dirs.reserve(count);
    CounterRng rng(seed);
    for (std::size_t k = 0; k < count; ++k)
        dirs.push_back(rng.unit_vector<6>());
    return dirs;
}

double stability_score(const ContactState& contacts, const std::vector<Wrench>& directions)
{
    const GwbSamples gwb = sample_gwb(contacts, directions);
    double s = std::numeric_limits<double>::infinity();
    for (const Wrench& t : disturbance_directions()) {
        double best = support_function(contacts, t);
        for (const Wrench& w : gwb.points)
            best = std::max(best, t.dot(w));
        s = std::min(s, best);
    }
    return s;
}

namespace {

ContactState pair_contacts(const Region& a, const Region& b, const SurfaceSamples& samples, std::size_t n,
                           double mu, const Vec3& reference, std::uint64_t seed, std::vector<std::size_t>* ca,
                           std::vector<std::size_t>* cb)
{
    // Lower anchor first keeps the floating-point sums symmetric in (a, b).
    const bool swap = b.anchor < a.anchor;
    const Region& first = swap ? b : a;
    const Region& second = swap ? a : b;
    std::vector<std::size_t> i1 = sample_region_contacts(first, n, seed);
    std::vector<std::size_t> i2 = sample_region_contacts(second, n, seed);
    std::vector<std::size_t> all = i1;
    all.insert(all.end(), i2.begin(), i2.end());
    if (ca)
        *ca = swap ? i2 : i1;
    if (cb)
        *cb = swap ? i1 : i2;
    return contacts_from_samples(samples, all, reference, mu);
}

} // namespace

double stability_score(const Region& a, const Region& b, const SurfaceSamples& samples, std::size_t n_contacts,
                       std::size_t n_directions, double mu, const Vec3& reference, std::uint64_t seed)
{
    if (a.members.empty() || b.members.empty())
        throw std::invalid_argument("stability_score: empty region");
    ContactState cs = pair_contacts(a, b, samples, n_contacts, mu, reference, seed, nullptr, nullptr);
    return stability_score(cs, gwb_directions(n_directions, hash_seed({seed, 0x67776bULL})));
}

std::vector<RegionPair> select_region_pairs(const SurfaceSamples& samples, const Vec3& reference,
                                            const RegionParams& params, std::uint64_t seed)
{
    if (samples.size() < params.num_anchors)
        throw std::invalid_argument("select_region_pairs: fewer samples than anchors");

    const auto anchors = farthest_point_sample(samples, params.num_anchors, 0);
    std::vector<Region> regions;
    regions.reserve(anchors.size());
    for (std::size_t a : anchors) {
        if (samples.points[a].z() < params.min_anchor_height)
            continue;
        Region r = region_of(samples, a, params.radius, params.region_size);
        if (r.members.size() >= 2 && concavity_score(r, samples) > params.concave_threshold)
            continue;
        regions.push_back(std::move(r));
    }
    std::sort(regions.begin(), regions.end(), [](const Region& x, const Region& y) { return x.anchor < y.anchor; });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const double dmin2 = params.min_distance * params.min_distance;
    for (std::size_t i = 0; i < regions.size(); ++i)
        for (std::size_t j = i + 1; j < regions.size(); ++j)
            if ((samples.points[regions[i].anchor] - samples.points[regions[j].anchor]).squaredNorm() >= dmin2)
                pairs.emplace_back(i, j);
    if (pairs.empty())
        throw RegionSelectionError("no region pair survives the concavity and distance filters");

    const auto directions = gwb_directions(params.num_directions, hash_seed({seed, 0x67776bULL}));
    std::vector<double> scores(pairs.size());
    parallel_for(pairs.size(), params.workers, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        ContactState cs = pair_contacts(regions[i], regions[j], samples, params.contacts_per_region, params.mu,
                                        reference, seed, nullptr, nullptr);
        scores[p] = stability_score(cs, directions);
    });

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(params.top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y])
            return scores[x] > scores[y];
        return x < y; // pairs are generated in anchor-index order
    });

    std::vector<RegionPair> out;
    out.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) {
        const auto [i, j] = pairs[order[k]];
        RegionPair rp;
        rp.a = regions[i];
        rp.b = regions[j];
        rp.score = scores[order[k]];
        pair_contacts(rp.a, rp.b, samples, params.contacts_per_region, params.mu, reference, seed, &rp.contacts_a,
                      &rp.contacts_b);
        out.push_back(std::move(rp));
    }
    return out;
}

} // namespace bidex
