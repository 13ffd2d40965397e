#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bidex/geometry.hpp"
#include "bidex/wrench.hpp"

namespace bidex {

class RegionSelectionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct RegionParams
{
    std::size_t num_anchors = 200;       // K_a
    std::size_t region_size = 256;       // k
    double radius = 0.08;                // neighborhood radius, meters
    std::size_t contacts_per_region = 5; // N
    std::size_t num_directions = 1000;   // M
    std::size_t top_k = 40;              // K_r
    double min_distance = 0.10;          // d_min between anchors, meters
    double concave_threshold = 0.002;    // tau_concave, meters
    double mu = 0.6;
    /// Anchors below this height (world z) are dropped, e.g. regions the
    /// table blocks. -inf disables the filter.
    double min_anchor_height = -std::numeric_limits<double>::infinity();
    int workers = 1;
};

struct RegionPair
{
    Region a;
    Region b;
    double score = 0.0;
    std::vector<std::size_t> contacts_a; // sample indices used for scoring
    std::vector<std::size_t> contacts_b;
};

/// N member indices drawn uniformly without replacement (with replacement
/// when the region is smaller than N). Depends only on (seed, anchor).
std::vector<std::size_t> sample_region_contacts(const Region& region, std::size_t count, std::uint64_t seed);

/// Contact state of the given samples with inward normals, torques about `reference`.
ContactState contacts_from_samples(const SurfaceSamples& samples, const std::vector<std::size_t>& indices,
                                   const Vec3& reference, double mu);

/// Stability score: smallest projection of the grasp wrench boundary onto the
/// disturbance axes. The sampled boundary is augmented with the exact support
/// value along each axis. `directions` are the shared GWB sample directions.
double stability_score(const ContactState& contacts, const std::vector<Wrench>& directions);

/// Convenience form: samples contacts from both regions and scores them.
/// Symmetric in (a, b).
double stability_score(const Region& a, const Region& b, const SurfaceSamples& samples, std::size_t n_contacts,
                       std::size_t n_directions, double mu, const Vec3& reference, std::uint64_t seed);

/// Unit directions for GWB sampling, a pure function of (count, seed).
std::vector<Wrench> gwb_directions(std::size_t count, std::uint64_t seed);

/// FPS anchors, neighborhoods, concavity and distance filtering, scoring of
/// all surviving pairs, top-K by descending score (ties by anchor indices).
/// Throws RegionSelectionError when no pair survives the filters.
std::vector<RegionPair> select_region_pairs(const SurfaceSamples& samples, const Vec3& reference,
                                            const RegionParams& params, std::uint64_t seed);

} // namespace bidex
