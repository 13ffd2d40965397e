#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidex/geometry.hpp"
#include "bidex/init.hpp"
#include "bidex/metrics.hpp"
#include "bidex/optim.hpp"
#include "bidex/regions.hpp"

namespace bidex {

/// Invalid or inconsistent run configuration (CLI exit code 1).
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable input or unwritable output (CLI exit code 2).
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Analytic shape used in place of a mesh file.
struct PrimitiveSpec
{
    std::string type; // "sphere", "box" or "cylinder"
    double radius = 0.0;
    double height = 0.0;
    Vec3 extents = Vec3::Zero();
    int subdivisions = 4; // icosphere level
    int segments = 48;    // cylinder
};

struct ObjectSpec
{
    std::string id;
    std::filesystem::path mesh; // used when `primitive` is empty
    std::optional<PrimitiveSpec> primitive;

    /// Mesh path, or a canonical description such as "primitive:sphere:r=0.15:s=4".
    std::string source() const;
    /// Unscaled, closed, outward-oriented mesh.
    TriangleMesh load() const;
};

/// Object sizes (bounding-box diagonal, meters).
struct ScaleSweep
{
    double min = 0.30;
    double max = 0.80;
    int count = 11;
    std::vector<double> explicit_sizes; // overrides min/max/count when non-empty

    std::vector<double> sizes() const;
};

struct RunConfig
{
    std::filesystem::path hand; // empty: built-in default (right); the other hand is its mirror
    std::vector<ObjectSpec> objects;
    ScaleSweep scales;
    /// Resting poses per object; pose k puts the k-th smallest bounding-box
    /// extent vertical, so pose 0 rests on the largest face.
    std::vector<int> tabletop_poses = {0};
    std::size_t surface_samples = 4096;
    double hull_offset = 0.02;
    double table_height = 0.0;
    double table_clearance = 0.06; // anchors closer than this to the table are dropped
    std::array<WorkspaceSphere, 2> workspace{WorkspaceSphere{Vec3(0.0, 0.45, 0.3), 0.8},
                                             WorkspaceSphere{Vec3(0.0, -0.45, 0.3), 0.8}};
    RegionParams regions;
    InitParams init;
    EnergyWeights weights = default_weights();
    OptimConfig optimizer;
    PregraspOptions pregrasp;
    SuccessCriteria success = default_success();
    int candidates_per_pair = 2;
    int grasps_per_object = 20; // target records per object over all scales; 0 = no limit
    int workers = 1;
    std::uint64_t seed = 0;
    std::filesystem::path output = "grasps.jsonl";
    bool record_timings = false; // timings make the dataset run-dependent

    /// Weights used by the pipeline. Q is in units of beta^2 and the geometric
    /// terms in m^2, so the distance and collision weights are much larger than
    /// the per-hand Q weights.
    static EnergyWeights default_weights();
    static SuccessCriteria default_success();

    /// Unknown keys and out-of-range values raise ConfigError. Relative paths
    /// resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;

    void validate() const;
};

ObjectSpec object_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RegionParams region_params_from_json(const nlohmann::json& j, RegionParams base = {});

} // namespace bidex
