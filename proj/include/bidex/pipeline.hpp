#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidex/config.hpp"
#include "bidex/dataset.hpp"
#include "bidex/mesh_distance.hpp"

namespace bidex {

/// Rigid transform that rests the mesh on the table: the `pose_id`-th
/// smallest bounding-box extent becomes vertical (ties prefer z, then x, y),
/// the box is centered at x = y = 0 and its bottom touches the table.
Eigen::Isometry3d rest_on_table(const TriangleMesh& mesh, int pose_id, double table_height);

/// Immutable per-(object, scale, pose) geometry shared by all candidates.
struct PreparedObject
{
    std::string id;
    std::string source;
    double size = 0.0;
    double scale_factor = 0.0;
    int pose_id = 0;
    std::shared_ptr<const TriangleMesh> mesh;
    std::unique_ptr<MeshDistance> sdf;
    std::unique_ptr<MeshDistance> hull;
    SurfaceSamples samples;
    Vec3 reference = Vec3::Zero(); // volume centroid
};

PreparedObject prepare_object(const ObjectSpec& spec, const TriangleMesh& unit_mesh, double size, int pose_id,
                              const RunConfig& config, std::uint64_t sample_seed);

/// Region parameters actually used by the pipeline (table clearance and
/// worker count applied).
RegionParams effective_region_params(const RunConfig& config);

struct Hands
{
    HandModel left;
    HandModel right;
};

/// Right hand from the config (or the built-in one) and its mirror.
Hands load_hands(const RunConfig& config);

/// Filter stage counts. Conservation: initialized = verified_pass +
/// verified_fail, optimized <= verified_pass.
struct StageCounts
{
    std::size_t candidates = 0;
    std::size_t errors = 0; // unexpected exceptions
    std::size_t init_failed = 0;
    std::size_t initialized = 0;
    std::size_t verified_pass = 0;
    std::size_t verified_fail = 0;
    std::size_t optimized = 0;
    std::size_t analytic_pass = 0;
    std::size_t post_verify_fail = 0;
    std::size_t pregrasp_fail = 0;
    std::size_t pre_verify_fail = 0;
    std::size_t emitted = 0;

    StageCounts& operator+=(const StageCounts& o);
    /// analytic_pass / optimized, 0 when nothing was optimized.
    double pass_rate() const;
    nlohmann::ordered_json to_json() const;
};

struct CandidateOutcome
{
    StageCounts counts; // this candidate's contribution
    bool emitted = false;
    GraspRecord record;
    std::string failure; // stage and reason when not emitted
};

/// Derived seeds. Candidate seeds follow hash(master, object, scale, candidate);
/// per-(object, scale) sampling and region seeds add a tag so they never
/// collide with a candidate index.
std::uint64_t candidate_seed(std::uint64_t master, std::size_t object, std::size_t scale, std::size_t candidate);
std::uint64_t sampling_seed(std::uint64_t master, std::size_t object, std::size_t scale);
std::uint64_t region_seed(std::uint64_t master, std::size_t object, std::size_t scale);

/// Initialize, verify, optimize, pre-grasp, verify and measure one candidate.
/// The left hand takes the region whose anchor has the larger y.
CandidateOutcome run_candidate(const PreparedObject& object, const RegionPair& pair, const Hands& hands,
                               const RunConfig& config, std::uint64_t seed);

struct ObjectSummary
{
    std::string id;
    StageCounts counts;
    std::vector<std::string> errors;
};

struct SynthesisSummary
{
    StageCounts total;
    std::vector<ObjectSummary> objects;
    double seconds = 0.0;

    nlohmann::ordered_json to_json() const;
};

using LogFn = std::function<void(const std::string&)>;

/// Candidates run in fixed-size chunks in parallel; records are written in
/// (object, scale, candidate) order and the per-object quota truncates in
/// candidate order, so the output does not depend on the worker count.
/// Per-object failures are logged and skipped.
SynthesisSummary synthesize(const RunConfig& config, std::ostream& out, const LogFn& log = {});

/// Writes to config.output. Throws IoError when it cannot be opened.
SynthesisSummary synthesize_to_file(const RunConfig& config, const LogFn& log = {});

inline constexpr std::size_t kCandidateChunk = 16;

} // namespace bidex
