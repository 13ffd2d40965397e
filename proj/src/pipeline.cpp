#include "bidex/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bidex/init.hpp"
#include "bidex/metrics.hpp"
#include "bidex/parallel.hpp"
#include "bidex/rng.hpp"

namespace bidex {

namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

// Tags keep per-(object, scale) seeds apart from candidate seeds.
constexpr std::uint64_t kSamplingTag = 0x73616d706c650000ULL;
constexpr std::uint64_t kRegionTag = 0x726567696f6e0000ULL;

std::string format_size(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

} // namespace

Eigen::Isometry3d rest_on_table(const TriangleMesh& mesh, int pose_id, double table_height)
{
    if (pose_id < 0 || pose_id > 2)
        throw std::invalid_argument("pose_id must be 0, 1 or 2");
    const Vec3 extent = mesh.bounds().sizes();
    const double tol = 1e-9 * std::max(extent.maxCoeff(), 1e-300);
    // z first so that ties leave the mesh upright.
    std::array<int, 3> axes = {2, 0, 1};
    std::stable_sort(axes.begin(), axes.end(), [&](int a, int b) { return extent[a] < extent[b] - tol; });
    const int up = axes[pose_id];

    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    if (up == 0)
        T.linear() = Eigen::AngleAxisd(-M_PI / 2.0, Vec3::UnitY()).toRotationMatrix(); // x -> z
    else if (up == 1)
        T.linear() = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitX()).toRotationMatrix(); // y -> z
    Eigen::AlignedBox3d box;
    box.setEmpty();
    for (const auto& v : mesh.vertices())
        box.extend(T.linear() * v);
    T.translation() = Vec3(-box.center().x(), -box.center().y(), table_height - box.min().z());
    return T;
}

PreparedObject prepare_object(const ObjectSpec& spec, const TriangleMesh& unit_mesh, double size, int pose_id,
                              const RunConfig& config, std::uint64_t sample_seed)
{
    PreparedObject p;
    p.id = spec.id;
    p.source = spec.source();
    p.size = size;
    p.pose_id = pose_id;
    p.scale_factor = scale_for_size(unit_mesh, size);
    TriangleMesh scaled = unit_mesh.scaled(p.scale_factor);
    TriangleMesh placed = scaled.transformed(rest_on_table(scaled, pose_id, config.table_height));
    p.mesh = std::make_shared<const TriangleMesh>(std::move(placed));
    p.sdf = std::make_unique<MeshDistance>(p.mesh);
    p.samples = sample_surface(*p.mesh, config.surface_samples, sample_seed);
    p.hull = std::make_unique<MeshDistance>(dilated_convex_hull(p.samples, config.hull_offset));
    p.reference = p.mesh->centroid();
    return p;
}

RegionParams effective_region_params(const RunConfig& config)
{
    RegionParams p = config.regions;
    p.min_anchor_height = config.table_height + config.table_clearance;
    p.workers = config.workers;
    return p;
}

Hands load_hands(const RunConfig& config)
{
    HandModel hand = config.hand.empty() ? HandModel::default_hand() : HandModel::load(config.hand);
    if (hand.chirality() == Chirality::Left)
        return {hand, hand.mirrored()};
    return {hand.mirrored(), hand};
}

StageCounts& StageCounts::operator+=(const StageCounts& o)
{
    candidates += o.candidates;
    errors += o.errors;
    init_failed += o.init_failed;
    initialized += o.initialized;
    verified_pass += o.verified_pass;
    verified_fail += o.verified_fail;
    optimized += o.optimized;
    analytic_pass += o.analytic_pass;
    post_verify_fail += o.post_verify_fail;
    pregrasp_fail += o.pregrasp_fail;
    pre_verify_fail += o.pre_verify_fail;
    emitted += o.emitted;
    return *this;
}

double StageCounts::pass_rate() const
{
    return optimized == 0 ? 0.0 : static_cast<double>(analytic_pass) / static_cast<double>(optimized);
}

ordered_json StageCounts::to_json() const
{
    ordered_json j;
    j["candidates"] = candidates;
    j["errors"] = errors;
    j["init_failed"] = init_failed;
    j["initialized"] = initialized;
    j["verified_pass"] = verified_pass;
    j["verified_fail"] = verified_fail;
    j["optimized"] = optimized;
    j["analytic_pass"] = analytic_pass;
    j["post_verify_fail"] = post_verify_fail;
    j["pregrasp_fail"] = pregrasp_fail;
    j["pre_verify_fail"] = pre_verify_fail;
    j["emitted"] = emitted;
    j["pass_rate"] = pass_rate();
    return j;
}

std::uint64_t candidate_seed(std::uint64_t master, std::size_t object, std::size_t scale, std::size_t candidate)
{
    return hash_seed({master, object, scale, candidate});
}

std::uint64_t sampling_seed(std::uint64_t master, std::size_t object, std::size_t scale)
{
    return hash_seed({master, object, scale, kSamplingTag});
}

std::uint64_t region_seed(std::uint64_t master, std::size_t object, std::size_t scale)
{
    return hash_seed({master, object, scale, kRegionTag});
}

CandidateOutcome run_candidate(const PreparedObject& object, const RegionPair& input, const Hands& hands,
                               const RunConfig& config, std::uint64_t seed)
{
    CandidateOutcome out;
    out.counts.candidates = 1;
    const HandModel& left = hands.left;
    const HandModel& right = hands.right;
    const SurfaceSamples& samples = object.samples;

    RegionPair pair = input;
    if (samples.points[pair.a.anchor].y() < samples.points[pair.b.anchor].y()) {
        std::swap(pair.a, pair.b);
        std::swap(pair.contacts_a, pair.contacts_b);
    }

    const auto t_start = Clock::now();
    ObjectContext ctx{&samples, object.sdf.get(), object.hull.get(), config.table_height};
    BiGraspPose init;
    try {
        init = initialize_bigrasp(pair, left, right, ctx, config.init, seed);
    } catch (const InitError& e) {
        out.counts.init_failed = 1;
        out.failure = std::string("init: ") + e.what();
        return out;
    }
    out.counts.initialized = 1;
    const double t_init = ms_since(t_start);

    if (auto rep = verify_feasibility(init, left, right, object.sdf.get(), config.table_height, config.workspace);
        !rep.pass) {
        out.counts.verified_fail = 1;
        out.failure = "verify(init): " + rep.summary();
        return out;
    }
    out.counts.verified_pass = 1;

    GraspProblem problem;
    problem.left = &left;
    problem.right = &right;
    problem.object = object.sdf.get();
    problem.reference = object.reference;
    problem.table_height = config.table_height;
    for (auto m : pair.a.members)
        problem.region_left.push_back(samples.points[m]);
    for (auto m : pair.b.members)
        problem.region_right.push_back(samples.points[m]);

    const auto t_opt = Clock::now();
    OptimResult opt = optimize(init, problem, config.weights, config.optimizer);
    out.counts.optimized = 1;
    const double ms_opt = ms_since(t_opt);

    const auto t_metrics = Clock::now();
    SuccessResult success =
        analytic_success(opt.grasp, left, right, *object.sdf, object.reference, config.success);
    if (success.pass)
        out.counts.analytic_pass = 1;
    const double cdc = contact_distance_consistency(opt.grasp, left, right, *object.sdf);
    const double ms_metrics = ms_since(t_metrics);

    if (auto rep = verify_feasibility(opt.grasp, left, right, object.sdf.get(), config.table_height, config.workspace);
        !rep.pass) {
        out.counts.post_verify_fail = 1;
        out.failure = "verify(grasp): " + rep.summary();
        return out;
    }

    const auto t_pre = Clock::now();
    PregraspResult pg = pregrasp_and_squeeze(opt.grasp, left, right, *object.sdf, config.pregrasp);
    if (!pg.ok) {
        out.counts.pregrasp_fail = 1;
        out.failure = "pregrasp: " + pg.reason;
        return out;
    }
    if (auto rep = verify_feasibility(pg.pre, left, right, object.sdf.get(), config.table_height, config.workspace);
        !rep.pass) {
        out.counts.pre_verify_fail = 1;
        out.failure = "verify(pre): " + rep.summary();
        return out;
    }
    const double ms_pre = ms_since(t_pre);

    out.counts.emitted = 1;
    out.emitted = true;
    GraspRecord& r = out.record;
    r.object_id = object.id;
    r.source = object.source;
    r.scale = object.size;
    r.scale_factor = object.scale_factor;
    r.pose_id = object.pose_id;
    r.seed = seed;
    r.region.anchor_left = pair.a.anchor;
    r.region.anchor_right = pair.b.anchor;
    r.region.position_left = samples.points[pair.a.anchor];
    r.region.position_right = samples.points[pair.b.anchor];
    r.region.score = pair.score;
    r.grasp = opt.grasp;
    r.pre = pg.pre;
    r.squeeze = pg.squeeze;
    r.energy = opt.final_energy.terms;
    r.final_w_col = opt.trace.final_w_col;
    r.metrics.q_left = opt.final_energy.terms.q_left;
    r.metrics.q_right = opt.final_energy.terms.q_right;
    r.metrics.q = success.q;
    r.metrics.pd = success.pd;
    r.metrics.spd = success.spd;
    r.metrics.cdc = cdc;
    r.metrics.active_contacts = success.active_contacts;
    r.metrics.analytic_success = success.pass;
    if (config.record_timings) {
        r.timings_ms["init"] = t_init;
        r.timings_ms["optimize"] = ms_opt;
        r.timings_ms["metrics"] = ms_metrics;
        r.timings_ms["pregrasp"] = ms_pre;
        r.timings_ms["total"] = ms_since(t_start);
    }
    return out;
}

ordered_json SynthesisSummary::to_json() const
{
    ordered_json j;
    j["total"] = total.to_json();
    ordered_json objs = ordered_json::array();
    for (const auto& o : objects) {
        ordered_json oj;
        oj["object_id"] = o.id;
        oj["counts"] = o.counts.to_json();
        oj["errors"] = o.errors;
        objs.push_back(oj);
    }
    j["objects"] = objs;
    j["seconds"] = seconds;
    return j;
}

SynthesisSummary synthesize(const RunConfig& config, std::ostream& out, const LogFn& log)
{
    auto say = [&](const std::string& msg) {
        if (log)
            log(msg);
    };
    const auto t0 = Clock::now();
    SynthesisSummary summary;
    if (config.objects.empty())
        say("warning: no objects configured; the dataset is empty");

    const Hands hands = load_hands(config);
    const RegionParams region_params = effective_region_params(config);
    const std::vector<double> sizes = config.scales.sizes();
    const std::size_t n_poses = config.tabletop_poses.size();
    const std::size_t n_units = sizes.size() * n_poses;

    for (std::size_t oi = 0; oi < config.objects.size(); ++oi) {
        const ObjectSpec& spec = config.objects[oi];
        ObjectSummary os;
        os.id = spec.id;
        auto fail = [&](const std::string& msg) {
            os.errors.push_back(msg);
            say("object " + spec.id + ": " + msg);
        };

        TriangleMesh unit;
        try {
            unit = spec.load();
        } catch (const std::exception& e) {
            fail(std::string("skipped: ") + e.what());
            summary.objects.push_back(std::move(os));
            continue;
        }

        std::size_t remaining = static_cast<std::size_t>(config.grasps_per_object);
        const bool limited = config.grasps_per_object > 0;
        for (std::size_t u = 0; u < n_units; ++u) {
            if (limited && remaining == 0)
                break;
            const std::size_t si = u / n_poses;
            const int pose_id = config.tabletop_poses[u % n_poses];
            const std::size_t quota =
                limited ? (remaining + (n_units - u) - 1) / (n_units - u) : std::numeric_limits<std::size_t>::max();
            const std::string where = "size " + format_size(sizes[si]) + " pose " + std::to_string(pose_id);

            PreparedObject prepared;
            std::vector<RegionPair> pairs;
            try {
                prepared = prepare_object(spec, unit, sizes[si], pose_id, config, sampling_seed(config.seed, oi, u));
                pairs = select_region_pairs(prepared.samples, prepared.reference, region_params,
                                            region_seed(config.seed, oi, u));
            } catch (const std::exception& e) {
                fail(where + ": " + e.what());
                continue;
            }

            StageCounts unit_counts;
            std::size_t emitted = 0;
            const std::size_t per_pair = static_cast<std::size_t>(config.candidates_per_pair);
            const std::size_t n_candidates = pairs.size() * per_pair;
            for (std::size_t begin = 0; begin < n_candidates && emitted < quota; begin += kCandidateChunk) {
                const std::size_t n = std::min(kCandidateChunk, n_candidates - begin);
                std::vector<CandidateOutcome> outcomes(n);
                parallel_for(n, config.workers, [&](std::size_t k) {
                    const std::size_t c = begin + k;
                    const std::uint64_t seed = candidate_seed(config.seed, oi, u, c);
                    try {
                        outcomes[k] = run_candidate(prepared, pairs[c / per_pair], hands, config, seed);
                    } catch (const std::exception& e) {
                        outcomes[k] = CandidateOutcome{};
                        outcomes[k].counts.candidates = 1;
                        outcomes[k].counts.errors = 1;
                        outcomes[k].failure = std::string("error: ") + e.what();
                    }
                });
                for (std::size_t k = 0; k < n && emitted < quota; ++k) {
                    CandidateOutcome& o = outcomes[k];
                    unit_counts += o.counts;
                    if (o.counts.errors)
                        fail(where + " candidate " + std::to_string(begin + k) + ": " + o.failure);
                    if (!o.emitted)
                        continue;
                    o.record.object_index = oi;
                    o.record.scale_index = si;
                    o.record.candidate = begin + k;
                    out << serialize_record(o.record) << '\n';
                    ++emitted;
                }
            }
            if (limited)
                remaining -= std::min(remaining, emitted);
            os.counts += unit_counts;
            std::ostringstream msg;
            msg << "object " << spec.id << " " << where << ": " << pairs.size() << " pairs, "
                << unit_counts.candidates << " candidates, " << unit_counts.optimized << " optimized, "
                << unit_counts.analytic_pass << " analytic pass, " << emitted << " emitted";
            say(msg.str());
        }
        summary.total += os.counts;
        summary.objects.push_back(std::move(os));
    }
    out.flush();
    summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return summary;
}

SynthesisSummary synthesize_to_file(const RunConfig& config, const LogFn& log)
{
    std::error_code ec;
    if (config.output.has_parent_path())
        std::filesystem::create_directories(config.output.parent_path(), ec);
    std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write output: " + config.output.string());
    SynthesisSummary summary = synthesize(config, out, log);
    out.close();
    if (!out)
        throw IoError("write failed: " + config.output.string());
    return summary;
}

} // namespace bidex
