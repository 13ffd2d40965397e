#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "bidex/config.hpp"
#include "bidex/dataset.hpp"
#include "bidex/metrics.hpp"
#include "bidex/pipeline.hpp"
#include "bidex/rng.hpp"
#include "test_support.hpp"

using namespace bidex;
using nlohmann::json;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool same_pose(const HandPose& a, const HandPose& b)
{
    for (int i = 0; i < 3; ++i)
        if (!same_bits(a.translation[i], b.translation[i]))
            return false;
    for (int i = 0; i < 4; ++i)
        if (!same_bits(a.rotation.coeffs()[i], b.rotation.coeffs()[i]))
            return false;
    if (a.joints.size() != b.joints.size())
        return false;
    for (Eigen::Index i = 0; i < a.joints.size(); ++i)
        if (!same_bits(a.joints[i], b.joints[i]))
            return false;
    return true;
}

HandPose random_pose(CounterRng& rng, int joints)
{
    HandPose p;
    p.translation = Vec3(rng.normal(), rng.normal(), rng.normal()) / 3.0;
    Eigen::Vector4d q = rng.unit_vector<4>();
    p.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    p.joints = Eigen::VectorXd(joints);
    for (int k = 0; k < joints; ++k)
        p.joints[k] = rng.uniform(0.0, 1.5);
    return p;
}

GraspRecord random_record(CounterRng& rng)
{
    GraspRecord r;
    r.object_id = "obj";
    r.source = "primitive:sphere:r=0.15:s=4";
    r.scale = rng.uniform(0.3, 0.8);
    r.scale_factor = rng.uniform();
    r.pose_id = 1;
    r.seed = rng.next_u64();
    r.object_index = 2;
    r.scale_index = 3;
    r.candidate = 17;
    r.region = {5, 9, Vec3(rng.normal(), 0.1, 1e-17), Vec3(-0.0, rng.normal(), 3.0), rng.uniform()};
    r.grasp = {random_pose(rng, 6), random_pose(rng, 6)};
    r.pre = {random_pose(rng, 6), random_pose(rng, 6)};
    r.squeeze = {random_pose(rng, 6), random_pose(rng, 6)};
    r.energy = {rng.uniform(), rng.uniform(), 1e-300, rng.uniform(), 0.0, rng.normal()};
    r.final_w_col = 1e6;
    r.metrics = {rng.uniform(), rng.uniform(), rng.uniform(), 0.0, 1e-9, rng.uniform(), 7, true};
    r.timings_ms = {{"optimize", 12.5}, {"init", 0.25}};
    return r;
}

// A small, fast configuration on a sphere.
RunConfig small_config()
{
    RunConfig c;
    ObjectSpec o;
    o.id = "ball";
    o.primitive = PrimitiveSpec{"sphere", 0.15, 0.0, Vec3::Zero(), 3, 48};
    c.objects.push_back(o);
    c.scales.explicit_sizes = {0.5};
    c.surface_samples = 1024;
    c.regions.num_anchors = 40;
    c.regions.num_directions = 200;
    c.regions.top_k = 6;
    c.optimizer.iterations = 60;
    c.optimizer.anneal_at = {30, 45};
    c.candidates_per_pair = 2;
    c.grasps_per_object = 4;
    c.seed = 5;
    return c;
}

} // namespace

TEST_CASE("config parsing")
{
    RunConfig def;
    CHECK(def.scales.sizes().size() == 11);
    CHECK(def.scales.sizes().front() == 0.30);
    CHECK(def.scales.sizes().back() == doctest::Approx(0.80));
    CHECK(def.success.beta == def.weights.beta);

    json j = {{"objects", {{{"mesh", "meshes/a.obj"}}, {{"id", "b"}, {"primitive", {{"type", "box"}, {"extents", {0.1, 0.2, 0.3}}}}}}},
              {"scales", {{"min", 0.4}, {"max", 0.6}, {"count", 3}}},
              {"weights", {{"beta", 0.5}, {"mu", 0.8}}},
              {"success", {{"epsilon", 0.1}}},
              {"workers", 3},
              {"output", "out/x.jsonl"}};
    RunConfig c = RunConfig::from_json(j, "/base");
    REQUIRE(c.objects.size() == 2);
    CHECK(c.objects[0].id == "a");
    CHECK(c.objects[0].mesh == std::filesystem::path("/base/meshes/a.obj"));
    CHECK(c.objects[1].source() == "primitive:box:e=0.10000000000000001,0.20000000000000001,0.29999999999999999");
    CHECK(c.scales.sizes() == std::vector<double>{0.4, 0.5, 0.6});
    CHECK(c.success.beta == 0.5);
    CHECK(c.success.mu == 0.8);
    CHECK(c.regions.mu == 0.8);
    CHECK(c.success.epsilon == 0.1);
    CHECK(c.output == std::filesystem::path("/base/out/x.jsonl"));

    // Serialized form reads back to the same configuration.
    RunConfig back = RunConfig::from_json(json::parse(c.to_json().dump()));
    CHECK(back.to_json().dump() == c.to_json().dump());

    auto bad = [](json patch) {
        json base = {{"objects", json::array()}};
        base.merge_patch(patch);
        return base;
    };
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"typo", 1}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"scales", {{"min", 0.8}, {"max", 0.3}}}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"scales", {{"min", -1.0}}}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"scales", {{"count", 0}}}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"workers", 0}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"weights", {{"w_qq", 1}}}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(bad({{"seed", "x"}})), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"objects", {{{"primitive", {{"type", "torus"}}}}}}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"objects", {{{"id", "x"}}}}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), IoError);
}

TEST_CASE("tabletop rest pose")
{
    TriangleMesh cyl = make_cylinder(0.15, 0.6);
    TriangleMesh placed = cyl.transformed(rest_on_table(cyl, 0, 0.1));
    Eigen::AlignedBox3d b = placed.bounds();
    CHECK(b.min().z() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(b.sizes().z() == doctest::Approx(0.3).epsilon(1e-9)); // lying on its side
    CHECK(b.center().x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(b.center().y()) < 1e-12);

    TriangleMesh upright = cyl.transformed(rest_on_table(cyl, 2, 0.0));
    CHECK(upright.bounds().sizes().z() == doctest::Approx(0.6).epsilon(1e-9));

    // A cube keeps its orientation.
    TriangleMesh cube = make_box({0.2, 0.2, 0.2});
    Eigen::Isometry3d T = rest_on_table(cube, 0, 0.0);
    CHECK(T.linear().isIdentity(1e-15));
    CHECK(T.translation().z() == doctest::Approx(0.1));
}

TEST_CASE("record round trip is bit exact")
{
    CounterRng rng(3);
    for (int i = 0; i < 20; ++i) {
        GraspRecord r = random_record(rng);
        if (i % 2)
            r.timings_ms.clear();
        const std::string line = serialize_record(r);
        GraspRecord back = record_from_json(json::parse(line));
        CHECK(serialize_record(back) == line);
        CHECK(same_pose(back.grasp.left, r.grasp.left));
        CHECK(same_pose(back.pre.right, r.pre.right));
        CHECK(same_pose(back.squeeze.left, r.squeeze.left));
        CHECK(back.seed == r.seed);
        CHECK(same_bits(back.energy.dis, r.energy.dis));
        CHECK(same_bits(back.region.position_right.x(), r.region.position_right.x()));
        CHECK(back.timings_ms == r.timings_ms);
    }
}

TEST_CASE("dataset reading reports malformed lines")
{
    CounterRng rng(8);
    std::stringstream ss;
    ss << serialize_record(random_record(rng)) << "\n\n{not json\n"
       << serialize_record(random_record(rng)) << "\n{\"object_id\": \"x\"}\n";
    ParsedDataset d = read_dataset(ss);
    CHECK(d.records.size() == 2);
    REQUIRE(d.errors.size() == 2);
    CHECK(d.errors[0].first == 3);
    CHECK(d.errors[1].first == 5);
}

TEST_CASE("evaluation statistics")
{
    CounterRng rng(9);
    std::vector<GraspRecord> recs;
    const double pd[3] = {0.001, 0.002, 0.006};
    for (int i = 0; i < 3; ++i) {
        GraspRecord r = random_record(rng);
        r.object_id = "a";
        r.metrics.pd = pd[i];
        r.metrics.spd = 0.0;
        r.metrics.cdc = 0.001 * i;
        r.metrics.analytic_success = i != 1;
        recs.push_back(r);
    }
    EvaluationReport rep = evaluate_records(recs);
    REQUIRE(rep.objects.size() == 1);
    CHECK(rep.aggregate.pd_mean == doctest::Approx(0.003).epsilon(1e-15));
    CHECK(rep.aggregate.cdc_mean == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(rep.aggregate.success_rate == doctest::Approx(2.0 / 3.0));
    REQUIRE(rep.objects[0].second.d.has_value());

    // Identical grasps: D = 1 by the degenerate-variance rule.
    std::vector<GraspRecord> same(4, recs[0]);
    for (std::size_t i = 0; i < same.size(); ++i)
        same[i].object_id = i < 2 ? "p" : "q";
    EvaluationReport one = evaluate_records(same);
    REQUIRE(one.objects.size() == 2);
    CHECK(*one.objects[0].second.d == 1.0);
    CHECK(*one.aggregate.d == 1.0);

    // D is the mean of per-object values; single-grasp objects have none.
    std::vector<GraspRecord> mixed = recs;
    mixed.push_back(recs[0]);
    mixed.back().object_id = "lonely";
    EvaluationReport m = evaluate_records(mixed);
    CHECK_FALSE(m.objects[1].second.d.has_value());
    CHECK(*m.aggregate.d == *rep.aggregate.d);
}

TEST_CASE("empty object list gives an empty dataset")
{
    RunConfig c;
    std::vector<std::string> log;
    std::stringstream out;
    SynthesisSummary s = synthesize(c, out, [&](const std::string& m) { log.push_back(m); });
    CHECK(out.str().empty());
    CHECK(s.total.candidates == 0);
    REQUIRE_FALSE(log.empty());
    CHECK(log[0].find("warning") != std::string::npos);
}

TEST_CASE("unreadable mesh is skipped")
{
    RunConfig c = small_config();
    ObjectSpec missing;
    missing.id = "missing";
    missing.mesh = "/nonexistent/mesh.obj";
    c.objects.insert(c.objects.begin(), missing);
    c.grasps_per_object = 1;
    std::stringstream out;
    SynthesisSummary s = synthesize(c, out);
    REQUIRE(s.objects.size() == 2);
    CHECK(s.objects[0].errors.size() == 1);
    CHECK(s.objects[0].counts.candidates == 0);
}

TEST_CASE("synthesis is deterministic across worker counts and consistent")
{
    RunConfig c = small_config();
    std::string reference;
    SynthesisSummary first;
    for (int workers : {1, 4, 8}) {
        c.workers = workers;
        std::stringstream out;
        SynthesisSummary s = synthesize(c, out);
        if (workers == 1) {
            reference = out.str();
            first = s;
        } else {
            CHECK(out.str() == reference);
            CHECK(s.total.to_json().dump() == first.total.to_json().dump());
        }
    }

    const StageCounts& n = first.total;
    CHECK(n.initialized == n.verified_pass + n.verified_fail);
    CHECK(n.optimized <= n.verified_pass);
    CHECK(n.candidates == n.initialized + n.init_failed + n.errors);
    CHECK(n.emitted <= static_cast<std::size_t>(c.grasps_per_object));

    std::stringstream in(reference);
    ParsedDataset data = read_dataset(in);
    REQUIRE(data.errors.empty());
    REQUIRE(data.records.size() == n.emitted);
    REQUIRE_FALSE(data.records.empty());

    // Stored metrics recompute from the stored poses; every record is feasible.
    Hands hands = load_hands(c);
    const GraspRecord& r0 = data.records[0];
    PreparedObject obj = prepare_object(c.objects[0], c.objects[0].load(), r0.scale, r0.pose_id, c,
                                        sampling_seed(c.seed, 0, 0));
    CHECK(obj.scale_factor == r0.scale_factor);
    std::size_t prev = 0;
    for (const auto& r : data.records) {
        CHECK(r.candidate >= prev);
        prev = r.candidate;
        SuccessResult s = analytic_success(r.grasp, hands.left, hands.right, *obj.sdf, obj.reference, c.success);
        CHECK(std::abs(s.q - r.metrics.q) <= 1e-9);
        CHECK(std::abs(s.pd - r.metrics.pd) <= 1e-9);
        CHECK(std::abs(s.spd - r.metrics.spd) <= 1e-9);
        CHECK(s.pass == r.metrics.analytic_success);
        CHECK(std::abs(contact_distance_consistency(r.grasp, hands.left, hands.right, *obj.sdf) - r.metrics.cdc) <=
              1e-9);
        CHECK(verify_feasibility(r.grasp, hands.left, hands.right, obj.sdf.get(), c.table_height, c.workspace).pass);
        CHECK(verify_feasibility(r.pre, hands.left, hands.right, obj.sdf.get(), c.table_height, c.workspace).pass);
        CHECK(r.grasp.left.valid(hands.left));
        CHECK(r.grasp.right.valid(hands.right));
        CHECK(r.timings_ms.empty());
    }
}

TEST_CASE("grasp quota spreads over scales")
{
    RunConfig c = small_config();
    c.scales.explicit_sizes = {0.45, 0.55};
    c.grasps_per_object = 3;
    std::stringstream out;
    SynthesisSummary s = synthesize(c, out);
    std::stringstream in(out.str());
    ParsedDataset d = read_dataset(in);
    CHECK(d.records.size() <= 3);
    std::size_t per_scale[2] = {0, 0};
    for (const auto& r : d.records)
        ++per_scale[r.scale_index];
    CHECK(per_scale[0] <= 2);
    CHECK(s.total.emitted == d.records.size());
}
