#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "bidex/metrics.hpp"
#include "bidex/rng.hpp"
#include "test_support.hpp"

using namespace bidex;
using nlohmann::json;

namespace {

// Rigid probe hand: one link, explicit contacts and spheres.
HandModel probe_hand(const std::vector<Vec3>& contacts, const std::vector<std::pair<Vec3, double>>& spheres,
                     const std::vector<bool>& fingertip = {})
{
    json j;
    j["links"] = {"palm"};
    j["joints"] = json::array();
    for (const auto& [c, r] : spheres)
        j["collision_spheres"].push_back({{"link", "palm"}, {"center", {c.x(), c.y(), c.z()}}, {"radius", r}});
    for (std::size_t i = 0; i < contacts.size(); ++i)
        j["contacts"].push_back({{"link", "palm"},
                                 {"point", {contacts[i].x(), contacts[i].y(), contacts[i].z()}},
                                 {"fingertip", fingertip.empty() ? true : bool(fingertip[i])}});
    return HandModel::from_json(j);
}

// Chain palm -> middle -> tip with overlapping spheres on every link.
// Parent-child pairs are exempt by construction; palm-tip only on request.
HandModel chain_hand(bool exempt_palm_tip)
{
    json hinge = {{"axis", {1, 0, 0}}, {"limit", {{"lower", -1.0}, {"upper", 1.0}}}};
    json j1 = hinge, j2 = hinge;
    j1["parent"] = "palm";
    j1["child"] = "middle";
    j2["parent"] = "middle";
    j2["child"] = "tip";
    json j{{"links", {"palm", "middle", "tip"}},
           {"joints", json::array({j1, j2})},
           {"collision_spheres",
            {{{"link", "palm"}, {"center", {0, 0, 0}}, {"radius", 0.01}},
             {{"link", "middle"}, {"center", {0, 0, 0.002}}, {"radius", 0.01}},
             {{"link", "tip"}, {"center", {0, 0, 0.005}}, {"radius", 0.01}}}},
           {"contacts",
            {{{"link", "palm"}, {"point", {0, 0, 1}}},
             {{"link", "middle"}, {"point", {0, 1, 0}}},
             {{"link", "tip"}, {"point", {1, 0, 0}}}}}};
    if (exempt_palm_tip)
        j["exempt_pairs"] = json::array({json::array({"palm", "tip"})});
    return HandModel::from_json(j);
}

HandPose at(const HandModel& hand, const Vec3& t)
{
    HandPose p;
    p.translation = t;
    p.joints = Eigen::VectorXd::Zero(hand.num_joints());
    return p;
}

const Vec3 kFar(5.0, 5.0, 5.0);

// Brute-force PCA share: covariance by explicit sums, symmetric eigensolver.
double oracle_ratio(const std::vector<Eigen::VectorXd>& v)
{
    const Eigen::Index d = v[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& x : v)
        mean += x;
    mean /= double(v.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
    for (const auto& x : v)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index k = 0; k < d; ++k)
                C(i, k) += (x[i] - mean[i]) * (x[k] - mean[k]);
    C /= double(v.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    const double total = es.eigenvalues().sum();
    return total < 1e-12 ? 1.0 : es.eigenvalues().maxCoeff() / total;
}

BiGraspPose random_grasp(CounterRng& rng, int joints)
{
    BiGraspPose g;
    for (HandPose* p : {&g.left, &g.right}) {
        p->translation = Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.1;
        Eigen::Vector4d q = rng.unit_vector<4>();
        p->rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        p->joints = Eigen::VectorXd(joints);
        for (int k = 0; k < joints; ++k)
            p->joints[k] = rng.uniform(0.0, 1.5);
    }
    return g;
}

} // namespace

TEST_CASE("penetration depth")
{
    MeshDistance box(make_box({0.2, 0.2, 0.2}));
    HandModel probe = probe_hand({Vec3(0, 0, 1), Vec3(0, 1, 0), Vec3(1, 0, 0)}, {{Vec3::Zero(), 0.01}});
    BiGraspPose g{at(probe, kFar), at(probe, -kFar)};
    CHECK(penetration_depth(g, probe, probe, box) == 0.0);

    // Sphere centre 5 mm inside, radius 10 mm.
    g.left.translation = Vec3(0.095, 0, 0);
    CHECK(penetration_depth(g, probe, probe, box) == doctest::Approx(0.015).epsilon(1e-12));

    // Pushing further in never decreases PD.
    double prev = 0.0;
    for (int i = 0; i <= 40; ++i) {
        g.left.translation = Vec3(0.2 - 0.005 * i, 0.01, -0.02);
        double pd = penetration_depth(g, probe, probe, box);
        CHECK(pd >= prev - 1e-15);
        prev = pd;
    }
}

TEST_CASE("self penetration depth")
{
    HandModel right = HandModel::default_hand();
    HandModel left = right.mirrored();
    BiGraspPose apart{at(left, Vec3(-0.5, 0, 0.5)), at(right, Vec3(0.5, 0, 0.5))};
    apart.left.joints = left.open_posture();
    apart.right.joints = right.open_posture();
    CHECK(self_penetration_depth(apart, left, right) == 0.0);

    // Coincident spheres of radius 10 mm overlap by 20 mm.
    HandModel probe = probe_hand({Vec3(0, 0, 1), Vec3(0, 1, 0), Vec3(1, 0, 0)}, {{Vec3::Zero(), 0.01}});
    BiGraspPose same{at(probe, Vec3(0.3, 0.2, 0.1)), at(probe, Vec3(0.3, 0.2, 0.1))};
    CHECK(self_penetration_depth(same, probe, probe) == doctest::Approx(0.02).epsilon(1e-12));

    // Overlaps between exempt links (neighbors, or listed pairs) are ignored.
    HandModel ex = chain_hand(true);
    HandModel strict = chain_hand(false);
    BiGraspPose h{at(ex, Vec3::Zero()), at(ex, kFar)};
    CHECK(self_penetration_depth(h, ex, ex) == 0.0);
    CHECK(self_penetration_depth(h, strict, strict) == doctest::Approx(0.015).epsilon(1e-12));
}

TEST_CASE("contact distance consistency")
{
    CHECK(contact_distance_consistency(std::vector<double>{0.001, 0.003, 0.002}) == 0.002);
    CHECK(contact_distance_consistency(std::vector<double>{0.001, 0.003, 0.002, 0.003}) == 0.002);
    CHECK(contact_distance_consistency(std::vector<double>{-0.004}) == 0.0);

    // Fingertips exactly on the faces of a box.
    MeshDistance box(make_box({0.2, 0.2, 0.2}));
    HandModel probe = probe_hand({Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1)}, {{Vec3(0, 0, 1), 0.01}});
    BiGraspPose g{at(probe, Vec3::Zero()), at(probe, Vec3::Zero())};
    CHECK(contact_distance_consistency(g, probe, probe, box) == doctest::Approx(0.0).epsilon(1e-15));

    // Only designated fingertips count; signed distances are negative inside.
    HandModel mixed =
        probe_hand({Vec3(0.1, 0, 0), Vec3(0, 0.103, 0), Vec3(0, 0, 0.099)}, {{Vec3(0, 0, 1), 0.01}}, {true, false, true});
    BiGraspPose m{at(mixed, Vec3::Zero()), at(mixed, Vec3::Zero())};
    CHECK(contact_distance_consistency(m, mixed, mixed, box) == doctest::Approx(0.001).epsilon(1e-9));
}

TEST_CASE("first variance ratio")
{
    CHECK_THROWS(first_variance_ratio(std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(3)}));

    std::vector<Eigen::VectorXd> line;
    for (int i = 0; i < 10; ++i)
        line.push_back(Eigen::Vector3d(1, 2, 3) * i + Eigen::Vector3d(4, 5, 6));
    CHECK(first_variance_ratio(line) == doctest::Approx(1.0).epsilon(1e-12));

    // Square corners: equal variance along two axes.
    std::vector<Eigen::VectorXd> square;
    for (double a : {-1.0, 1.0})
        for (double b : {-1.0, 1.0})
            square.push_back(Eigen::Vector4d(a, 0, b, 7));
    CHECK(first_variance_ratio(square) == doctest::Approx(0.5).epsilon(1e-12));

    // Identical grasps: degenerate variance.
    HandModel right = HandModel::default_hand();
    CounterRng rng(11);
    BiGraspPose g = random_grasp(rng, right.num_joints());
    CHECK(first_variance_ratio(std::vector<BiGraspPose>{g, g, g}) == 1.0);

    for (int set = 0; set < 50; ++set) {
        std::vector<BiGraspPose> grasps;
        const int n = 2 + static_cast<int>(rng.below(30));
        for (int i = 0; i < n; ++i)
            grasps.push_back(random_grasp(rng, right.num_joints()));
        std::vector<Eigen::VectorXd> vecs;
        for (const auto& x : grasps)
            vecs.push_back(grasp_vector(x));
        const double got = first_variance_ratio(grasps);
        CHECK(got == doctest::Approx(oracle_ratio(vecs)).epsilon(1e-9));
        CHECK(got > 0.0);
        CHECK(got <= 1.0 + 1e-12);

        // Translating every grasp by the same offset leaves D unchanged.
        const Vec3 shift(rng.normal(), rng.normal(), rng.normal());
        for (auto& x : grasps) {
            x.left.translation += shift;
            x.right.translation += shift;
        }
        CHECK(first_variance_ratio(grasps) == doctest::Approx(got).epsilon(1e-9));
    }
}

TEST_CASE("grasp vector layout")
{
    HandModel right = HandModel::default_hand();
    CounterRng rng(2);
    BiGraspPose g = random_grasp(rng, right.num_joints());
    Eigen::VectorXd v = grasp_vector(g);
    const int per_hand = 3 + 9 + right.num_joints();
    REQUIRE(v.size() == 2 * per_hand);
    CHECK(v.head<3>().isApprox(g.left.translation));
    const Mat3 R = g.right.rotation.toRotationMatrix();
    CHECK(v[per_hand + 3] == doctest::Approx(R(0, 0)));
    CHECK(v[per_hand + 4] == doctest::Approx(R(0, 1)));
    CHECK(v[2 * per_hand - 1] == g.right.joints[right.num_joints() - 1]);
}

TEST_CASE("analytic success")
{
    MeshDistance box(make_box({0.2, 0.2, 0.2}));
    SuccessCriteria crit;
    crit.beta = 0.1;
    crit.gamma = 0.02;

    // Contacts on all six face centres, spheres well clear of the box.
    std::vector<Vec3> faces = {Vec3(0.1, 0, 0), Vec3(-0.1, 0, 0), Vec3(0, 0.1, 0),
                               Vec3(0, -0.1, 0), Vec3(0, 0, 0.1),  Vec3(0, 0, -0.1)};
    HandModel six = probe_hand(faces, {{Vec3(0, 0, 0.5), 0.01}});
    HandModel idle = probe_hand({Vec3(0, 0, 1), Vec3(0, 1, 0), Vec3(1, 0, 0)}, {{Vec3::Zero(), 0.01}});
    BiGraspPose closure{at(six, Vec3::Zero()), at(idle, kFar)};
    SuccessResult ok = analytic_success(closure, six, idle, box, Vec3::Zero(), crit);
    CHECK(ok.active_contacts == 6);
    CHECK(ok.pass);
    CHECK(ok.q <= 1e-6 * crit.beta * crit.beta);
    // Every scaled disturbance lies inside the wrench space along its own axis.
    ContactState cs(crit.mu);
    for (const Vec3& p : faces)
        cs.add(p, -p.normalized());
    for (const Wrench& t : disturbance_directions())
        CHECK(support_function(cs, t) >= crit.beta);

    // Single antipodal pair: torque about the contact axis is unresistable.
    HandModel pair = probe_hand({Vec3(0.1, 0, 0), Vec3(-0.1, 0, 0), Vec3(0, 0, 1)}, {{Vec3(0, 0, 0.5), 0.01}});
    BiGraspPose two{at(pair, Vec3::Zero()), at(idle, kFar)};
    SuccessResult bad = analytic_success(two, pair, idle, box, Vec3::Zero(), crit);
    CHECK(bad.active_contacts == 2);
    CHECK_FALSE(bad.pass);
    CHECK(bad.q >= 2.0 * crit.beta * crit.beta * (1.0 - 1e-3));

    // PD of 1 cm fails regardless of Q.
    HandModel deep = probe_hand(faces, {{Vec3(0.1, 0, 0), 0.01}});
    BiGraspPose pen{at(deep, Vec3::Zero()), at(idle, kFar)};
    SuccessResult gated = analytic_success(pen, deep, idle, box, Vec3::Zero(), crit);
    CHECK(gated.pd == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(gated.q <= crit.epsilon * crit.beta * crit.beta);
    CHECK_FALSE(gated.pass);

    // Monotone in epsilon.
    SuccessCriteria loose = crit;
    for (double eps : {0.0, 1e-4, 0.01, 0.05, 0.5, 5.0, 50.0}) {
        loose.epsilon = eps;
        const bool at_eps = analytic_success(two, pair, idle, box, Vec3::Zero(), loose).pass;
        loose.epsilon = eps * 2.0 + 1e-9;
        const bool above = analytic_success(two, pair, idle, box, Vec3::Zero(), loose).pass;
        CHECK((!at_eps || above));
    }
}
