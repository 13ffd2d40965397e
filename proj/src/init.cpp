#include "bidex/init.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bidex/rng.hpp"

namespace bidex {

namespace {

// Joints grouped per finger: each joint attached to the root starts a group
// that collects every joint below it.
std::vector<std::vector<int>> finger_groups(const HandModel& hand)
{
    std::vector<std::vector<int>> groups;
    for (int k : hand.joint_order()) {
        const auto& anc = hand.ancestor_joints(hand.joints()[k].child);
        if (anc.size() == 1) {
            groups.push_back({k});
            continue;
        }
        for (auto& g : groups)
            if (g.front() == anc.front())
                g.push_back(k);
    }
    return groups;
}

// Curvature of a convex patch from the mean height below the tangent plane:
// on a sphere of radius r, h = d^2 / (2r).
double region_curvature(const Region& region, const SurfaceSamples& samples)
{
    if (region.members.size() < 2)
        return 0.0;
    const Vec3& pa = samples.points[region.anchor];
    const Vec3& na = samples.normals[region.anchor];
    double h = 0.0, d2 = 0.0;
    for (auto m : region.members) {
        h += (samples.points[m] - pa).dot(na);
        d2 += (samples.points[m] - pa).squaredNorm();
    }
    return d2 > 0 ? std::max(0.0, -2.0 * h / d2) : 0.0;
}

void close_fingers(const HandModel& hand, HandPose& pose, const Region& region, const ObjectContext& ctx,
                   const InitParams& params)
{
    const double kappa = region_curvature(region, *ctx.samples);
    const double amount = params.preclose * std::clamp(kappa * params.finger_length, 0.25, 1.0);

    for (const auto& group : finger_groups(hand)) {
        std::vector<int> links;
        for (int k : group)
            links.push_back(hand.joints()[k].child);
        auto on_finger = [&](int link) { return std::find(links.begin(), links.end(), link) != links.end(); };

        const Eigen::VectorXd start = pose.joints;
        for (int s = 1; s <= params.close_steps; ++s) {
            HandPose trial = pose;
            const double frac = amount * s / params.close_steps;
            for (int k : group) {
                const Joint& j = hand.joints()[k];
                trial.joints[k] = std::min(j.upper, start[k] + frac * (j.upper - j.lower));
            }
            const HandKinematics kin = forward_kinematics(hand, trial);
            bool penetrates = false;
            for (std::size_t i = 0; i < hand.spheres().size() && !penetrates; ++i)
                if (on_finger(hand.spheres()[i].link))
                    penetrates = ctx.object->signed_distance(kin.sphere_centers[i]) < hand.spheres()[i].radius;
            if (penetrates)
                break;
            pose = trial;
            bool near = false;
            for (std::size_t c = 0; c < hand.contacts().size(); ++c)
                if (on_finger(hand.contacts()[c].link))
                    near = near || ctx.object->signed_distance(kin.contacts[c]) <= params.proximity;
            if (near)
                break;
        }
    }
}

} // namespace

HandPose place_hand(const Region& region, const HandModel& hand, const MeshDistance& hull, double jitter_angle)
{
    const ClosestPoint cp = hull.closest(region.mean_position);
    const Vec3 normal = hull.smooth_normal(cp);
    if (normal.dot(region.mean_normal) <= 0.0)
        throw InitError("region centroid is inside the hull with its normal facing away from the hull surface");

    const Vec3 z = -normal;
    // Ideal direction: lateral (x) axis toward world +z for the left hand and
    // -z for the right, projected into the palm plane.
    Vec3 ideal = hand.chirality() == Chirality::Left ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ());
    Vec3 x = ideal - z * z.dot(ideal);
    if (x.norm() < 1e-6) {
        ideal = hand.chirality() == Chirality::Left ? Vec3::UnitX() : Vec3(-Vec3::UnitX());
        x = ideal - z * z.dot(ideal);
    }
    x.normalize();
    x = Eigen::AngleAxisd(jitter_angle, z) * x;
    Mat3 R;
    R.col(0) = x;
    R.col(1) = z.cross(x);
    R.col(2) = z;

    HandPose pose;
    pose.translation = cp.point;
    pose.rotation = Eigen::Quaterniond(R);
    pose.joints = hand.open_posture();
    return pose;
}

BiGraspPose initialize_bigrasp(const RegionPair& pair, const HandModel& left, const HandModel& right,
                               const ObjectContext& ctx, const InitParams& params, std::uint64_t seed)
{
    if (!ctx.samples || !ctx.object || !ctx.hull)
        throw std::invalid_argument("initialize_bigrasp: incomplete object context");
    if (left.chirality() == right.chirality())
        throw std::invalid_argument("initialize_bigrasp: hands must have opposite chirality");

    CounterRng rng(seed);
    const double jl = rng.uniform(-params.jitter, params.jitter);
    const double jr = rng.uniform(-params.jitter, params.jitter);
    BiGraspPose g;
    g.left = place_hand(pair.a, left, *ctx.hull, jl);
    g.right = place_hand(pair.b, right, *ctx.hull, jr);
    close_fingers(left, g.left, pair.a, ctx, params);
    close_fingers(right, g.right, pair.b, ctx, params);
    return g;
}

std::string FeasibilityReport::summary() const
{
    if (pass)
        return "pass";
    std::ostringstream os;
    const char* sep = "";
    for (const auto& v : violations) {
        os << sep << to_string(v.kind) << " (hand " << v.hand_a << " sphere " << v.sphere_a;
        if (v.hand_b >= 0)
            os << " / hand " << v.hand_b << " sphere " << v.sphere_b;
        os << ", depth " << v.depth << ")";
        sep = "; ";
    }
    for (int h = 0; h < 2; ++h)
        if (!reachable[h]) {
            os << sep << "workspace (hand " << h << ")";
            sep = "; ";
        }
    if (!joints_ok)
        os << sep << "joint limits";
    return os.str();
}

FeasibilityReport verify_feasibility(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                     const MeshDistance* object, double table_height,
                                     const std::array<WorkspaceSphere, 2>& workspace, double tolerance)
{
    FeasibilityReport rep;
    rep.joints_ok = grasp.left.valid(left) && grasp.right.valid(right);
    if (!rep.joints_ok) {
        rep.pass = false;
        return rep;
    }
    CollisionReport col = collision_check(left, grasp.left, right, grasp.right, object, table_height);
    for (const auto& e : col.entries)
        if (e.depth > tolerance)
            rep.violations.push_back(e);
    rep.reachable = {workspace[0].contains(grasp.left.translation), workspace[1].contains(grasp.right.translation)};
    rep.pass = rep.violations.empty() && rep.reachable[0] && rep.reachable[1];
    return rep;
}

} // namespace bidex
