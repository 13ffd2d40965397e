#include "bidex/handkin.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "bidex/mesh_distance.hpp"

namespace bidex {

namespace {

Vec3 read_vec3(const nlohmann::json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3)
        throw HandModelError(std::string("expected 3-vector for ") + what);
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Eigen::Matrix3d rpy_to_matrix(const Vec3& rpy)
{
    return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
        .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Eigen::Matrix3d& R)
{
    double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    double roll = std::atan2(R(2, 1), R(2, 2));
    double yaw = std::atan2(R(1, 0), R(0, 0));
    if (std::abs(std::cos(pitch)) < 1e-9) {
        roll = 0.0;
        yaw = std::atan2(-R(0, 1), R(1, 1));
    }
    return {roll, pitch, yaw};
}

nlohmann::json to_array(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

const Eigen::Matrix3d kMirror = Eigen::Vector3d(-1, 1, 1).asDiagonal();

} // namespace

// ---------------------------------------------------------------------------
// HandModel

int HandModel::link_index(const std::string& name) const
{
    auto it = std::find(links_.begin(), links_.end(), name);
    if (it == links_.end())
        throw HandModelError("unknown link '" + name + "'");
    return static_cast<int>(it - links_.begin());
}

HandModel HandModel::from_json(const nlohmann::json& j)
{
    HandModel h;
    try {
        for (const auto& l : j.at("links"))
            h.links_.push_back(l.is_string() ? l.get<std::string>() : l.at("name").get<std::string>());
        if (h.links_.empty())
            throw HandModelError("hand has no links");
        if (std::set<std::string>(h.links_.begin(), h.links_.end()).size() != h.links_.size())
            throw HandModelError("duplicate link names");

        for (const auto& jj : j.value("joints", nlohmann::json::array())) {
            Joint joint;
            joint.name = jj.value("name", "joint" + std::to_string(h.joints_.size()));
            joint.parent = h.link_index(jj.at("parent").get<std::string>());
            joint.child = h.link_index(jj.at("child").get<std::string>());
            joint.axis = read_vec3(jj.at("axis"), "joint axis");
            if (joint.axis.norm() < 1e-12)
                throw HandModelError("joint '" + joint.name + "' has a zero axis");
            joint.axis.normalize();
            Vec3 xyz = Vec3::Zero();
            Vec3 rpy = Vec3::Zero();
            if (jj.contains("origin")) {
                const auto& o = jj["origin"];
                if (o.contains("xyz"))
                    xyz = read_vec3(o["xyz"], "origin xyz");
                if (o.contains("rpy"))
                    rpy = read_vec3(o["rpy"], "origin rpy");
            }
            joint.origin = Eigen::Isometry3d::Identity();
            joint.origin.linear() = rpy_to_matrix(rpy);
            joint.origin.translation() = xyz;
            if (!jj.contains("limit") || !jj["limit"].contains("lower") || !jj["limit"].contains("upper"))
                throw HandModelError("joint '" + joint.name + "' is missing limits");
            joint.lower = jj["limit"]["lower"].get<double>();
            joint.upper = jj["limit"]["upper"].get<double>();
            if (!(joint.lower < joint.upper))
                throw HandModelError("joint '" + joint.name + "' has lower >= upper");
            h.joints_.push_back(joint);
        }

        for (const auto& s : j.value("collision_spheres", nlohmann::json::array())) {
            CollisionSphere cs;
            cs.link = h.link_index(s.at("link").get<std::string>());
            cs.center = read_vec3(s.at("center"), "sphere center");
            cs.radius = s.at("radius").get<double>();
            if (!(cs.radius > 0))
                throw HandModelError("collision sphere radius must be positive");
            h.spheres_.push_back(cs);
        }

        for (const auto& c : j.value("contacts", nlohmann::json::array())) {
            HandContact hc;
            hc.link = h.link_index(c.at("link").get<std::string>());
            hc.point = read_vec3(c.at("point"), "contact point");
            hc.fingertip = c.value("fingertip", false);
            hc.name = c.value("name", "contact" + std::to_string(h.contacts_.size()));
            h.contacts_.push_back(hc);
        }
        if (h.contacts_.empty())
            throw HandModelError("hand has zero contact points");
        if (h.contacts_.size() < 3)
            throw HandModelError("hand needs at least 3 contact points");

        for (const auto& p : j.value("exempt_pairs", nlohmann::json::array()))
            h.exempt_pairs_.emplace_back(h.link_index(p.at(0).get<std::string>()),
                                         h.link_index(p.at(1).get<std::string>()));

        std::string chir = j.value("chirality", "right");
        if (chir == "left")
            h.chirality_ = Chirality::Left;
        else if (chir == "right")
            h.chirality_ = Chirality::Right;
        else
            throw HandModelError("chirality must be 'left' or 'right'");
    } catch (const nlohmann::json::exception& e) {
        throw HandModelError(std::string("malformed hand description: ") + e.what());
    }
    h.finalize();
    return h;
}

void HandModel::finalize()
{
    const int nl = static_cast<int>(links_.size());
    parent_joint_.assign(nl, -1);
    for (int k = 0; k < num_joints(); ++k) {
        int child = joints_[k].child;
        if (parent_joint_[child] >= 0)
            throw HandModelError("link '" + links_[child] + "' has more than one parent joint");
        parent_joint_[child] = k;
    }
    int roots = 0;
    for (int l = 0; l < nl; ++l)
        roots += parent_joint_[l] < 0;
    if (roots != 1)
        throw HandModelError("kinematic tree must have exactly one root (cycle or forest)");

    // Topological order by walking from the root; anything unreached is on a cycle.
    order_.clear();
    ancestors_.assign(nl, {});
    std::vector<char> reached(nl, 0);
    std::vector<int> stack;
    for (int l = 0; l < nl; ++l)
        if (parent_joint_[l] < 0) {
            reached[l] = 1;
            stack.push_back(l);
        }
    while (!stack.empty()) {
        int l = stack.back();
        stack.pop_back();
        for (int k = 0; k < num_joints(); ++k) {
            if (joints_[k].parent != l)
                continue;
            int c = joints_[k].child;
            if (reached[c])
                throw HandModelError("kinematic graph has a cycle");
            reached[c] = 1;
            ancestors_[c] = ancestors_[l];
            ancestors_[c].push_back(k);
            order_.push_back(k);
            stack.push_back(c);
        }
    }
    if (std::find(reached.begin(), reached.end(), 0) != reached.end())
        throw HandModelError("kinematic graph has a cycle");

    for (const auto& j : joints_)
        exempt_pairs_.emplace_back(j.parent, j.child);
    for (auto& p : exempt_pairs_)
        if (p.first > p.second)
            std::swap(p.first, p.second);
    std::sort(exempt_pairs_.begin(), exempt_pairs_.end());
    exempt_pairs_.erase(std::unique(exempt_pairs_.begin(), exempt_pairs_.end()), exempt_pairs_.end());
}

bool HandModel::exempt(int a, int b) const
{
    if (a == b)
        return true;
    if (a > b)
        std::swap(a, b);
    return std::binary_search(exempt_pairs_.begin(), exempt_pairs_.end(), std::make_pair(a, b));
}

HandModel HandModel::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw HandModelError("cannot read hand file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw HandModelError("hand file is not valid JSON: " + std::string(e.what()));
    }
    return from_json(j);
}

nlohmann::json HandModel::to_json() const
{
    nlohmann::json j;
    j["links"] = links_;
    j["joints"] = nlohmann::json::array();
    for (const auto& jt : joints_) {
        j["joints"].push_back({{"name", jt.name},
                               {"parent", links_[jt.parent]},
                               {"child", links_[jt.child]},
                               {"axis", to_array(jt.axis)},
                               {"origin",
                                {{"xyz", to_array(jt.origin.translation())},
                                 {"rpy", to_array(matrix_to_rpy(jt.origin.linear()))}}},
                               {"limit", {{"lower", jt.lower}, {"upper", jt.upper}}}});
    }
    j["collision_spheres"] = nlohmann::json::array();
    for (const auto& s : spheres_)
        j["collision_spheres"].push_back({{"link", links_[s.link]}, {"center", to_array(s.center)}, {"radius", s.radius}});
    j["contacts"] = nlohmann::json::array();
    for (const auto& c : contacts_)
        j["contacts"].push_back(
            {{"name", c.name}, {"link", links_[c.link]}, {"point", to_array(c.point)}, {"fingertip", c.fingertip}});
    j["exempt_pairs"] = nlohmann::json::array();
    for (const auto& [a, b] : exempt_pairs_)
        j["exempt_pairs"].push_back({links_[a], links_[b]});
    j["chirality"] = chirality_ == Chirality::Left ? "left" : "right";
    return j;
}

HandModel HandModel::mirrored() const
{
    HandModel m = *this;
    for (auto& j : m.joints_) {
        j.origin.translation() = kMirror * j.origin.translation();
        j.origin.linear() = kMirror * j.origin.linear() * kMirror;
        j.axis = -(kMirror * j.axis);
    }
    for (auto& s : m.spheres_)
        s.center = kMirror * s.center;
    for (auto& c : m.contacts_)
        c.point = kMirror * c.point;
    m.chirality_ = chirality_ == Chirality::Left ? Chirality::Right : Chirality::Left;
    return m;
}

Eigen::VectorXd HandModel::lower_limits() const
{
    Eigen::VectorXd v(num_joints());
    for (int k = 0; k < num_joints(); ++k)
        v[k] = joints_[k].lower;
    return v;
}

Eigen::VectorXd HandModel::upper_limits() const
{
    Eigen::VectorXd v(num_joints());
    for (int k = 0; k < num_joints(); ++k)
        v[k] = joints_[k].upper;
    return v;
}

Eigen::VectorXd HandModel::open_posture() const
{
    return Eigen::VectorXd::Zero(num_joints()).cwiseMax(lower_limits()).cwiseMin(upper_limits());
}

const nlohmann::json& HandModel::default_hand_json()
{
    // Palm spans roughly 8 x 8 cm; fingers curl toward +z about their local x axis.
    // The thumb frame is turned half a revolution about z so it opposes the fingers.
    static const nlohmann::json j = [] {
        nlohmann::json h;
        h["chirality"] = "right";
        h["links"] = {"palm", "index_proximal", "index_distal", "middle_proximal", "middle_distal",
                      "thumb_proximal", "thumb_distal"};
        auto joint = [](const char* name, const char* parent, const char* child, std::vector<double> xyz,
                        std::vector<double> rpy, double lo, double hi) {
            return nlohmann::json{{"name", name},
                                  {"parent", parent},
                                  {"child", child},
                                  {"axis", {1.0, 0.0, 0.0}},
                                  {"origin", {{"xyz", xyz}, {"rpy", rpy}}},
                                  {"limit", {{"lower", lo}, {"upper", hi}}}};
        };
        h["joints"] = {
            joint("index_mcp", "palm", "index_proximal", {0.025, 0.045, 0.0}, {0, 0, 0}, -0.2, 1.6),
            joint("index_pip", "index_proximal", "index_distal", {0.0, 0.05, 0.0}, {0, 0, 0}, -0.1, 1.6),
            joint("middle_mcp", "palm", "middle_proximal", {-0.025, 0.045, 0.0}, {0, 0, 0}, -0.2, 1.6),
            joint("middle_pip", "middle_proximal", "middle_distal", {0.0, 0.05, 0.0}, {0, 0, 0}, -0.1, 1.6),
            joint("thumb_mcp", "palm", "thumb_proximal", {0.01, -0.045, 0.0}, {0, 0, M_PI}, -0.2, 1.6),
            joint("thumb_ip", "thumb_proximal", "thumb_distal", {0.0, 0.045, 0.0}, {0, 0, 0}, -0.1, 1.6),
        };
        nlohmann::json spheres = nlohmann::json::array();
        for (double x : {-0.025, 0.0, 0.025})
            for (double y : {-0.025, 0.0, 0.025})
                spheres.push_back({{"link", "palm"}, {"center", {x, y, -0.015}}, {"radius", 0.015}});
        for (const char* f : {"index", "middle"}) {
            for (double y : {0.01, 0.028, 0.046})
                spheres.push_back({{"link", std::string(f) + "_proximal"}, {"center", {0.0, y, 0.0}}, {"radius", 0.01}});
            for (double y : {0.012, 0.03, 0.045})
                spheres.push_back({{"link", std::string(f) + "_distal"}, {"center", {0.0, y, 0.0}}, {"radius", 0.01}});
        }
        for (double y : {0.01, 0.028, 0.042})
            spheres.push_back({{"link", "thumb_proximal"}, {"center", {0.0, y, 0.0}}, {"radius", 0.01}});
        for (double y : {0.012, 0.03, 0.045})
            spheres.push_back({{"link", "thumb_distal"}, {"center", {0.0, y, 0.0}}, {"radius", 0.01}});
        h["collision_spheres"] = spheres;
        // Pads sit 2 mm proud of the phalanx spheres; fingertip pads under the tip sphere.
        h["contacts"] = {
            {{"name", "index_mid"}, {"link", "index_proximal"}, {"point", {0.0, 0.028, 0.012}}, {"fingertip", false}},
            {{"name", "index_tip"}, {"link", "index_distal"}, {"point", {0.0, 0.045, 0.012}}, {"fingertip", true}},
            {{"name", "middle_mid"}, {"link", "middle_proximal"}, {"point", {0.0, 0.028, 0.012}}, {"fingertip", false}},
            {{"name", "middle_tip"}, {"link", "middle_distal"}, {"point", {0.0, 0.045, 0.012}}, {"fingertip", true}},
            {{"name", "thumb_mid"}, {"link", "thumb_proximal"}, {"point", {0.0, 0.028, 0.012}}, {"fingertip", false}},
            {{"name", "thumb_tip"}, {"link", "thumb_distal"}, {"point", {0.0, 0.045, 0.012}}, {"fingertip", true}},
        };
        return h;
    }();
    return j;
}

HandModel HandModel::default_hand() { return from_json(default_hand_json()); }

// ---------------------------------------------------------------------------
// Poses and kinematics

Eigen::Isometry3d HandPose::wrist() const
{
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = rotation.normalized().toRotationMatrix();
    T.translation() = translation;
    return T;
}

void HandPose::project(const HandModel& hand)
{
    rotation.normalize();
    if (joints.size() != hand.num_joints())
        joints = hand.open_posture();
    joints = joints.cwiseMax(hand.lower_limits()).cwiseMin(hand.upper_limits());
}

bool HandPose::valid(const HandModel& hand, double tol) const
{
    if (joints.size() != hand.num_joints() || !translation.allFinite() || !joints.allFinite())
        return false;
    if (std::abs(rotation.norm() - 1.0) > tol)
        return false;
    for (int k = 0; k < hand.num_joints(); ++k)
        if (joints[k] < hand.joints()[k].lower - tol || joints[k] > hand.joints()[k].upper + tol)
            return false;
    return true;
}

HandKinematics forward_kinematics(const HandModel& hand, const HandPose& pose)
{
    HandKinematics kin;
    const int nl = static_cast<int>(hand.links().size());
    kin.links.assign(nl, Eigen::Isometry3d::Identity());
    kin.joint_axes.assign(hand.num_joints(), Vec3::Zero());
    kin.joint_origins.assign(hand.num_joints(), Vec3::Zero());

    const Eigen::Isometry3d wrist = pose.wrist();
    for (int l = 0; l < nl; ++l)
        if (hand.ancestor_joints(l).empty())
            kin.links[l] = wrist;
    for (int k : hand.joint_order()) {
        const Joint& j = hand.joints()[k];
        Eigen::Isometry3d frame = kin.links[j.parent] * j.origin;
        kin.joint_axes[k] = frame.linear() * j.axis;
        kin.joint_origins[k] = frame.translation();
        kin.links[j.child] = frame * Eigen::AngleAxisd(pose.joints[k], j.axis);
    }
    kin.contacts.reserve(hand.contacts().size());
    for (const auto& c : hand.contacts())
        kin.contacts.push_back(kin.links[c.link] * c.point);
    kin.sphere_centers.reserve(hand.spheres().size());
    for (const auto& s : hand.spheres())
        kin.sphere_centers.push_back(kin.links[s.link] * s.center);
    return kin;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(const HandModel& hand, const HandPose& pose,
                                                        const HandKinematics& kin, int link,
                                                        const Vec3& world_point)
{
    Eigen::Matrix<double, 3, Eigen::Dynamic> J = Eigen::MatrixXd::Zero(3, hand.num_params());
    J.block<3, 3>(0, 0).setIdentity();
    const Eigen::Matrix3d R = pose.rotation.normalized().toRotationMatrix();
    const Vec3 arm = world_point - pose.translation;
    for (int a = 0; a < 3; ++a)
        J.col(3 + a) = R.col(a).cross(arm);
    for (int k : hand.ancestor_joints(link))
        J.col(6 + k) = kin.joint_axes[k].cross(world_point - kin.joint_origins[k]);
    return J;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> contact_jacobian(const HandModel& hand, const HandPose& pose, int contact)
{
    HandKinematics kin = forward_kinematics(hand, pose);
    return point_jacobian(hand, pose, kin, hand.contacts()[contact].link, kin.contacts[contact]);
}

HandPose apply_step(const HandModel& hand, const HandPose& pose, const Eigen::VectorXd& step)
{
    HandPose out = pose;
    out.translation += step.head<3>();
    Vec3 w = step.segment<3>(3);
    double angle = w.norm();
    if (angle > 0)
        out.rotation = pose.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
    out.joints += step.tail(hand.num_joints());
    out.project(hand);
    return out;
}

// ---------------------------------------------------------------------------
// Collision

const char* to_string(CollisionKind kind)
{
    switch (kind) {
    case CollisionKind::IntraHand:
        return "intra_hand";
    case CollisionKind::InterHand:
        return "inter_hand";
    case CollisionKind::Object:
        return "object";
    case CollisionKind::Table:
        return "table";
    }
    return "unknown";
}

double CollisionReport::max_depth() const
{
    double d = 0.0;
    for (const auto& e : entries)
        d = std::max(d, e.depth);
    return d;
}

double CollisionReport::max_depth(CollisionKind kind) const
{
    double d = 0.0;
    for (const auto& e : entries)
        if (e.kind == kind)
            d = std::max(d, e.depth);
    return d;
}

std::size_t CollisionReport::count(CollisionKind kind) const
{
    return std::count_if(entries.begin(), entries.end(), [kind](const auto& e) { return e.kind == kind; });
}

CollisionReport collision_check(const HandModel& hand_left, const HandKinematics& kin_left,
                                const HandModel& hand_right, const HandKinematics& kin_right,
                                const MeshDistance* object, double table_height, double margin)
{
    CollisionReport report;
    const HandModel* hands[2] = {&hand_left, &hand_right};
    const HandKinematics* kins[2] = {&kin_left, &kin_right};

    for (int h = 0; h < 2; ++h) {
        const auto& S = hands[h]->spheres();
        const auto& C = kins[h]->sphere_centers;
        for (std::size_t a = 0; a < S.size(); ++a)
            for (std::size_t b = a + 1; b < S.size(); ++b) {
                if (hands[h]->exempt(S[a].link, S[b].link))
                    continue;
                double depth = S[a].radius + S[b].radius + margin - (C[a] - C[b]).norm();
                if (depth > 0)
                    report.entries.push_back({CollisionKind::IntraHand, h, static_cast<int>(a), h,
                                              static_cast<int>(b), depth});
            }
    }

    const auto& SL = hand_left.spheres();
    const auto& SR = hand_right.spheres();
    for (std::size_t a = 0; a < SL.size(); ++a)
        for (std::size_t b = 0; b < SR.size(); ++b) {
            double depth = SL[a].radius + SR[b].radius + margin - (kin_left.sphere_centers[a] - kin_right.sphere_centers[b]).norm();
            if (depth > 0)
                report.entries.push_back(
                    {CollisionKind::InterHand, 0, static_cast<int>(a), 1, static_cast<int>(b), depth});
        }

    for (int h = 0; h < 2; ++h) {
        const auto& S = hands[h]->spheres();
        const auto& C = kins[h]->sphere_centers;
        for (std::size_t a = 0; a < S.size(); ++a) {
            if (object) {
                double depth = S[a].radius + margin - object->signed_distance(C[a]);
                if (depth > 0)
                    report.entries.push_back({CollisionKind::Object, h, static_cast<int>(a), -1, -1, depth});
            }
            double depth = S[a].radius + margin - (C[a].z() - table_height);
            if (depth > 0)
                report.entries.push_back({CollisionKind::Table, h, static_cast<int>(a), -1, -1, depth});
        }
    }
    return report;
}

CollisionReport collision_check(const HandModel& hand_left, const HandPose& pose_left, const HandModel& hand_right,
                                const HandPose& pose_right, const MeshDistance* object, double table_height)
{
    return collision_check(hand_left, forward_kinematics(hand_left, pose_left), hand_right,
                           forward_kinematics(hand_right, pose_right), object, table_height);
}

nlohmann::ordered_json pose_to_json(const HandPose& pose)
{
    nlohmann::ordered_json j;
    j["t"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
    j["r"] = {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()};
    j["q"] = std::vector<double>(pose.joints.data(), pose.joints.data() + pose.joints.size());
    return j;
}

HandPose pose_from_json(const nlohmann::json& j)
{
    HandPose p;
    const auto& t = j.at("t");
    const auto& r = j.at("r");
    if (t.size() != 3 || r.size() != 4)
        throw std::invalid_argument("pose needs t[3] and r[4] (w, x, y, z)");
    p.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    p.rotation = Eigen::Quaterniond(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>());
    auto q = j.at("q").get<std::vector<double>>();
    p.joints = Eigen::Map<Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    return p;
}

} // namespace bidex
