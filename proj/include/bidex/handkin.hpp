#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "bidex/geometry.hpp"

namespace bidex {

class MeshDistance;

class HandModelError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class Chirality
{
    Left,
    Right
};

struct Joint
{
    std::string name;
    int parent = -1; // link index
    int child = -1;  // link index
    Vec3 axis = Vec3::UnitX(); // unit, expressed in the joint frame
    Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
    double lower = 0.0;
    double upper = 0.0;
};

struct CollisionSphere
{
    int link = 0;
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

struct HandContact
{
    std::string name;
    int link = 0;
    Vec3 point = Vec3::Zero();
    bool fingertip = false;
};

/// Floating-base articulated hand. The root link frame is the wrist/palm frame:
/// +z leaves the palm toward the grasped object, +y runs along the fingers.
class HandModel
{
public:
    static HandModel from_json(const nlohmann::json& j);
    static HandModel load(const std::filesystem::path& path);
    /// Built-in right hand: 3 fingers x 2 flexion joints, pad contacts on
    /// each phalanx (6 contacts, 3 fingertips).
    static HandModel default_hand();
    static const nlohmann::json& default_hand_json();

    nlohmann::json to_json() const;

    /// Reflection through the palm x = 0 plane; flips chirality.
    HandModel mirrored() const;

    const std::vector<std::string>& links() const { return links_; }
    const std::vector<Joint>& joints() const { return joints_; }
    const std::vector<CollisionSphere>& spheres() const { return spheres_; }
    const std::vector<HandContact>& contacts() const { return contacts_; }
    Chirality chirality() const { return chirality_; }

    int num_joints() const { return static_cast<int>(joints_.size()); }
    int num_params() const { return 6 + num_joints(); }
    int link_index(const std::string& name) const;

    /// Joints on the path from the root to `link`, root first.
    const std::vector<int>& ancestor_joints(int link) const { return ancestors_[link]; }
    /// Joints ordered so every parent transform is available before its child.
    const std::vector<int>& joint_order() const { return order_; }
    bool exempt(int link_a, int link_b) const;

    Eigen::VectorXd lower_limits() const;
    Eigen::VectorXd upper_limits() const;
    /// Open posture: zero clamped into the joint limits.
    Eigen::VectorXd open_posture() const;

private:
    void finalize();

    std::vector<std::string> links_;
    std::vector<Joint> joints_;
    std::vector<CollisionSphere> spheres_;
    std::vector<HandContact> contacts_;
    std::vector<std::pair<int, int>> exempt_pairs_;
    Chirality chirality_ = Chirality::Right;

    std::vector<int> parent_joint_; // per link, -1 for the root
    std::vector<std::vector<int>> ancestors_;
    std::vector<int> order_;
};

struct HandPose
{
    Vec3 translation = Vec3::Zero();
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::VectorXd joints;

    Eigen::Isometry3d wrist() const;
    /// Rotation normalized, joints clamped into limits.
    void project(const HandModel& hand);
    bool valid(const HandModel& hand, double tol = 1e-9) const;
};

struct BiGraspPose
{
    HandPose left;
    HandPose right;
};

struct HandKinematics
{
    std::vector<Eigen::Isometry3d> links;
    std::vector<Vec3> contacts;
    std::vector<Vec3> sphere_centers;
    std::vector<Vec3> joint_axes;    // world frame
    std::vector<Vec3> joint_origins; // world frame
};

HandKinematics forward_kinematics(const HandModel& hand, const HandPose& pose);

/// d(world point)/d[t, local rotation increment, q] for a point rigidly
/// attached to `link`, evaluated at the given kinematics.
Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(const HandModel& hand, const HandPose& pose,
                                                        const HandKinematics& kin, int link,
                                                        const Vec3& world_point);

Eigen::Matrix<double, 3, Eigen::Dynamic> contact_jacobian(const HandModel& hand, const HandPose& pose,
                                                          int contact);

/// Applies a parameter step [dt, local axis-angle, dq] and projects.
HandPose apply_step(const HandModel& hand, const HandPose& pose, const Eigen::VectorXd& step);

enum class CollisionKind
{
    IntraHand,
    InterHand,
    Object,
    Table
};

const char* to_string(CollisionKind kind);

struct CollisionEntry
{
    CollisionKind kind = CollisionKind::IntraHand;
    int hand_a = 0; // 0 left, 1 right
    int sphere_a = 0;
    int hand_b = -1;
    int sphere_b = -1;
    double depth = 0.0;
};

struct CollisionReport
{
    std::vector<CollisionEntry> entries;

    bool empty() const { return entries.empty(); }
    double max_depth() const;
    double max_depth(CollisionKind kind) const;
    std::size_t count(CollisionKind kind) const;
};

inline constexpr double kNoTable = -std::numeric_limits<double>::infinity();

/// Sphere-based collision query. `object` may be null; a table at
/// kNoTable disables the table test. `margin` inflates every pairwise
/// clearance requirement; reported depths include it.
CollisionReport collision_check(const HandModel& hand_left, const HandPose& pose_left, const HandModel& hand_right,
                                const HandPose& pose_right, const MeshDistance* object, double table_height);

CollisionReport collision_check(const HandModel& hand_left, const HandKinematics& kin_left,
                                const HandModel& hand_right, const HandKinematics& kin_right,
                                const MeshDistance* object, double table_height, double margin = 0.0);

// JSON helpers shared by the record format.
nlohmann::ordered_json pose_to_json(const HandPose& pose);
HandPose pose_from_json(const nlohmann::json& j);

} // namespace bidex
