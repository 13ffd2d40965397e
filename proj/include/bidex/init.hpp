#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bidex/handkin.hpp"
#include "bidex/mesh_distance.hpp"
#include "bidex/regions.hpp"

namespace bidex {

class InitError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct InitParams
{
    double jitter = 15.0 * M_PI / 180.0; // uniform in-plane rotation jitter, +-radians
    double preclose = 0.2;               // fraction of the flexion range at full curvature
    double finger_length = 0.1;          // curvature reference length, meters
    double proximity = 0.005;            // stop closing a finger at this contact distance
    int close_steps = 10;
};

/// Stand-in for arm reachability: the wrist must lie inside this sphere.
struct WorkspaceSphere
{
    Vec3 center = Vec3::Zero();
    double radius = std::numeric_limits<double>::infinity();

    bool contains(const Vec3& p) const { return (p - center).norm() <= radius; }
};

/// Object-side data shared by all candidates of one (object, scale).
struct ObjectContext
{
    const SurfaceSamples* samples = nullptr;
    const MeshDistance* object = nullptr;
    const MeshDistance* hull = nullptr; // dilated convex hull
    double table_height = kNoTable;
};

/// Wrist pose for one hand in front of a region: palm origin on the dilated
/// hull, palm +z along the negated hull normal, lateral axis from the
/// ideal-direction rule plus `jitter_angle`.
HandPose place_hand(const Region& region, const HandModel& hand, const MeshDistance& hull, double jitter_angle);

/// The left hand takes pair.a, the right hand pair.b. Fingers start open and
/// flex toward the surface by an amount that grows with region curvature,
/// stopping per finger at the first predicted contact proximity.
BiGraspPose initialize_bigrasp(const RegionPair& pair, const HandModel& left, const HandModel& right,
                               const ObjectContext& ctx, const InitParams& params, std::uint64_t seed);

struct FeasibilityReport
{
    bool pass = true;
    std::vector<CollisionEntry> violations; // entries deeper than the tolerance
    std::array<bool, 2> reachable = {true, true};
    bool joints_ok = true;

    std::string summary() const;
};

/// Collision (self, inter-hand, object, table), joint limits and workspace
/// reachability. Penetrations up to `tolerance` meters are accepted.
FeasibilityReport verify_feasibility(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                     const MeshDistance* object, double table_height,
                                     const std::array<WorkspaceSphere, 2>& workspace, double tolerance = 1e-4);

} // namespace bidex
