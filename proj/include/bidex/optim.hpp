#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bidex/handkin.hpp"
#include "bidex/mesh_distance.hpp"
#include "bidex/wrench.hpp"

namespace bidex {

struct EnergyWeights
{
    double w_q_left = 1000.0;
    double w_q_right = 1000.0;
    double w_dis = 100.0;
    double w_region = 50.0;
    double w_col = 500.0;
    double beta = 1.0;
    double gamma = 0.2;
    double a = 0.01; // region threshold; the transition ends at b = 2a
    double mu = 0.6;
    double collision_margin = 0.0; // clearance added to every sphere test inside E_col, meters
};

/// Region-distance shaping: 0 up to a, cubic Hermite blend on (a, 2a], then d - a.
double phi(double d, double a);
double phi_derivative(double d, double a);

struct PointEnergy
{
    double value = 0.0;
    std::vector<Vec3> gradient; // d value / d point, one per input point
};

/// Sum of squared distances from each point to its closest surface point
/// (closest points held fixed in the gradient).
PointEnergy e_dis(const std::vector<Vec3>& points, const MeshDistance& object);

/// Sum of phi(distance to the nearest region point).
PointEnergy e_region(const std::vector<Vec3>& points, const std::vector<Vec3>& region, double a);

/// Everything the bimanual energy needs besides the pose.
struct GraspProblem
{
    const HandModel* left = nullptr;
    const HandModel* right = nullptr;
    const MeshDistance* object = nullptr;
    Vec3 reference = Vec3::Zero(); // torque reference (object centroid)
    std::vector<Vec3> region_left;
    std::vector<Vec3> region_right;
    double table_height = kNoTable;

    int num_params() const { return left->num_params() + right->num_params(); }
};

/// Inward-normal contact state of one hand's contact points against the object.
ContactState hand_contact_state(const HandModel& hand, const HandKinematics& kin, const MeshDistance& object,
                                const Vec3& reference, double mu);

/// Sum of squared sphere penetration depths (self, inter-hand, object, table).
double collision_energy(const CollisionReport& report);

struct EnergyTerms
{
    double q_left = 0.0;
    double q_right = 0.0;
    double dis = 0.0;
    double region = 0.0;
    double col = 0.0;
    double total = 0.0;
};

struct EnergyEval
{
    EnergyTerms terms;
    Eigen::VectorXd gradient; // [left params, right params]
    QpResult qp_left;
    QpResult qp_right;
};

struct WarmStart
{
    const QpResult* left = nullptr;
    const QpResult* right = nullptr;
};

EnergyEval total_energy(const BiGraspPose& grasp, const GraspProblem& problem, const EnergyWeights& weights,
                        bool with_gradient = true, const WarmStart& warm = {}, const QpOptions& qp = {});

/// Parameter step on the stacked [left, right] vector.
BiGraspPose apply_bimanual_step(const GraspProblem& problem, const BiGraspPose& grasp, const Eigen::VectorXd& step);

struct OptimConfig
{
    int iterations = 200;
    double step_translation = 1e-3; // meters
    double step_rotation = 1e-2;    // radians
    double step_joint = 1e-2;       // radians
    std::vector<int> anneal_at = {100, 150};
    double anneal_factor = 0.5;
    int max_halvings = 8;
    double tolerance = 1e-6; // relative decrease over `window` iterations
    int window = 10;
    bool block_normalize = true; // see normalized_direction in optim.cpp
    // Penalty continuation: while the unpadded penetration exceeds
    // `polish_tolerance`, w_col is multiplied by `polish_factor` and another
    // `polish_iterations` steps run at the final annealed step size.
    int polish_rounds = 3;
    int polish_iterations = 30;
    double polish_factor = 10.0;
    double polish_tolerance = 5e-5;
};

struct OptimTrace
{
    std::vector<EnergyTerms> energies; // energies[0] is the initialization
    std::vector<char> accepted;        // per iteration
    /// Index into `energies` where each phase starts; totals are monotone
    /// within a phase (a polish phase re-evaluates under a larger w_col).
    std::vector<std::size_t> phase_starts;
    std::string reason; // of the main phase
    bool diverged = false;
    double final_w_col = 0.0;
};

struct OptimResult
{
    BiGraspPose grasp;
    OptimTrace trace;
    EnergyEval final_energy;
};

/// Projected gradient descent with a per-block scaled, sup-normalized step
/// and backtracking. Joints are clamped and rotations renormalized after
/// every step.
OptimResult optimize(const BiGraspPose& init, const GraspProblem& problem, const EnergyWeights& weights,
                     const OptimConfig& config = {});

struct PregraspOptions
{
    double target = 0.01;          // contact distance of the pre-grasp, meters
    double band = 0.001;           // accepted +- around the target
    double max_retreat = 0.05;     // meters
    double flexion_retreat = 0.1;  // retreat distance at which flexion reaches the open posture
    int bisection_steps = 60;
};

struct PregraspResult
{
    bool ok = false;
    std::string reason;
    BiGraspPose pre;
    BiGraspPose squeeze;
    std::array<double, 2> retreat = {0.0, 0.0};
};

/// Minimum signed distance from a hand's contact points to the object.
double min_contact_distance(const HandModel& hand, const HandPose& pose, const MeshDistance& object);

/// Retreats each wrist along its palm axis while opening the fingers until
/// the closest contact sits target +- band from the surface, then
/// extrapolates the squeeze pose 2 G - G_pre.
PregraspResult pregrasp_and_squeeze(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                    const MeshDistance& object, const PregraspOptions& options = {});

/// Squeeze extrapolation of a single hand: translations and joints linearly
/// (joints clamped), rotation by applying the pre->grasp relative rotation again.
HandPose squeeze_pose(const HandModel& hand, const HandPose& grasp, const HandPose& pre);

} // namespace bidex
