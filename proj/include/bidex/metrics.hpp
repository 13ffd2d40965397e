#pragma once

#include <vector>

#include "bidex/handkin.hpp"
#include "bidex/mesh_distance.hpp"
#include "bidex/wrench.hpp"

namespace bidex {

/// Largest sphere penetration into the object, max(radius - SDF(center), 0).
double penetration_depth(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                         const MeshDistance& object);

/// Largest sphere overlap over non-exempt intra-hand pairs and all inter-hand pairs.
double self_penetration_depth(const BiGraspPose& grasp, const HandModel& left, const HandModel& right);

/// Range (max - min) of signed distances, negative inside.
double contact_distance_consistency(const std::vector<double>& signed_distances);
/// Same over the fingertip contacts of both hands.
double contact_distance_consistency(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                    const MeshDistance& object);

/// Flattened grasp: per hand translation (3), rotation matrix (9, row-major), joints.
Eigen::VectorXd grasp_vector(const BiGraspPose& grasp);

/// Share of variance along the first principal component; 1 for
/// (numerically) zero total variance. Throws for fewer than 2 grasps.
double first_variance_ratio(const std::vector<Eigen::VectorXd>& vectors);
double first_variance_ratio(const std::vector<BiGraspPose>& grasps);

struct SuccessCriteria
{
    double mu = 0.6;
    double beta = 1.0;
    double gamma = 0.2;
    double epsilon = 0.05;        // Q threshold as a fraction of beta^2
    double contact_band = 0.002;  // contacts count when |SDF| <= band
    double max_pd = 0.005;
    double max_spd = 0.002;
};

struct SuccessResult
{
    bool pass = false;
    double q = 0.0;
    std::vector<Wrench> residuals;
    std::size_t active_contacts = 0;
    double pd = 0.0;
    double spd = 0.0;
};

/// Force-closure proxy: joint contact state of both hands' contacts near the
/// surface, pass iff Q <= epsilon beta^2, PD <= max_pd and SPD <= max_spd.
SuccessResult analytic_success(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                               const MeshDistance& object, const Vec3& reference, const SuccessCriteria& criteria);

} // namespace bidex
