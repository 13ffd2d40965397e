#include "bidex/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <Eigen/SVD>

namespace bidex {

double penetration_depth(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                         const MeshDistance& object)
{
    double pd = 0.0;
    const HandModel* hands[2] = {&left, &right};
    const HandPose* poses[2] = {&grasp.left, &grasp.right};
    for (int h = 0; h < 2; ++h) {
        const HandKinematics kin = forward_kinematics(*hands[h], *poses[h]);
        for (std::size_t s = 0; s < hands[h]->spheres().size(); ++s)
            pd = std::max(pd, hands[h]->spheres()[s].radius - object.signed_distance(kin.sphere_centers[s]));
    }
    return pd;
}

double self_penetration_depth(const BiGraspPose& grasp, const HandModel& left, const HandModel& right)
{
    const CollisionReport rep = collision_check(left, grasp.left, right, grasp.right, nullptr, kNoTable);
    return std::max({0.0, rep.max_depth(CollisionKind::IntraHand), rep.max_depth(CollisionKind::InterHand)});
}

double contact_distance_consistency(const std::vector<double>& d)
{
    if (d.empty())
        throw std::invalid_argument("contact_distance_consistency: no contacts");
    auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    return *hi - *lo;
}

double contact_distance_consistency(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                    const MeshDistance& object)
{
    std::vector<double> d;
    const HandModel* hands[2] = {&left, &right};
    const HandPose* poses[2] = {&grasp.left, &grasp.right};
    for (int h = 0; h < 2; ++h) {
        const HandKinematics kin = forward_kinematics(*hands[h], *poses[h]);
        for (std::size_t c = 0; c < hands[h]->contacts().size(); ++c)
            if (hands[h]->contacts()[c].fingertip)
                d.push_back(object.signed_distance(kin.contacts[c]));
    }
    return contact_distance_consistency(d);
}

Eigen::VectorXd grasp_vector(const BiGraspPose& grasp)
{
    const auto n = 24 + grasp.left.joints.size() + grasp.right.joints.size();
    Eigen::VectorXd v(n);
    Eigen::Index o = 0;
    for (const HandPose* p : {&grasp.left, &grasp.right}) {
        v.segment<3>(o) = p->translation;
        o += 3;
        const Mat3 R = p->rotation.normalized().toRotationMatrix();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                v[o++] = R(r, c);
        v.segment(o, p->joints.size()) = p->joints;
        o += p->joints.size();
    }
    return v;
}

double first_variance_ratio(const std::vector<Eigen::VectorXd>& vectors)
{
    if (vectors.size() < 2)
        throw std::invalid_argument("first_variance_ratio: need at least 2 grasps");
    const Eigen::Index dim = vectors[0].size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(vectors.size()), dim);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim)
            throw std::invalid_argument("first_variance_ratio: inconsistent grasp dimensions");
        X.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
    }
    X.rowwise() -= X.colwise().mean();
    // Variances along principal axes are the squared singular values of the
    // centered data (the common 1/(n-1) factor cancels in the ratio).
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(X).singularValues();
    const double total = sv.squaredNorm();
    if (total / static_cast<double>(vectors.size() - 1) < 1e-12)
        return 1.0;
    return sv[0] * sv[0] / total;
}

double first_variance_ratio(const std::vector<BiGraspPose>& grasps)
{
    std::vector<Eigen::VectorXd> v;
    v.reserve(grasps.size());
    for (const auto& g : grasps)
        v.push_back(grasp_vector(g));
    return first_variance_ratio(v);
}

SuccessResult analytic_success(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                               const MeshDistance& object, const Vec3& reference, const SuccessCriteria& crit)
{
    SuccessResult r;
    ContactState cs(crit.mu);
    const HandModel* hands[2] = {&left, &right};
    const HandPose* poses[2] = {&grasp.left, &grasp.right};
    for (int h = 0; h < 2; ++h) {
        const HandKinematics kin = forward_kinematics(*hands[h], *poses[h]);
        for (const Vec3& c : kin.contacts) {
            const ClosestPoint cp = object.closest(c);
            if (std::abs(cp.signed_distance) <= crit.contact_band)
                cs.add(c - reference, -object.smooth_normal(cp));
        }
    }
    r.active_contacts = cs.size();
    if (crit.gamma > static_cast<double>(cs.size())) {
        // The coupling constraint cannot hold; nothing is resisted.
        r.q = static_cast<double>(kNumDisturbances) * crit.beta * crit.beta;
        for (const Wrench& t : disturbance_directions())
            r.residuals.push_back(crit.beta * t);
    } else {
        QpResult qp = qp_energy(cs, crit.beta, crit.gamma);
        r.q = qp.energy;
        r.residuals = qp.residuals;
    }
    r.pd = std::max(0.0, penetration_depth(grasp, left, right, object));
    r.spd = self_penetration_depth(grasp, left, right);
    r.pass = r.q <= crit.epsilon * crit.beta * crit.beta && r.pd <= crit.max_pd && r.spd <= crit.max_spd;
    return r;
}

} // namespace bidex
