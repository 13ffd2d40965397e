#include "bidex/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bidex {

double phi(double d, double a)
{
    const double b = 2.0 * a;
    if (d <= a)
        return 0.0;
    if (d > b)
        return d - a;
    const double t = (d - a) / (b - a);
    return (3.0 * t * t - 2.0 * t * t * t) * (d - a);
}

double phi_derivative(double d, double a)
{
    const double b = 2.0 * a;
    if (d <= a)
        return 0.0;
    if (d > b)
        return 1.0;
    // d/dd [H(t) (d - a)] with dt/dd = 1 / (b - a) and d - a = t (b - a).
    const double t = (d - a) / (b - a);
    return (6.0 * t - 6.0 * t * t) * t + 3.0 * t * t - 2.0 * t * t * t;
}

PointEnergy e_dis(const std::vector<Vec3>& points, const MeshDistance& object)
{
    PointEnergy e;
    e.gradient.reserve(points.size());
    for (const Vec3& c : points) {
        const ClosestPoint cp = object.closest(c);
        const Vec3 diff = c - cp.point;
        e.value += diff.squaredNorm();
        e.gradient.push_back(2.0 * diff);
    }
    return e;
}

PointEnergy e_region(const std::vector<Vec3>& points, const std::vector<Vec3>& region, double a)
{
    if (region.empty())
        throw std::invalid_argument("e_region: empty region");
    PointEnergy e;
    e.gradient.reserve(points.size());
    for (const Vec3& c : points) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < region.size(); ++k) {
            double d2 = (c - region[k]).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        const double d = std::sqrt(best_d2);
        e.value += phi(d, a);
        e.gradient.push_back(d > 0 ? Vec3(phi_derivative(d, a) * (c - region[best]) / d) : Vec3::Zero());
    }
    return e;
}

ContactState hand_contact_state(const HandModel& hand, const HandKinematics& kin, const MeshDistance& object,
                                const Vec3& reference, double mu)
{
    (void)hand;
    ContactState cs(mu);
    for (const Vec3& c : kin.contacts)
        cs.add(c - reference, -object.smooth_normal(object.closest(c)));
    return cs;
}

double collision_energy(const CollisionReport& report)
{
    double e = 0.0;
    for (const auto& entry : report.entries)
        e += entry.depth * entry.depth;
    return e;
}

namespace {

struct HandEval
{
    HandKinematics kin;
    ContactState contacts;
    std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> contact_jac;
    std::vector<ContactJacobian> wrench_jac;
};

HandEval eval_hand(const HandModel& hand, const HandPose& pose, const GraspProblem& problem, double mu,
                   bool with_gradient)
{
    HandEval h;
    h.kin = forward_kinematics(hand, pose);
    h.contacts = ContactState(mu);
    for (std::size_t c = 0; c < h.kin.contacts.size(); ++c) {
        const ClosestPoint cp = problem.object->closest(h.kin.contacts[c]);
        if (with_gradient) {
            const SurfaceJacobian sj = problem.object->surface_jacobian(cp);
            h.contacts.add(h.kin.contacts[c] - problem.reference, -sj.normal);
            auto J = point_jacobian(hand, pose, h.kin, hand.contacts()[c].link, h.kin.contacts[c]);
            h.wrench_jac.push_back({J, -sj.dnormal * J});
            h.contact_jac.push_back(std::move(J));
        } else {
            h.contacts.add(h.kin.contacts[c] - problem.reference, -problem.object->smooth_normal(cp));
        }
    }
    return h;
}

} // namespace

EnergyEval total_energy(const BiGraspPose& grasp, const GraspProblem& problem, const EnergyWeights& w,
                        bool with_gradient, const WarmStart& warm, const QpOptions& qp_options)
{
    const HandModel* hands[2] = {problem.left, problem.right};
    const HandPose* poses[2] = {&grasp.left, &grasp.right};
    const std::vector<Vec3>* regions[2] = {&problem.region_left, &problem.region_right};
    const double wq[2] = {w.w_q_left, w.w_q_right};
    const QpResult* warms[2] = {warm.left, warm.right};
    const int offset[2] = {0, problem.left->num_params()};

    EnergyEval out;
    if (with_gradient)
        out.gradient = Eigen::VectorXd::Zero(problem.num_params());

    HandEval he[2];
    for (int h = 0; h < 2; ++h) {
        he[h] = eval_hand(*hands[h], *poses[h], problem, w.mu, with_gradient);
        const int np = hands[h]->num_params();

        // Force-closure term of this hand only.
        QpResult& qp = h == 0 ? out.qp_left : out.qp_right;
        qp = qp_energy(he[h].contacts, w.beta, w.gamma, qp_options, warms[h]);
        (h == 0 ? out.terms.q_left : out.terms.q_right) = qp.energy;
        if (with_gradient && wq[h] != 0.0)
            out.gradient.segment(offset[h], np) += wq[h] * qp_energy_gradient(he[h].contacts, qp, he[h].wrench_jac);

        const PointEnergy dis = e_dis(he[h].kin.contacts, *problem.object);
        const PointEnergy reg = e_region(he[h].kin.contacts, *regions[h], w.a);
        out.terms.dis += dis.value;
        out.terms.region += reg.value;
        if (with_gradient)
            for (std::size_t c = 0; c < he[h].kin.contacts.size(); ++c)
                out.gradient.segment(offset[h], np) += he[h].contact_jac[c].transpose() *
                                                       (w.w_dis * dis.gradient[c] + w.w_region * reg.gradient[c]);
    }

    const CollisionReport col =
        collision_check(*problem.left, he[0].kin, *problem.right, he[1].kin, problem.object, problem.table_height,
                        w.collision_margin);
    out.terms.col = collision_energy(col);
    if (with_gradient && w.w_col != 0.0) {
        auto sphere_grad = [&](int h, int s, const Vec3& g) {
            const auto& sph = hands[h]->spheres()[s];
            auto J = point_jacobian(*hands[h], *poses[h], he[h].kin, sph.link, he[h].kin.sphere_centers[s]);
            out.gradient.segment(offset[h], hands[h]->num_params()) += w.w_col * J.transpose() * g;
        };
        for (const auto& e : col.entries) {
            const Vec3& ca = he[e.hand_a].kin.sphere_centers[e.sphere_a];
            switch (e.kind) {
            case CollisionKind::IntraHand:
            case CollisionKind::InterHand: {
                const Vec3& cb = he[e.hand_b].kin.sphere_centers[e.sphere_b];
                const Vec3 diff = ca - cb;
                const double len = diff.norm();
                if (len < 1e-12)
                    break;
                const Vec3 g = -2.0 * e.depth * diff / len; // d depth^2 / d ca
                sphere_grad(e.hand_a, e.sphere_a, g);
                sphere_grad(e.hand_b, e.sphere_b, -g);
                break;
            }
            case CollisionKind::Object: {
                const ClosestPoint cp = problem.object->closest(ca);
                sphere_grad(e.hand_a, e.sphere_a, -2.0 * e.depth * problem.object->sdf_gradient(ca, cp));
                break;
            }
            case CollisionKind::Table:
                sphere_grad(e.hand_a, e.sphere_a, -2.0 * e.depth * Vec3::UnitZ());
                break;
            }
        }
    }

    out.terms.total = w.w_q_left * out.terms.q_left + w.w_q_right * out.terms.q_right + w.w_dis * out.terms.dis +
                      w.w_region * out.terms.region + w.w_col * out.terms.col;
    return out;
}

BiGraspPose apply_bimanual_step(const GraspProblem& problem, const BiGraspPose& grasp, const Eigen::VectorXd& step)
{
    const int nl = problem.left->num_params();
    BiGraspPose out;
    out.left = apply_step(*problem.left, grasp.left, step.head(nl));
    out.right = apply_step(*problem.right, grasp.right, step.tail(problem.right->num_params()));
    return out;
}

namespace {

Eigen::VectorXd step_scales(const GraspProblem& problem, const OptimConfig& cfg, double factor)
{
    Eigen::VectorXd s(problem.num_params());
    int o = 0;
    for (const HandModel* h : {problem.left, problem.right}) {
        s.segment(o, 3).setConstant(cfg.step_translation * factor);
        s.segment(o + 3, 3).setConstant(cfg.step_rotation * factor);
        s.segment(o + 6, h->num_joints()).setConstant(cfg.step_joint * factor);
        o += h->num_params();
    }
    return s;
}

// -s * (s g) scaled so its largest entry has the step size of its block.
// With `per_block`, each of translation, rotation and joints of each hand is
// scaled on its own so a dominant block does not stall the others.
Eigen::VectorXd normalized_direction(const GraspProblem& problem, const Eigen::VectorXd& s, const Eigen::VectorXd& sg,
                                     bool per_block)
{
    Eigen::VectorXd dir = -s.cwiseProduct(sg);
    if (!per_block)
        return dir / sg.cwiseAbs().maxCoeff();
    int o = 0;
    for (const HandModel* h : {problem.left, problem.right}) {
        for (auto [begin, len] : {std::pair{o, 3}, std::pair{o + 3, 3}, std::pair{o + 6, h->num_joints()}}) {
            const double m = sg.segment(begin, len).cwiseAbs().maxCoeff();
            if (m > 0.0)
                dir.segment(begin, len) /= m;
        }
        o += h->num_params();
    }
    return dir;
}

bool finite(const EnergyEval& e)
{
    return std::isfinite(e.terms.total) && (e.gradient.size() == 0 || e.gradient.allFinite());
}

} // namespace

namespace {

// Runs up to `iterations` scaled descent steps from res.grasp / cur. Returns
// the stop reason; an empty string means the iteration budget ran out.
std::string descend(OptimResult& res, EnergyEval& cur, const GraspProblem& problem, const EnergyWeights& weights,
                    const OptimConfig& cfg, int iterations, double& factor, bool anneal)
{
    const std::size_t start = res.trace.energies.size() - 1;
    for (int it = 0; it < iterations; ++it) {
        if (anneal && std::find(cfg.anneal_at.begin(), cfg.anneal_at.end(), it) != cfg.anneal_at.end())
            factor *= cfg.anneal_factor;
        const Eigen::VectorXd s = step_scales(problem, cfg, factor);
        const Eigen::VectorXd sg = s.cwiseProduct(cur.gradient);
        if (sg.cwiseAbs().maxCoeff() == 0.0)
            return "zero gradient";
        const Eigen::VectorXd dir = normalized_direction(problem, s, sg, cfg.block_normalize);

        bool accepted = false;
        double alpha = 1.0;
        for (int h = 0; h <= cfg.max_halvings; ++h, alpha *= 0.5) {
            BiGraspPose cand = apply_bimanual_step(problem, res.grasp, alpha * dir);
            EnergyEval ev = total_energy(cand, problem, weights, true, {&cur.qp_left, &cur.qp_right});
            if (!finite(ev)) {
                res.trace.diverged = true;
                return "non-finite energy";
            }
            if (ev.terms.total < cur.terms.total) {
                res.grasp = cand;
                cur = std::move(ev);
                accepted = true;
                break;
            }
        }
        res.trace.accepted.push_back(accepted);
        res.trace.energies.push_back(cur.terms);
        if (!accepted)
            return "line search failed";
        const auto& E = res.trace.energies;
        if (E.size() - start > static_cast<std::size_t>(cfg.window)) {
            const double old = E[E.size() - 1 - cfg.window].total;
            if ((old - E.back().total) <= cfg.tolerance * std::max(std::abs(old), 1e-300))
                return "converged";
        }
    }
    return {};
}

double unpadded_penetration(const BiGraspPose& g, const GraspProblem& problem)
{
    return collision_check(*problem.left, g.left, *problem.right, g.right, problem.object, problem.table_height)
        .max_depth();
}

} // namespace

OptimResult optimize(const BiGraspPose& init, const GraspProblem& problem, const EnergyWeights& weights,
                     const OptimConfig& cfg)
{
    OptimResult res;
    res.grasp = init;
    res.grasp.left.project(*problem.left);
    res.grasp.right.project(*problem.right);
    res.trace.final_w_col = weights.w_col;
    res.trace.phase_starts.push_back(0);
    if (cfg.iterations <= 0) {
        res.grasp = init;
        res.final_energy = total_energy(init, problem, weights, false);
        res.trace.energies.push_back(res.final_energy.terms);
        res.trace.reason = "no iterations requested";
        return res;
    }

    EnergyEval cur = total_energy(res.grasp, problem, weights, true);
    res.trace.energies.push_back(cur.terms);
    if (!finite(cur)) {
        res.trace.diverged = true;
        res.trace.reason = "non-finite energy at initialization";
        res.final_energy = cur;
        return res;
    }

    double factor = 1.0;
    std::string reason = descend(res, cur, problem, weights, cfg, cfg.iterations, factor, true);
    res.trace.reason = reason.empty() ? "iteration limit" : reason;

    EnergyWeights w = weights;
    for (int round = 0; round < cfg.polish_rounds && !res.trace.diverged && w.w_col > 0.0; ++round) {
        if (unpadded_penetration(res.grasp, problem) <= cfg.polish_tolerance)
            break;
        w.w_col *= cfg.polish_factor;
        cur = total_energy(res.grasp, problem, w, true, {&cur.qp_left, &cur.qp_right});
        res.trace.phase_starts.push_back(res.trace.energies.size());
        res.trace.energies.push_back(cur.terms);
        res.trace.final_w_col = w.w_col;
        reason = descend(res, cur, problem, w, cfg, cfg.polish_iterations, factor, false);
        if (res.trace.diverged)
            res.trace.reason = reason;
    }
    res.final_energy = cur;
    return res;
}

// ---------------------------------------------------------------------------
// Pre-grasp and squeeze

double min_contact_distance(const HandModel& hand, const HandPose& pose, const MeshDistance& object)
{
    double d = std::numeric_limits<double>::infinity();
    for (const Vec3& c : forward_kinematics(hand, pose).contacts)
        d = std::min(d, object.signed_distance(c));
    return d;
}

namespace {

HandPose retreat(const HandModel& hand, const HandPose& pose, double s, double flexion_retreat)
{
    HandPose out = pose;
    const Vec3 z = pose.rotation.normalized() * Vec3::UnitZ();
    out.translation = pose.translation - s * z;
    const Eigen::VectorXd open = hand.open_posture();
    const double keep = std::max(0.0, 1.0 - s / flexion_retreat);
    out.joints = open + keep * (pose.joints - open);
    out.project(hand);
    return out;
}

bool find_pregrasp(const HandModel& hand, const HandPose& grasp, const MeshDistance& object,
                   const PregraspOptions& opt, HandPose& pre, double& s_out, std::string& reason)
{
    auto f = [&](double s) { return min_contact_distance(hand, retreat(hand, grasp, s, opt.flexion_retreat), object); };
    const double lo_ok = opt.target - opt.band, hi_ok = opt.target + opt.band;
    double lo = 0.0, hi = opt.max_retreat;
    double flo = f(lo), fhi = f(hi);
    auto accept = [&](double s) {
        pre = retreat(hand, grasp, s, opt.flexion_retreat);
        s_out = s;
        return true;
    };
    if (flo >= lo_ok && flo <= hi_ok)
        return accept(lo);
    if (flo > hi_ok) {
        reason = "contacts already farther than the pre-grasp distance";
        return false;
    }
    if (fhi < lo_ok) {
        reason = "retraction limit reached before the pre-grasp distance";
        return false;
    }
    for (int it = 0; it < opt.bisection_steps; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm >= lo_ok && fm <= hi_ok)
            return accept(mid);
        if (fm < opt.target)
            lo = mid;
        else
            hi = mid;
    }
    reason = "pre-grasp bisection did not reach the distance band";
    return false;
}

} // namespace

HandPose squeeze_pose(const HandModel& hand, const HandPose& grasp, const HandPose& pre)
{
    HandPose out;
    out.translation = grasp.translation + (grasp.translation - pre.translation);
    const Eigen::Quaterniond rel = pre.rotation.conjugate() * grasp.rotation;
    out.rotation = (grasp.rotation * rel).normalized();
    out.joints = grasp.joints + (grasp.joints - pre.joints);
    out.joints = out.joints.cwiseMax(hand.lower_limits()).cwiseMin(hand.upper_limits());
    return out;
}

PregraspResult pregrasp_and_squeeze(const BiGraspPose& grasp, const HandModel& left, const HandModel& right,
                                    const MeshDistance& object, const PregraspOptions& options)
{
    PregraspResult r;
    std::string why;
    if (!find_pregrasp(left, grasp.left, object, options, r.pre.left, r.retreat[0], why)) {
        r.reason = "left hand: " + why;
        return r;
    }
    if (!find_pregrasp(right, grasp.right, object, options, r.pre.right, r.retreat[1], why)) {
        r.reason = "right hand: " + why;
        return r;
    }
    r.squeeze.left = squeeze_pose(left, grasp.left, r.pre.left);
    r.squeeze.right = squeeze_pose(right, grasp.right, r.pre.right);
    r.ok = true;
    return r;
}

} // namespace bidex
