#include "bidex/wrench.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "bidex/rng.hpp"

namespace bidex {

namespace {

Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Vec3 tangent_anchor(const Vec3& n) { return std::abs(n.z()) > 0.99 ? Vec3::UnitX() : Vec3::UnitZ(); }

// Closest point to (z, r) on segment a-b in the (normal, tangential) half plane.
Eigen::Vector2d closest_on_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    Eigen::Vector2d ab = b - a;
    double len2 = ab.squaredNorm();
    if (len2 == 0)
        return a;
    double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + s * ab;
}

} // namespace

TangentFrame tangent_frame(const Vec3& n)
{
    if (!(n.norm() > 1e-12))
        throw std::invalid_argument("tangent_frame: zero normal");
    Vec3 d = tangent_anchor(n).cross(n).normalized();
    return {d, n.cross(d)};
}

GraspMatrix grasp_matrix(const Vec3& p, const Vec3& n, const Vec3& d, const Vec3& e)
{
    GraspMatrix G;
    G.col(0) << n, p.cross(n);
    G.col(1) << d, p.cross(d);
    G.col(2) << e, p.cross(e);
    return G;
}

GraspMatrix grasp_matrix(const Vec3& p, const Vec3& n)
{
    if (!(n.norm() > 1e-12))
        throw std::invalid_argument("grasp_matrix: zero normal");
    TangentFrame t = tangent_frame(n);
    return grasp_matrix(p, n, t.d, t.e);
}

void ContactState::add(const Vec3& position, const Vec3& inward_normal)
{
    if (!(inward_normal.norm() > 1e-12))
        throw std::invalid_argument("ContactState: zero normal");
    Vec3 n = inward_normal.normalized();
    TangentFrame t = tangent_frame(n);
    add(position, n, t.d, t.e);
}

void ContactState::add(const Vec3& position, const Vec3& inward_normal, const Vec3& d, const Vec3& e)
{
    contacts_.push_back({position, inward_normal, d, e});
    grasp_.push_back(grasp_matrix(position, inward_normal, d, e));
}

Vec3 project_capped_cone(const Vec3& f, double mu)
{
    const double z = f[0];
    const double r = std::sqrt(f[1] * f[1] + f[2] * f[2]);
    if (z >= 0 && z <= 1 && r <= mu * z)
        return f;

    // The set is rotationally symmetric about the normal; project in the
    // (z, r) half plane onto the triangle (0,0), (1,0), (1,mu).
    const Eigen::Vector2d p(z, r);
    const Eigen::Vector2d o(0, 0), a(1, 0), b(1, mu);
    Eigen::Vector2d best = closest_on_segment(p, o, b);
    for (const auto& cand : {closest_on_segment(p, a, b), closest_on_segment(p, o, a)})
        if ((cand - p).squaredNorm() < (best - p).squaredNorm())
            best = cand;

    Vec3 out(best[0], 0, 0);
    if (r > 0) {
        out[1] = best[1] * f[1] / r;
        out[2] = best[1] * f[2] / r;
    }
    return out;
}

namespace {

// Maximizer of g . f over the capped cone, with g = G^T u in local coordinates.
Vec3 support_local(const Vec3& g, double mu)
{
    const double gt = std::sqrt(g[1] * g[1] + g[2] * g[2]);
    if (g[0] + mu * gt <= 0)
        return Vec3::Zero();
    Vec3 f(1.0, 0.0, 0.0);
    if (gt > 0) {
        f[1] = mu * g[1] / gt;
        f[2] = mu * g[2] / gt;
    }
    return f;
}

} // namespace

Vec3 support_force(const ContactState& contacts, std::size_t i, const Wrench& u)
{
    return support_local(contacts.grasp(i).transpose() * u, contacts.mu());
}

double support_function(const ContactState& contacts, const Wrench& u)
{
    double h = 0.0;
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        const Vec3 g = contacts.grasp(i).transpose() * u;
        h += std::max(0.0, g[0] + contacts.mu() * std::sqrt(g[1] * g[1] + g[2] * g[2]));
    }
    return h;
}

GwbSamples sample_gwb(const ContactState& contacts, std::size_t count, std::uint64_t seed)
{
    if (count < 1)
        throw std::invalid_argument("sample_gwb: count must be >= 1");
    std::vector<Wrench> dirs;
    dirs.reserve(count);
    CounterRng rng(seed);
    for (std::size_t k = 0; k < count; ++k)
        dirs.push_back(rng.unit_vector<6>());
    return sample_gwb(contacts, dirs);
}

GwbSamples sample_gwb(const ContactState& contacts, const std::vector<Wrench>& directions)
{
    GwbSamples out;
    out.no_contacts = contacts.empty();
    out.directions = directions;
    const Eigen::Index m = static_cast<Eigen::Index>(directions.size());
    const Eigen::Map<const Eigen::Matrix<double, 6, Eigen::Dynamic>> U(directions.empty() ? nullptr
                                                                                          : directions[0].data(),
                                                                       6, m);
    Eigen::Matrix<double, 6, Eigen::Dynamic> W = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, m);
    Eigen::Matrix<double, 3, Eigen::Dynamic> local(3, m);
    Eigen::Matrix<double, 3, Eigen::Dynamic> forces(3, m);
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        local.noalias() = contacts.grasp(i).transpose() * U;
        for (Eigen::Index k = 0; k < m; ++k)
            forces.col(k) = support_local(local.col(k), contacts.mu());
        W.noalias() += contacts.grasp(i) * forces;
    }
    out.points.resize(directions.size());
    for (Eigen::Index k = 0; k < m; ++k)
        out.points[k] = W.col(k);
    return out;
}

const std::vector<Wrench>& disturbance_directions()
{
    static const std::vector<Wrench> dirs = [] {
        std::vector<Wrench> d;
        for (int axis = 0; axis < 6; ++axis)
            for (double sign : {1.0, -1.0}) {
                Wrench t = Wrench::Zero();
                t[axis] = sign;
                d.push_back(t);
            }
        return d;
    }();
    return dirs;
}

// ---------------------------------------------------------------------------
// QP energy

namespace {

using ForceVec = Eigen::VectorXd; // stacked local forces, 3 per contact

void project_cones(const ForceVec& y, double mu, ForceVec& out)
{
    const Eigen::Index m = y.size() / 3;
    for (Eigen::Index i = 0; i < m; ++i)
        out.segment<3>(3 * i) = project_capped_cone(y.segment<3>(3 * i), mu);
}

double normal_sum(const ForceVec& f)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.size() / 3; ++i)
        s += f[3 * i];
    return s;
}

// Projection onto (product of capped cones) intersected with {sum f_i1 >= gamma}.
// If the cone projection violates the halfspace, the solution is
// P_cones(y + lambda * a) with lambda >= 0 chosen so the coupling is tight.
bool project_feasible(const ForceVec& y, double mu, double gamma, ForceVec& out)
{
    project_cones(y, mu, out);
    if (normal_sum(out) >= gamma)
        return false;

    const Eigen::Index m = y.size() / 3;
    ForceVec shifted = y;
    auto sum_at = [&](double lambda) {
        for (Eigen::Index i = 0; i < m; ++i)
            shifted[3 * i] = y[3 * i] + lambda;
        project_cones(shifted, mu, out);
        return normal_sum(out);
    };
    // The projected normal sum is monotone and piecewise linear in lambda:
    // Illinois regula falsi on a bracket [lo, hi].
    double lo = 0.0;
    double hi = 1.0;
    double f_lo = normal_sum(out) - gamma;
    double f_hi = sum_at(hi) - gamma;
    while (f_hi < 0 && hi < 1e6) {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = sum_at(hi) - gamma;
    }
    int side = 0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        double mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if (!(mid > lo && mid < hi))
            mid = 0.5 * (lo + hi);
        const double f_mid = sum_at(mid) - gamma;
        if (std::abs(f_mid) <= 1e-15 * std::max(1.0, gamma)) {
            hi = mid;
            break;
        }
        if (f_mid < 0) {
            lo = mid;
            f_lo = f_mid;
            if (side == -1)
                f_hi *= 0.5;
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if (side == 1)
                f_lo *= 0.5;
            side = 1;
        }
    }
    sum_at(hi);
    return true;
}

} // namespace

QpResult qp_energy(const ContactState& contacts, double beta, double gamma, const QpOptions& options,
                   const QpResult* warm)
{
    if (!(beta > 0))
        throw std::invalid_argument("qp_energy: beta must be positive");
    if (gamma < 0)
        throw std::invalid_argument("qp_energy: gamma must be non-negative");
    const std::size_t m = contacts.size();
    if (gamma > static_cast<double>(m))
        throw std::invalid_argument("qp_energy: infeasible coupling (gamma exceeds contact count)");

    const auto& dirs = disturbance_directions();
    QpResult res;
    res.residuals.resize(dirs.size());
    res.forces.assign(dirs.size(), std::vector<Vec3>(m, Vec3::Zero()));
    res.coupling_active.assign(dirs.size(), 0);
    res.iterations.assign(dirs.size(), 0);

    if (m == 0) {
        for (std::size_t j = 0; j < dirs.size(); ++j) {
            res.residuals[j] = beta * dirs[j];
            res.energy += res.residuals[j].squaredNorm();
        }
        return res;
    }

    Eigen::Matrix<double, 6, Eigen::Dynamic> A(6, 3 * m);
    for (std::size_t i = 0; i < m; ++i)
        A.block<6, 3>(0, 3 * i) = contacts.grasp(i);
    Eigen::Matrix<double, 6, 6> AAt = A * A.transpose();
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>>(AAt, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff();
    const double step = 1.0 / (2.0 * std::max(lmax, 1e-12));
    const double mu = contacts.mu();
    const bool warm_ok = warm && warm->forces.size() == dirs.size() && !warm->forces.empty() &&
                         warm->forces[0].size() == m;

    ForceVec x(3 * m), x_prev(3 * m), yv(3 * m), grad(3 * m), trial(3 * m);
    for (std::size_t j = 0; j < dirs.size(); ++j) {
        const Wrench b = beta * dirs[j];
        x.setZero();
        if (warm_ok)
            for (std::size_t i = 0; i < m; ++i)
                x.segment<3>(3 * i) = warm->forces[j][i];
        else
            for (std::size_t i = 0; i < m; ++i)
                x[3 * i] = gamma / static_cast<double>(m);
        project_feasible(x, mu, gamma, trial);
        x = trial;
        x_prev = x;
        double t = 1.0;
        int it = 0;
        bool done = false;
        bool active = false;
        for (; it < options.max_iterations; ++it) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            yv = x + ((t - 1.0) / t_next) * (x - x_prev);
            grad = -2.0 * A.transpose() * (b - A * yv);
            active = project_feasible(yv - step * grad, mu, gamma, trial);
            // Adaptive restart when momentum points uphill.
            if ((yv - trial).dot(trial - x) > 0) {
                t = 1.0;
                x_prev = x;
                grad = -2.0 * A.transpose() * (b - A * x);
                active = project_feasible(x - step * grad, mu, gamma, trial);
            } else {
                t = t_next;
                x_prev = x;
            }
            const double change = (trial - x).norm();
            x = trial;
            if (change < options.tolerance) {
                done = true;
                ++it;
                break;
            }
        }
        res.converged = res.converged && done;
        res.iterations[j] = it;
        res.coupling_active[j] = active || std::abs(normal_sum(x) - gamma) < 1e-10;
        for (std::size_t i = 0; i < m; ++i)
            res.forces[j][i] = x.segment<3>(3 * i);
        res.residuals[j] = b - A * x;
        res.energy += res.residuals[j].squaredNorm();
    }
    return res;
}

Eigen::VectorXd qp_energy_gradient(const ContactState& contacts, const QpResult& qp,
                                   const std::vector<ContactJacobian>& jacobians)
{
    if (jacobians.size() != contacts.size())
        throw std::invalid_argument("qp_energy_gradient: one jacobian per contact required");
    const Eigen::Index P = jacobians.empty() ? 0 : jacobians[0].dposition.cols();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
    if (contacts.empty())
        return grad;

    for (std::size_t i = 0; i < contacts.size(); ++i) {
        const Contact& c = contacts[i];
        const auto& Dp = jacobians[i].dposition;
        const auto& Dn = jacobians[i].dnormal;

        const Vec3 a = tangent_anchor(c.normal);
        const Vec3 u = a.cross(c.normal);
        const double ulen = u.norm();
        const Eigen::Matrix<double, 3, Eigen::Dynamic> Dd =
            (Mat3::Identity() - c.d * c.d.transpose()) * skew(a) * Dn / ulen;
        const Eigen::Matrix<double, 3, Eigen::Dynamic> De = -skew(c.d) * Dn + skew(c.normal) * Dd;

        // Residual-weighted sum over disturbances of the force in world axes.
        for (std::size_t j = 0; j < qp.residuals.size(); ++j) {
            const Vec3& f = qp.forces[j][i];
            if (f.isZero(0.0))
                continue;
            const Vec3 F = c.normal * f[0] + c.d * f[1] + c.e * f[2];
            const Eigen::Matrix<double, 3, Eigen::Dynamic> dF = f[0] * Dn + f[1] * Dd + f[2] * De;
            const Eigen::Matrix<double, 3, Eigen::Dynamic> dT = -skew(F) * Dp + skew(c.position) * dF;
            const Wrench& r = qp.residuals[j];
            grad.noalias() -= 2.0 * (dF.transpose() * r.head<3>() + dT.transpose() * r.tail<3>());
        }
    }
    return grad;
}

} // namespace bidex
