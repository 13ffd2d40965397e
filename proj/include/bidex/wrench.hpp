#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "bidex/geometry.hpp"

namespace bidex {

/// Wrench layout: [force; torque].
using Wrench = Eigen::Matrix<double, 6, 1>;
using GraspMatrix = Eigen::Matrix<double, 6, 3>;

struct TangentFrame
{
    Vec3 d;
    Vec3 e;
};

/// d = normalize(a x n), e = n x d with a = z unless |n.z| > 0.99, then a = x.
TangentFrame tangent_frame(const Vec3& normal);

/// Columns [n; p x n], [d; p x d], [e; p x e]; n is the inward normal.
GraspMatrix grasp_matrix(const Vec3& p, const Vec3& n, const Vec3& d, const Vec3& e);
GraspMatrix grasp_matrix(const Vec3& p, const Vec3& n);

struct Contact
{
    Vec3 position; // relative to the torque reference point
    Vec3 normal;   // inward, unit
    Vec3 d;
    Vec3 e;
};

/// Point contacts with Coulomb friction. A local force f = (f1, f2, f3) lives
/// in the capped cone 0 <= f1 <= 1, |(f2, f3)| <= mu f1.
class ContactState
{
public:
    explicit ContactState(double mu = 0.6) : mu_(mu) {}

    void add(const Vec3& position, const Vec3& inward_normal);
    void add(const Vec3& position, const Vec3& inward_normal, const Vec3& d, const Vec3& e);

    std::size_t size() const { return contacts_.size(); }
    bool empty() const { return contacts_.empty(); }
    double mu() const { return mu_; }
    const Contact& operator[](std::size_t i) const { return contacts_[i]; }
    const std::vector<Contact>& contacts() const { return contacts_; }
    const GraspMatrix& grasp(std::size_t i) const { return grasp_[i]; }

    Wrench wrench(std::size_t i, const Vec3& local_force) const { return grasp_[i] * local_force; }

private:
    double mu_;
    std::vector<Contact> contacts_;
    std::vector<GraspMatrix> grasp_;
};

/// Euclidean projection onto the capped friction cone.
Vec3 project_capped_cone(const Vec3& f, double mu);

/// Local force maximizing u . (G f) over the capped cone of contact i.
Vec3 support_force(const ContactState& contacts, std::size_t i, const Wrench& u);

/// Support function of the grasp wrench space (Minkowski sum of per-contact sets).
double support_function(const ContactState& contacts, const Wrench& u);

struct GwbSamples
{
    std::vector<Wrench> directions;
    std::vector<Wrench> points;
    bool no_contacts = false;
};

/// M boundary wrenches: support points for uniformly random unit directions in R^6.
GwbSamples sample_gwb(const ContactState& contacts, std::size_t count, std::uint64_t seed);
/// Same, for caller-supplied unit directions.
GwbSamples sample_gwb(const ContactState& contacts, const std::vector<Wrench>& directions);

/// Signed unit force and torque axes, [+fx, -fx, +fy, -fy, ..., +tz, -tz].
const std::vector<Wrench>& disturbance_directions();
inline constexpr std::size_t kNumDisturbances = 12;

struct QpOptions
{
    int max_iterations = 500;
    double tolerance = 1e-8; // on the force update norm
};

struct QpResult
{
    double energy = 0.0;
    std::vector<Wrench> residuals;              // beta t_j - sum_i G_i f_ji
    std::vector<std::vector<Vec3>> forces;      // [j][i], local coordinates
    std::vector<char> coupling_active;          // sum_i f_ji1 == gamma at the optimum
    std::vector<int> iterations;
    bool converged = true;
};

/// Squared distance of each scaled disturbance to the achievable wrench set,
/// summed. Solved per disturbance by accelerated projected gradient; `warm`
/// (same contact count) seeds the forces.
QpResult qp_energy(const ContactState& contacts, double beta, double gamma, const QpOptions& options = {},
                   const QpResult* warm = nullptr);

/// Derivative of a contact position and inward normal with respect to some
/// parameter vector.
struct ContactJacobian
{
    Eigen::Matrix<double, 3, Eigen::Dynamic> dposition;
    Eigen::Matrix<double, 3, Eigen::Dynamic> dnormal;
};

/// Envelope gradient of the QP energy: optimal forces held fixed, grasp
/// matrices differentiated through positions, normals and the tangent rule.
Eigen::VectorXd qp_energy_gradient(const ContactState& contacts, const QpResult& qp,
                                   const std::vector<ContactJacobian>& jacobians);

} // namespace bidex
