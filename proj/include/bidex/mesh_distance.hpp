#pragma once

#include <memory>
#include <vector>

#include "bidex/geometry.hpp"

namespace bidex {

/// Which part of a triangle the closest point landed on.
enum class Feature
{
    Face,
    Edge,
    Vertex
};

struct ClosestPoint
{
    Vec3 point = Vec3::Zero();
    std::size_t face = 0;
    Vec3 barycentric = Vec3::Zero();
    Feature feature = Feature::Face;
    int feature_index = 0; // edge (c, c+1 mod 3) or vertex corner
    double distance = 0.0; // unsigned
    double signed_distance = 0.0;
    Vec3 sign_normal = Vec3::Zero(); // pseudonormal of the feature
};

/// First-order behaviour of the closest surface point and of the smoothed
/// outward surface normal with respect to the query point.
struct SurfaceJacobian
{
    Vec3 point;
    Vec3 normal; // smoothed outward normal
    Mat3 dpoint; // d point / d query
    Mat3 dnormal; // d normal / d query
};

/// Closest-point and signed-distance queries against a closed triangle mesh.
///
/// Distances come from an AABB tree; the sign uses angle-weighted
/// pseudonormals of the closest feature, which is exact for closed meshes.
class MeshDistance
{
public:
    explicit MeshDistance(std::shared_ptr<const TriangleMesh> mesh);
    explicit MeshDistance(TriangleMesh mesh) : MeshDistance(std::make_shared<const TriangleMesh>(std::move(mesh))) {}

    const TriangleMesh& mesh() const { return *mesh_; }

    ClosestPoint closest(const Vec3& query) const;
    double signed_distance(const Vec3& query) const { return closest(query).signed_distance; }

    /// Outward direction of steepest SDF increase at the query.
    Vec3 sdf_gradient(const Vec3& query, const ClosestPoint& cp) const;

    /// Interpolated crease-aware normal at a closest point.
    Vec3 smooth_normal(const ClosestPoint& cp) const;

    SurfaceJacobian surface_jacobian(const ClosestPoint& cp) const;

private:
    struct Node
    {
        Eigen::AlignedBox3d box;
        int left = -1;
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    int build(int begin, int end);
    void query(int node, const Vec3& q, ClosestPoint& best, double& best_d2) const;

    std::shared_ptr<const TriangleMesh> mesh_;
    std::vector<Node> nodes_;
    std::vector<int> order_;
    std::vector<Eigen::AlignedBox3d> face_boxes_;
    std::vector<std::array<Vec3, 3>> edge_normals_; // per face, edge c -> (c+1)%3
    std::vector<Vec3> vertex_normals_;
};

double signed_distance(const MeshDistance& sdf, const Vec3& point);

/// Closest point on triangle (a, b, c); fills barycentrics and the feature.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& bary,
                               Feature& feature, int& feature_index);

} // namespace bidex
