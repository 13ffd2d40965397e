#include "bidex/mesh_distance.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace bidex {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& bary,
                               Feature& feature, int& feature_index)
{
    // Voronoi-region walk (Ericson, Real-Time Collision Detection, 5.1.5).
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        bary = {1, 0, 0};
        feature = Feature::Vertex;
        feature_index = 0;
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        bary = {0, 1, 0};
        feature = Feature::Vertex;
        feature_index = 1;
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        bary = {1 - v, v, 0};
        feature = Feature::Edge;
        feature_index = 0;
        return a + v * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        bary = {0, 0, 1};
        feature = Feature::Vertex;
        feature_index = 2;
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        bary = {1 - w, 0, w};
        feature = Feature::Edge;
        feature_index = 2;
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary = {0, 1 - w, w};
        feature = Feature::Edge;
        feature_index = 1;
        return b + w * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    bary = {1 - v - w, v, w};
    feature = Feature::Face;
    feature_index = 0;
    return a + ab * v + ac * w;
}

MeshDistance::MeshDistance(std::shared_ptr<const TriangleMesh> mesh) : mesh_(std::move(mesh))
{
    const auto& V = mesh_->vertices();
    const auto& F = mesh_->triangles();
    const auto& N = mesh_->face_normals();
    const std::size_t nf = F.size();
    if (nf == 0)
        throw GeometryError("MeshDistance: empty mesh");

    // Pseudonormals for sign classification.
    vertex_normals_.assign(V.size(), Vec3::Zero());
    for (std::size_t f = 0; f < nf; ++f)
        for (int c = 0; c < 3; ++c) {
            const Vec3& at = V[F[f][c]];
            Vec3 u = V[F[f][(c + 1) % 3]] - at;
            Vec3 w = V[F[f][(c + 2) % 3]] - at;
            vertex_normals_[F[f][c]] += std::atan2(u.cross(w).norm(), u.dot(w)) * N[f];
        }
    std::unordered_map<std::uint64_t, Vec3> edge_sum;
    auto key = [](int a, int b) {
        if (a > b)
            std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    };
    for (std::size_t f = 0; f < nf; ++f)
        for (int c = 0; c < 3; ++c) {
            auto [it, ins] = edge_sum.emplace(key(F[f][c], F[f][(c + 1) % 3]), Vec3::Zero());
            it->second += N[f];
        }
    edge_normals_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f)
        for (int c = 0; c < 3; ++c)
            edge_normals_[f][c] = edge_sum[key(F[f][c], F[f][(c + 1) % 3])];

    face_boxes_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        Eigen::AlignedBox3d box;
        for (int c = 0; c < 3; ++c)
            box.extend(V[F[f][c]]);
        face_boxes_[f] = box;
    }
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * nf);
    build(0, static_cast<int>(nf));
}

int MeshDistance::build(int begin, int end)
{
    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d centers;
    for (int i = begin; i < end; ++i) {
        box.extend(face_boxes_[order_[i]]);
        centers.extend(face_boxes_[order_[i]].center());
    }
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= 4)
        return id;

    int axis = 0;
    centers.diagonal().maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        double ca = face_boxes_[a].center()[axis];
        double cb = face_boxes_[b].center()[axis];
        return ca < cb || (ca == cb && a < b);
    });
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void MeshDistance::query(int node, const Vec3& q, ClosestPoint& best, double& best_d2) const
{
    const Node& n = nodes_[node];
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int f = order_[i];
            Vec3 bary;
            Feature feat;
            int fi;
            Vec3 p = closest_point_on_triangle(q, mesh_->triangle_vertex(f, 0), mesh_->triangle_vertex(f, 1),
                                               mesh_->triangle_vertex(f, 2), bary, feat, fi);
            double d2 = (q - p).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && static_cast<std::size_t>(f) < best.face)) {
                best_d2 = d2;
                best.point = p;
                best.face = f;
                best.barycentric = bary;
                best.feature = feat;
                best.feature_index = fi;
            }
        }
        return;
    }
    double dl = nodes_[n.left].box.squaredExteriorDistance(q);
    double dr = nodes_[n.right].box.squaredExteriorDistance(q);
    int first = n.left, second = n.right;
    if (dr < dl) {
        std::swap(first, second);
        std::swap(dl, dr);
    }
    if (dl <= best_d2)
        query(first, q, best, best_d2);
    if (dr <= best_d2)
        query(second, q, best, best_d2);
}

ClosestPoint MeshDistance::closest(const Vec3& q) const
{
    ClosestPoint best;
    best.face = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    query(0, q, best, best_d2);

    best.distance = std::sqrt(best_d2);
    const auto& tri = mesh_->triangles()[best.face];
    switch (best.feature) {
    case Feature::Face:
        best.sign_normal = mesh_->face_normals()[best.face];
        break;
    case Feature::Edge:
        best.sign_normal = edge_normals_[best.face][best.feature_index];
        break;
    case Feature::Vertex:
        best.sign_normal = vertex_normals_[tri[best.feature_index]];
        break;
    }
    best.sign_normal.normalize();
    const double side = (q - best.point).dot(best.sign_normal);
    best.signed_distance = side < 0 ? -best.distance : best.distance;
    return best;
}

Vec3 MeshDistance::sdf_gradient(const Vec3& q, const ClosestPoint& cp) const
{
    if (cp.distance > 1e-12) {
        Vec3 g = (q - cp.point) / cp.distance;
        return cp.signed_distance < 0 ? Vec3(-g) : g;
    }
    return cp.sign_normal;
}

Vec3 MeshDistance::smooth_normal(const ClosestPoint& cp) const
{
    Vec3 n = Vec3::Zero();
    for (int c = 0; c < 3; ++c)
        n += cp.barycentric[c] * mesh_->corner_normal(cp.face, c);
    double len = n.norm();
    return len > 1e-12 ? Vec3(n / len) : mesh_->face_normals()[cp.face];
}

SurfaceJacobian MeshDistance::surface_jacobian(const ClosestPoint& cp) const
{
    SurfaceJacobian J;
    J.point = cp.point;
    J.dpoint.setZero();
    J.dnormal.setZero();

    const std::size_t f = cp.face;
    Vec3 n_raw = Vec3::Zero();
    for (int c = 0; c < 3; ++c)
        n_raw += cp.barycentric[c] * mesh_->corner_normal(f, c);
    const double len = n_raw.norm();
    J.normal = len > 1e-12 ? Vec3(n_raw / len) : mesh_->face_normals()[f];

    Mat3 dn_raw = Mat3::Zero();
    if (cp.feature == Feature::Face) {
        const Vec3& nf = mesh_->face_normals()[f];
        J.dpoint = Mat3::Identity() - nf * nf.transpose();
        Eigen::Matrix<double, 3, 2> E;
        E.col(0) = mesh_->triangle_vertex(f, 1) - mesh_->triangle_vertex(f, 0);
        E.col(1) = mesh_->triangle_vertex(f, 2) - mesh_->triangle_vertex(f, 0);
        Eigen::Matrix<double, 2, 3> duv = (E.transpose() * E).inverse() * E.transpose();
        Eigen::Matrix<double, 3, 2> dN;
        dN.col(0) = mesh_->corner_normal(f, 1) - mesh_->corner_normal(f, 0);
        dN.col(1) = mesh_->corner_normal(f, 2) - mesh_->corner_normal(f, 0);
        dn_raw = dN * duv * J.dpoint;
    } else if (cp.feature == Feature::Edge) {
        const int i = cp.feature_index;
        const int j = (i + 1) % 3;
        const Vec3 e = mesh_->triangle_vertex(f, j) - mesh_->triangle_vertex(f, i);
        const Eigen::RowVector3d ds = e.transpose() / e.squaredNorm();
        J.dpoint = e * ds;
        dn_raw = (mesh_->corner_normal(f, j) - mesh_->corner_normal(f, i)) * ds;
    }
    if (len > 1e-12)
        J.dnormal = (Mat3::Identity() - J.normal * J.normal.transpose()) * dn_raw / len;
    return J;
}

double signed_distance(const MeshDistance& sdf, const Vec3& point)
{
    return sdf.signed_distance(point);
}

} // namespace bidex
