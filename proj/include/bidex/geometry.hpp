#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bidex {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class GeometryError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Closed, consistently oriented triangle mesh with outward face normals.
///
/// Construction validates index ranges and rejects zero-area faces.
/// Closedness is checked separately (is_closed) because intermediate meshes,
/// e.g. test patches, are allowed to be open; load_mesh rejects open input.
class TriangleMesh
{
public:
    TriangleMesh() = default;
    TriangleMesh(std::vector<Vec3> vertices, std::vector<Eigen::Vector3i> triangles);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Eigen::Vector3i>& triangles() const { return triangles_; }
    const std::vector<Vec3>& face_normals() const { return face_normals_; }
    std::size_t num_faces() const { return triangles_.size(); }

    /// Crease-aware per-corner normal (face f, corner c in 0..2): angle-weighted
    /// average of the normals of faces around that vertex that lie within the
    /// crease angle of face f. Interpolating these gives a continuous normal on
    /// smooth parts and keeps flat faces flat.
    const Vec3& corner_normal(std::size_t f, int c) const { return corner_normals_[3 * f + c]; }

    Vec3 triangle_vertex(std::size_t f, int c) const { return vertices_[triangles_[f][c]]; }
    double face_area(std::size_t f) const;
    double surface_area() const;

    /// Every undirected edge shared by exactly two faces with opposite orientation.
    bool is_closed() const;

    /// Signed enclosed volume (positive when normals point outward).
    double signed_volume() const;
    /// Volume centroid; falls back to the area centroid for (near) zero volume.
    Vec3 centroid() const;

    Eigen::AlignedBox3d bounds() const;
    double bbox_diagonal() const { return bounds().diagonal().norm(); }

    TriangleMesh scaled(double factor) const;
    TriangleMesh transformed(const Eigen::Isometry3d& T) const;
    TriangleMesh flipped() const;

private:
    void compute_normals();

    std::vector<Vec3> vertices_;
    std::vector<Eigen::Vector3i> triangles_;
    std::vector<Vec3> face_normals_;
    std::vector<Vec3> corner_normals_;
};

/// Crease threshold used for corner normals (radians).
inline constexpr double kCreaseAngle = 35.0 * M_PI / 180.0;

struct SurfaceSamples
{
    std::vector<Vec3> points;
    std::vector<Vec3> normals; // outward, unit
    std::vector<std::size_t> faces;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
};

struct Region
{
    std::size_t anchor = 0;
    std::vector<std::size_t> members; // sorted by distance to the anchor, anchor first
    Vec3 mean_position = Vec3::Zero();
    Vec3 mean_normal = Vec3::UnitZ();
};

// Mesh I/O. OBJ (v/f, polygons fan-triangulated) and STL (ascii or binary).
TriangleMesh read_mesh_file(const std::filesystem::path& path);
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Reads a mesh, rejects open or degenerate input and reorients it so the
/// enclosed volume is positive.
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Area-weighted surface sampling; the k-th sample depends only on (seed, k).
SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n_points, std::uint64_t seed);

/// load_mesh, multiply coordinates by `scale` (meters per model unit), sample.
std::pair<TriangleMesh, SurfaceSamples> load_and_sample(const std::filesystem::path& path, double scale,
                                                        std::size_t n_points, std::uint64_t seed);

/// Scale factor that makes the mesh bounding-box diagonal equal `size` meters.
double scale_for_size(const TriangleMesh& mesh, double size);

std::vector<std::size_t> farthest_point_sample(const std::vector<Vec3>& points, std::size_t count,
                                               std::size_t start_index = 0);
inline std::vector<std::size_t> farthest_point_sample(const SurfaceSamples& samples, std::size_t count,
                                                      std::size_t start_index = 0)
{
    return farthest_point_sample(samples.points, count, start_index);
}

Region region_of(const SurfaceSamples& samples, std::size_t anchor, double radius, std::size_t k_max);

/// Mean signed height of the region members above the anchor tangent plane
/// (outward normal). Positive means the patch bends toward the outside, i.e. concave.
double concavity_score(const Region& region, const SurfaceSamples& samples);

/// Convex hull of a point set. Throws GeometryError for coplanar input.
TriangleMesh convex_hull(const std::vector<Vec3>& points);

/// Convex hull with every vertex pushed out along its angle-weighted normal so
/// that each incident face plane moves by at least `offset`, then re-hulled.
TriangleMesh dilated_convex_hull(const std::vector<Vec3>& points, double offset);
inline TriangleMesh dilated_convex_hull(const SurfaceSamples& samples, double offset)
{
    return dilated_convex_hull(samples.points, offset);
}

// Primitive meshes, closed and outward oriented. Used for fixtures and tests.
TriangleMesh make_uv_sphere(double radius, int segments = 48, int rings = 24);
TriangleMesh make_icosphere(double radius, int subdivisions = 3);
TriangleMesh make_box(const Vec3& extents);
TriangleMesh make_cylinder(double radius, double height, int segments = 48);

} // namespace bidex
