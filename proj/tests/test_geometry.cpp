#include <doctest.h>

#include <fstream>

#include "bidex/geometry.hpp"
#include "bidex/mesh_distance.hpp"
#include "bidex/rng.hpp"
#include "test_support.hpp"

using namespace bidex;
using testsupport::temp_path;

namespace {

std::filesystem::path write_unit_cube()
{
    auto path = temp_path("unit_cube.obj");
    std::ofstream out(path);
    out << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
           "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
    return path;
}

SurfaceSamples cloud(const std::vector<Vec3>& pts)
{
    SurfaceSamples s;
    s.points = pts;
    s.normals.assign(pts.size(), Vec3::UnitZ());
    s.faces.assign(pts.size(), 0);
    return s;
}

} // namespace

TEST_CASE("load_and_sample rescales the unit cube")
{
    auto [mesh, samples] = load_and_sample(write_unit_cube(), 0.4, 500, 7);
    Eigen::AlignedBox3d box = mesh.bounds();
    CHECK(box.sizes().x() == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(box.sizes().y() == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(box.sizes().z() == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(samples.size() == 500);
    CHECK(mesh.is_closed());
    CHECK(mesh.signed_volume() > 0);
}

TEST_CASE("load_and_sample is deterministic for a fixed seed")
{
    auto path = write_unit_cube();
    auto [m1, s1] = load_and_sample(path, 0.4, 300, 11);
    auto [m2, s2] = load_and_sample(path, 0.4, 300, 11);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1.points[i] == s2.points[i]);
        CHECK(s1.normals[i] == s2.normals[i]);
    }
    auto [m3, s3] = load_and_sample(path, 0.4, 300, 12);
    CHECK(s3.points[0] != s1.points[0]);
}

TEST_CASE("sphere samples carry radial normals and lie on their source faces")
{
    const double r = 0.2;
    TriangleMesh sphere = make_icosphere(r, 4);
    SurfaceSamples s = sample_surface(sphere, 1000, 3);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK((s.points[i] / s.points[i].norm() - s.normals[i]).norm() <= 0.05);
        CHECK(std::abs(s.normals[i].norm() - 1.0) <= 1e-9);
        const auto f = s.faces[i];
        Vec3 q = testsupport::brute_closest_on_triangle(s.points[i], sphere.triangle_vertex(f, 0),
                                                        sphere.triangle_vertex(f, 1), sphere.triangle_vertex(f, 2));
        CHECK((q - s.points[i]).norm() <= 1e-9);
    }
}

TEST_CASE("mesh loading rejects bad input")
{
    CHECK_THROWS_AS(load_mesh(temp_path("does_not_exist.obj")), GeometryError);

    auto open_path = temp_path("open.obj");
    {
        std::ofstream out(open_path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\n";
    }
    CHECK_THROWS_AS(load_mesh(open_path), GeometryError);

    auto degenerate = temp_path("degenerate.obj");
    {
        std::ofstream out(degenerate);
        out << "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\nf 1 4 2\nf 2 4 3\n";
    }
    CHECK_THROWS_AS(load_mesh(degenerate), GeometryError);
}

TEST_CASE("STL and OBJ round trip through the loader")
{
    TriangleMesh box = make_box({0.1, 0.2, 0.3});
    auto path = temp_path("box.obj");
    write_obj(box, path);
    TriangleMesh back = load_mesh(path);
    CHECK(back.num_faces() == box.num_faces());
    CHECK(back.signed_volume() == doctest::Approx(0.006).epsilon(1e-12));

    auto stl = temp_path("box.stl");
    {
        std::ofstream out(stl);
        out << "solid box\n";
        for (std::size_t f = 0; f < box.num_faces(); ++f) {
            out << " facet normal 0 0 0\n  outer loop\n";
            for (int c = 0; c < 3; ++c) {
                Vec3 v = box.triangle_vertex(f, c);
                out << "   vertex " << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
            }
            out << "  endloop\n endfacet\n";
        }
        out << "endsolid box\n";
    }
    TriangleMesh from_stl = load_mesh(stl);
    CHECK(from_stl.is_closed());
    CHECK(from_stl.vertices().size() == 8);
}

TEST_CASE("scaling multiplies sample distances")
{
    TriangleMesh mesh = make_cylinder(0.1, 0.3);
    SurfaceSamples a = sample_surface(mesh, 100, 5);
    SurfaceSamples b = sample_surface(mesh.scaled(2.5), 100, 5);
    for (std::size_t i = 1; i < a.size(); ++i) {
        double da = (a.points[i] - a.points[0]).norm();
        double db = (b.points[i] - b.points[0]).norm();
        CHECK(db == doctest::Approx(2.5 * da).epsilon(1e-9));
    }
}

TEST_CASE("farthest point sampling")
{
    std::vector<Vec3> square = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    auto two = farthest_point_sample(square, 2, 0);
    REQUIRE(two.size() == 2);
    CHECK(two[1] == 3);

    auto all = farthest_point_sample(square, 4, 0);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});

    CHECK_THROWS_AS(farthest_point_sample(square, 5, 0), std::invalid_argument);

    // Greedy max-min property, checked by brute force.
    CounterRng rng(99);
    std::vector<Vec3> pts(500);
    for (auto& p : pts)
        p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    auto sel = farthest_point_sample(pts, 50, 0);
    for (std::size_t k = 1; k < sel.size(); ++k) {
        auto min_dist = [&](std::size_t i) {
            double d = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < k; ++s)
                d = std::min(d, (pts[i] - pts[sel[s]]).norm());
            return d;
        };
        double best = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            best = std::max(best, min_dist(i));
        CHECK(min_dist(sel[k]) == best);
    }
}

TEST_CASE("region_of")
{
    SurfaceSamples s = cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.05, 0, 0}});
    Region isolated = region_of(s, 1, 0.5, 256);
    CHECK(isolated.members == std::vector<std::size_t>{1});

    Region all = region_of(s, 0, 10.0, 256);
    CHECK(all.members.size() == 4);
    CHECK(all.members.front() == 0);
    CHECK(all.members[1] == 3);

    Region capped = region_of(s, 0, 10.0, 2);
    CHECK(capped.members == std::vector<std::size_t>{0, 3});

    CHECK_THROWS(region_of(s, 4, 1.0, 256));

    TriangleMesh sphere = make_icosphere(0.15, 3);
    SurfaceSamples dense = sample_surface(sphere, 4000, 1);
    Region r = region_of(dense, 17, 0.08, 256);
    CHECK(r.members.size() <= 256);
    CHECK(r.members.size() > 50);
    for (auto m : r.members)
        CHECK((dense.points[m] - dense.points[17]).norm() <= 0.08);
    CHECK(std::abs(r.mean_normal.norm() - 1.0) < 1e-9);
}

TEST_CASE("concavity score")
{
    // Planar patch.
    SurfaceSamples plane;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) {
            plane.points.emplace_back(0.01 * i, 0.01 * j, 0.0);
            plane.normals.push_back(Vec3::UnitZ());
            plane.faces.push_back(0);
        }
    Region rp = region_of(plane, 24, 1.0, 256);
    CHECK(concavity_score(rp, plane) == doctest::Approx(0.0));

    TriangleMesh sphere = make_icosphere(0.15, 3);
    SurfaceSamples convex = sample_surface(sphere, 3000, 2);
    CHECK(concavity_score(region_of(convex, 0, 0.08, 256), convex) < 0);

    // Inner face of a hollow spherical shell: normals point toward the center.
    SurfaceSamples bowl = convex;
    for (auto& n : bowl.normals)
        n = -n;
    const double bowl_score = concavity_score(region_of(bowl, 0, 0.08, 256), bowl);
    CHECK(bowl_score > 0.002);
    // Analytic mean height on a sphere cap: members sit r - r cos(theta) above the tangent plane.
    CHECK(bowl_score < 0.08 * 0.08 / (2 * 0.15));
}

TEST_CASE("dilated convex hull")
{
    std::vector<Vec3> corners;
    for (int i = 0; i < 8; ++i)
        corners.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    TriangleMesh hull = dilated_convex_hull(corners, 0.0);
    CHECK(hull.vertices().size() == 8);
    CHECK(hull.signed_volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hull.is_closed());

    std::vector<Vec3> flat = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    CHECK_THROWS_AS(dilated_convex_hull(flat, 0.01), GeometryError);

    const double r = 0.15, delta = 0.02;
    TriangleMesh sphere = make_icosphere(r, 3);
    SurfaceSamples s = sample_surface(sphere, 2000, 4);
    TriangleMesh dilated = dilated_convex_hull(s, delta);
    for (const Vec3& v : dilated.vertices())
        CHECK(v.norm() == doctest::Approx(r + delta).epsilon(0.03));

    // Every original surface point is at least delta inside the dilated hull.
    MeshDistance dist(dilated);
    double worst = std::numeric_limits<double>::infinity();
    for (const Vec3& p : s.points)
        worst = std::min(worst, -dist.signed_distance(p));
    CHECK(worst >= delta - 1e-9);

    // Containment of the undilated hull.
    TriangleMesh base = dilated_convex_hull(s, 0.0);
    for (const Vec3& v : base.vertices())
        CHECK(dist.signed_distance(v) <= 0.0);
}
