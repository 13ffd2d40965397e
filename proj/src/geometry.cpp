#include "bidex/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "bidex/rng.hpp"

namespace bidex {

namespace {

std::uint64_t edge_key(int a, int b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

double corner_angle(const Vec3& at, const Vec3& p, const Vec3& q)
{
    Vec3 u = p - at;
    Vec3 v = q - at;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

} // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Eigen::Vector3i> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles))
{
    const int nv = static_cast<int>(vertices_.size());
    for (const auto& t : triangles_)
        for (int c = 0; c < 3; ++c)
            if (t[c] < 0 || t[c] >= nv)
                throw GeometryError("triangle index out of range");
    compute_normals();
}

void TriangleMesh::compute_normals()
{
    face_normals_.resize(triangles_.size());
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
        const auto& t = triangles_[f];
        Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
        double len = n.norm();
        if (!(len > 1e-24))
            throw GeometryError("degenerate (zero-area) triangle " + std::to_string(f));
        face_normals_[f] = n / len;
    }

    std::vector<std::vector<std::size_t>> incident(vertices_.size());
    for (std::size_t f = 0; f < triangles_.size(); ++f)
        for (int c = 0; c < 3; ++c)
            incident[triangles_[f][c]].push_back(f);

    const double cos_crease = std::cos(kCreaseAngle);
    corner_normals_.assign(3 * triangles_.size(), Vec3::Zero());
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int v = triangles_[f][c];
            Vec3 acc = Vec3::Zero();
            for (std::size_t g : incident[v]) {
                if (face_normals_[g].dot(face_normals_[f]) < cos_crease)
                    continue;
                const auto& tg = triangles_[g];
                int k = tg[0] == v ? 0 : (tg[1] == v ? 1 : 2);
                double w = corner_angle(vertices_[v], vertices_[tg[(k + 1) % 3]], vertices_[tg[(k + 2) % 3]]);
                acc += w * face_normals_[g];
            }
            double len = acc.norm();
            corner_normals_[3 * f + c] = len > 0 ? Vec3(acc / len) : face_normals_[f];
        }
    }
}

double TriangleMesh::face_area(std::size_t f) const
{
    const auto& t = triangles_[f];
    return 0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
}

double TriangleMesh::surface_area() const
{
    double a = 0.0;
    for (std::size_t f = 0; f < triangles_.size(); ++f)
        a += face_area(f);
    return a;
}

bool TriangleMesh::is_closed() const
{
    if (triangles_.empty())
        return false;
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(triangles_.size() * 3);
    for (const auto& t : triangles_)
        for (int c = 0; c < 3; ++c)
            if (++directed[edge_key(t[c], t[(c + 1) % 3])] > 1)
                return false;
    for (const auto& [key, count] : directed) {
        int a = static_cast<int>(key >> 32);
        int b = static_cast<int>(key & 0xffffffffu);
        if (!directed.count(edge_key(b, a)))
            return false;
    }
    return true;
}

double TriangleMesh::signed_volume() const
{
    double v = 0.0;
    for (const auto& t : triangles_)
        v += vertices_[t[0]].dot(vertices_[t[1]].cross(vertices_[t[2]]));
    return v / 6.0;
}

Vec3 TriangleMesh::centroid() const
{
    double vol = 0.0;
    Vec3 acc = Vec3::Zero();
    for (const auto& t : triangles_) {
        const Vec3& a = vertices_[t[0]];
        const Vec3& b = vertices_[t[1]];
        const Vec3& c = vertices_[t[2]];
        double tv = a.dot(b.cross(c)) / 6.0;
        vol += tv;
        acc += tv * (a + b + c) / 4.0;
    }
    if (std::abs(vol) > 1e-15)
        return acc / vol;

    double area = 0.0;
    acc.setZero();
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
        double a = face_area(f);
        area += a;
        acc += a * (triangle_vertex(f, 0) + triangle_vertex(f, 1) + triangle_vertex(f, 2)) / 3.0;
    }
    return area > 0 ? Vec3(acc / area) : Vec3::Zero();
}

Eigen::AlignedBox3d TriangleMesh::bounds() const
{
    Eigen::AlignedBox3d box;
    for (const auto& v : vertices_)
        box.extend(v);
    return box;
}

TriangleMesh TriangleMesh::scaled(double factor) const
{
    std::vector<Vec3> v = vertices_;
    for (auto& p : v)
        p *= factor;
    return TriangleMesh(std::move(v), triangles_);
}

TriangleMesh TriangleMesh::transformed(const Eigen::Isometry3d& T) const
{
    std::vector<Vec3> v = vertices_;
    for (auto& p : v)
        p = T * p;
    return TriangleMesh(std::move(v), triangles_);
}

TriangleMesh TriangleMesh::flipped() const
{
    std::vector<Eigen::Vector3i> t = triangles_;
    for (auto& tri : t)
        std::swap(tri[1], tri[2]);
    return TriangleMesh(vertices_, std::move(t));
}

// ---------------------------------------------------------------------------
// I/O

namespace {

struct VertexWelder
{
    std::map<std::array<double, 3>, int> index;
    std::vector<Vec3> vertices;

    int add(const Vec3& p)
    {
        std::array<double, 3> key{p.x(), p.y(), p.z()};
        auto [it, inserted] = index.emplace(key, static_cast<int>(vertices.size()));
        if (inserted)
            vertices.push_back(p);
        return it->second;
    }
};

std::pair<std::vector<Vec3>, std::vector<Eigen::Vector3i>> read_obj(std::istream& in)
{
    std::vector<Vec3> vertices;
    std::vector<Eigen::Vector3i> triangles;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag))
            continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z()))
                throw GeometryError("OBJ line " + std::to_string(line_no) + ": bad vertex");
            vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                int idx = 0;
                try {
                    idx = std::stoi(tok.substr(0, tok.find('/')));
                } catch (const std::exception&) {
                    throw GeometryError("OBJ line " + std::to_string(line_no) + ": bad face index");
                }
                if (idx < 0)
                    idx = static_cast<int>(vertices.size()) + idx;
                else
                    idx -= 1;
                poly.push_back(idx);
            }
            if (poly.size() < 3)
                throw GeometryError("OBJ line " + std::to_string(line_no) + ": face with < 3 vertices");
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                triangles.emplace_back(poly[0], poly[k], poly[k + 1]);
        }
    }
    return {std::move(vertices), std::move(triangles)};
}

std::pair<std::vector<Vec3>, std::vector<Eigen::Vector3i>> read_stl(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    VertexWelder welder;
    std::vector<Eigen::Vector3i> triangles;

    bool binary = false;
    if (data.size() >= 84) {
        std::uint32_t n = 0;
        std::memcpy(&n, data.data() + 80, 4);
        binary = data.size() == 84 + 50ull * n;
    }
    if (binary) {
        std::uint32_t n = 0;
        std::memcpy(&n, data.data() + 80, 4);
        for (std::uint32_t f = 0; f < n; ++f) {
            const char* rec = data.data() + 84 + 50ull * f;
            Eigen::Vector3i tri;
            for (int c = 0; c < 3; ++c) {
                float xyz[3];
                std::memcpy(xyz, rec + 12 + 12 * c, 12);
                tri[c] = welder.add(Vec3(xyz[0], xyz[1], xyz[2]));
            }
            triangles.push_back(tri);
        }
    } else {
        std::istringstream ss(data);
        std::string tok;
        std::vector<int> face;
        while (ss >> tok) {
            if (tok != "vertex")
                continue;
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z()))
                throw GeometryError("STL: bad vertex record");
            face.push_back(welder.add(p));
            if (face.size() == 3) {
                triangles.emplace_back(face[0], face[1], face[2]);
                face.clear();
            }
        }
    }
    return {std::move(welder.vertices), std::move(triangles)};
}

} // namespace

TriangleMesh read_mesh_file(const std::filesystem::path& path)
{
    std::ifstream probe(path);
    if (!probe)
        throw GeometryError("cannot read mesh file: " + path.string());

    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });

    std::pair<std::vector<Vec3>, std::vector<Eigen::Vector3i>> raw;
    if (ext == ".obj")
        raw = read_obj(probe);
    else if (ext == ".stl")
        raw = read_stl(path);
    else
        throw GeometryError("unsupported mesh format: " + path.string());

    if (raw.second.empty())
        throw GeometryError("mesh has no triangles: " + path.string());
    return TriangleMesh(std::move(raw.first), std::move(raw.second));
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw GeometryError("cannot write " + path.string());
    out.precision(17);
    for (const auto& v : mesh.vertices())
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles())
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

TriangleMesh load_mesh(const std::filesystem::path& path)
{
    TriangleMesh mesh = read_mesh_file(path);
    if (!(mesh.surface_area() > 0))
        throw GeometryError("degenerate mesh (zero area): " + path.string());
    if (!mesh.is_closed())
        throw GeometryError("mesh is not closed: " + path.string());
    if (mesh.signed_volume() < 0)
        mesh = mesh.flipped();
    return mesh;
}

// ---------------------------------------------------------------------------
// Sampling and point-set operations

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n_points, std::uint64_t seed)
{
    if (n_points < 1)
        throw std::invalid_argument("n_points must be >= 1");
    std::vector<double> cumulative(mesh.num_faces());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        total += mesh.face_area(f);
        cumulative[f] = total;
    }
    if (!(total > 0))
        throw GeometryError("cannot sample a zero-area mesh");

    SurfaceSamples s;
    s.seed = seed;
    s.points.resize(n_points);
    s.normals.resize(n_points);
    s.faces.resize(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        CounterRng rng(hash_seed({seed, k}));
        double pick = rng.uniform() * total;
        std::size_t f = std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
        f = std::min(f, mesh.num_faces() - 1);
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        Vec3 bary(1.0 - r1, r1 * (1.0 - r2), r1 * r2);

        Vec3 p = Vec3::Zero();
        Vec3 n = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            p += bary[c] * mesh.triangle_vertex(f, c);
            n += bary[c] * mesh.corner_normal(f, c);
        }
        s.points[k] = p;
        s.normals[k] = n.norm() > 1e-12 ? Vec3(n.normalized()) : mesh.face_normals()[f];
        s.faces[k] = f;
    }
    return s;
}

double scale_for_size(const TriangleMesh& mesh, double size)
{
    if (!(size > 0))
        throw std::invalid_argument("object size must be positive");
    double diag = mesh.bbox_diagonal();
    if (!(diag > 0))
        throw GeometryError("mesh has an empty bounding box");
    return size / diag;
}

std::pair<TriangleMesh, SurfaceSamples> load_and_sample(const std::filesystem::path& path, double scale,
                                                        std::size_t n_points, std::uint64_t seed)
{
    if (!(scale > 0))
        throw std::invalid_argument("scale must be positive");
    TriangleMesh mesh = load_mesh(path).scaled(scale);
    SurfaceSamples samples = sample_surface(mesh, n_points, seed);
    return {std::move(mesh), std::move(samples)};
}

std::vector<std::size_t> farthest_point_sample(const std::vector<Vec3>& points, std::size_t count,
                                               std::size_t start_index)
{
    if (count > points.size())
        throw std::invalid_argument("farthest_point_sample: count exceeds number of points");
    if (count == 0)
        return {};
    if (start_index >= points.size())
        throw std::out_of_range("farthest_point_sample: start index out of range");

    std::vector<std::size_t> picked{start_index};
    picked.reserve(count);
    std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
    std::size_t last = start_index;
    while (picked.size() < count) {
        std::size_t best = 0;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            min_d2[i] = std::min(min_d2[i], (points[i] - points[last]).squaredNorm());
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        picked.push_back(best);
        last = best;
    }
    return picked;
}

Region region_of(const SurfaceSamples& samples, std::size_t anchor, double radius, std::size_t k_max)
{
    if (anchor >= samples.size())
        throw std::out_of_range("region_of: anchor index out of range");
    if (!(radius > 0))
        throw std::invalid_argument("region_of: radius must be positive");

    const Vec3& a = samples.points[anchor];
    const double r2 = radius * radius;
    std::vector<std::pair<double, std::size_t>> near;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double d2 = (samples.points[i] - a).squaredNorm();
        if (d2 <= r2)
            near.emplace_back(i == anchor ? -1.0 : d2, i);
    }
    std::sort(near.begin(), near.end());
    if (near.size() > k_max)
        near.resize(std::max<std::size_t>(k_max, 1));

    Region region;
    region.anchor = anchor;
    Vec3 pos = Vec3::Zero();
    Vec3 nrm = Vec3::Zero();
    for (const auto& [d2, i] : near) {
        region.members.push_back(i);
        pos += samples.points[i];
        nrm += samples.normals[i];
    }
    region.mean_position = pos / static_cast<double>(near.size());
    region.mean_normal = nrm.norm() > 1e-12 ? Vec3(nrm.normalized()) : samples.normals[anchor];
    return region;
}

double concavity_score(const Region& region, const SurfaceSamples& samples)
{
    if (region.members.empty())
        throw std::invalid_argument("concavity_score: empty region");
    const Vec3& pa = samples.points[region.anchor];
    const Vec3& na = samples.normals[region.anchor];
    double acc = 0.0;
    for (std::size_t i : region.members)
        acc += (samples.points[i] - pa).dot(na);
    return acc / static_cast<double>(region.members.size());
}

// ---------------------------------------------------------------------------
// Convex hull (incremental, horizon based)

namespace {

struct HullBuilder
{
    struct Face
    {
        std::array<int, 3> v;
        Vec3 n;
        double d;
        bool alive;
    };

    const std::vector<Vec3>& pts;
    double eps;
    std::vector<Face> faces;
    std::vector<int> alive_ids;
    std::unordered_map<std::uint64_t, int> edges; // directed edge -> face
    std::size_t dead = 0;

    HullBuilder(const std::vector<Vec3>& p, double e) : pts(p), eps(e) {}

    double height(const Face& f, const Vec3& p) const { return f.n.dot(p) - f.d; }

    int add_face(int a, int b, int c)
    {
        Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        double len = n.norm();
        Face f{{a, b, c}, len > 0 ? Vec3(n / len) : Vec3::Zero(), 0.0, true};
        f.d = f.n.dot(pts[a]);
        int id = static_cast<int>(faces.size());
        faces.push_back(f);
        alive_ids.push_back(id);
        edges[edge_key(a, b)] = id;
        edges[edge_key(b, c)] = id;
        edges[edge_key(c, a)] = id;
        return id;
    }

    void kill(int id)
    {
        Face& f = faces[id];
        f.alive = false;
        ++dead;
        for (int c = 0; c < 3; ++c) {
            auto it = edges.find(edge_key(f.v[c], f.v[(c + 1) % 3]));
            if (it != edges.end() && it->second == id)
                edges.erase(it);
        }
    }

    void compact()
    {
        std::vector<int> keep;
        keep.reserve(alive_ids.size());
        for (int id : alive_ids)
            if (faces[id].alive)
                keep.push_back(id);
        alive_ids.swap(keep);
        dead = 0;
    }

    void insert(int p)
    {
        const Vec3& q = pts[p];
        int seed = -1;
        double best = eps;
        for (int id : alive_ids) {
            if (!faces[id].alive)
                continue;
            double h = height(faces[id], q);
            if (h > best) {
                best = h;
                seed = id;
            }
        }
        if (seed < 0)
            return;

        std::vector<int> visible{seed};
        std::vector<char> mark(faces.size(), 0);
        mark[seed] = 1;
        std::vector<std::pair<int, int>> horizon;
        for (std::size_t k = 0; k < visible.size(); ++k) {
            const Face& f = faces[visible[k]];
            for (int c = 0; c < 3; ++c) {
                int a = f.v[c];
                int b = f.v[(c + 1) % 3];
                auto it = edges.find(edge_key(b, a));
                if (it == edges.end())
                    continue;
                int nb = it->second;
                if (mark[nb])
                    continue;
                if (height(faces[nb], q) > eps) {
                    mark[nb] = 1;
                    visible.push_back(nb);
                }
            }
        }
        for (int id : visible) {
            const Face& f = faces[id];
            for (int c = 0; c < 3; ++c) {
                int a = f.v[c];
                int b = f.v[(c + 1) % 3];
                auto it = edges.find(edge_key(b, a));
                if (it != edges.end() && !mark[it->second])
                    horizon.emplace_back(a, b);
            }
        }
        for (int id : visible)
            kill(id);
        for (auto [a, b] : horizon)
            add_face(a, b, p);
        if (dead > alive_ids.size() / 2)
            compact();
    }
};

} // namespace

TriangleMesh convex_hull(const std::vector<Vec3>& points)
{
    if (points.size() < 4)
        throw GeometryError("convex hull needs at least 4 points");

    Eigen::AlignedBox3d box;
    for (const auto& p : points)
        box.extend(p);
    const double extent = std::max(box.diagonal().norm(), 1e-300);
    const double eps = 1e-10 * extent;

    // Initial tetrahedron from extreme points.
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].x() < points[i0].x())
            i0 = i;
    std::size_t i1 = i0;
    double best = -1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = (points[i] - points[i0]).squaredNorm();
        if (d > best) {
            best = d;
            i1 = i;
        }
    }
    Vec3 axis = points[i1] - points[i0];
    if (axis.norm() <= eps)
        throw GeometryError("convex hull: coincident input points");
    axis.normalize();
    std::size_t i2 = i0;
    best = -1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = (points[i] - points[i0]).cross(axis).norm();
        if (d > best) {
            best = d;
            i2 = i;
        }
    }
    if (best <= eps)
        throw GeometryError("convex hull: collinear input points");
    Vec3 nrm = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
    std::size_t i3 = i0;
    best = -1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = std::abs((points[i] - points[i0]).dot(nrm));
        if (d > best) {
            best = d;
            i3 = i;
        }
    }
    if (best <= eps)
        throw GeometryError("convex hull: coplanar input points");

    HullBuilder hb(points, eps);
    const int t[4] = {static_cast<int>(i0), static_cast<int>(i1), static_cast<int>(i2), static_cast<int>(i3)};
    const int tet[4][4] = {{0, 1, 2, 3}, {0, 3, 1, 2}, {1, 3, 2, 0}, {0, 2, 3, 1}};
    for (const auto& f : tet) {
        int a = t[f[0]], b = t[f[1]], c = t[f[2]];
        Vec3 n = (points[b] - points[a]).cross(points[c] - points[a]);
        if (n.dot(points[t[f[3]]] - points[a]) > 0)
            std::swap(b, c);
        hb.add_face(a, b, c);
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3)
            continue;
        hb.insert(static_cast<int>(i));
    }

    std::vector<int> remap(points.size(), -1);
    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> tris;
    for (const auto& f : hb.faces) {
        if (!f.alive)
            continue;
        Eigen::Vector3i tri;
        for (int c = 0; c < 3; ++c) {
            int& r = remap[f.v[c]];
            if (r < 0) {
                r = static_cast<int>(verts.size());
                verts.push_back(points[f.v[c]]);
            }
            tri[c] = r;
        }
        tris.push_back(tri);
    }
    return TriangleMesh(std::move(verts), std::move(tris));
}

TriangleMesh dilated_convex_hull(const std::vector<Vec3>& points, double offset)
{
    if (offset < 0)
        throw std::invalid_argument("dilated_convex_hull: offset must be >= 0");
    TriangleMesh hull = convex_hull(points);
    if (offset == 0)
        return hull;

    const auto& V = hull.vertices();
    const auto& F = hull.triangles();
    const auto& N = hull.face_normals();
    std::vector<Vec3> normal(V.size(), Vec3::Zero());
    std::vector<double> min_dot(V.size(), 1.0);
    for (std::size_t f = 0; f < F.size(); ++f)
        for (int c = 0; c < 3; ++c) {
            int v = F[f][c];
            normal[v] += corner_angle(V[v], V[F[f][(c + 1) % 3]], V[F[f][(c + 2) % 3]]) * N[f];
        }
    for (auto& n : normal)
        n.normalize();
    for (std::size_t f = 0; f < F.size(); ++f)
        for (int c = 0; c < 3; ++c) {
            int v = F[f][c];
            min_dot[v] = std::min(min_dot[v], normal[v].dot(N[f]));
        }

    // Each incident face plane advances by offset; very sharp vertices are capped at 4x.
    std::vector<Vec3> moved(V.size());
    for (std::size_t v = 0; v < V.size(); ++v)
        moved[v] = V[v] + offset / std::max(min_dot[v], 0.25) * normal[v];
    return convex_hull(moved);
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

TriangleMesh oriented(std::vector<Vec3> v, std::vector<Eigen::Vector3i> t)
{
    TriangleMesh m(std::move(v), std::move(t));
    return m.signed_volume() < 0 ? m.flipped() : m;
}

} // namespace

TriangleMesh make_uv_sphere(double radius, int segments, int rings)
{
    std::vector<Vec3> v;
    std::vector<Eigen::Vector3i> t;
    v.emplace_back(0, 0, radius);
    for (int i = 1; i < rings; ++i) {
        double th = M_PI * i / rings;
        for (int j = 0; j < segments; ++j) {
            double ph = 2.0 * M_PI * j / segments;
            v.emplace_back(radius * std::sin(th) * std::cos(ph), radius * std::sin(th) * std::sin(ph),
                           radius * std::cos(th));
        }
    }
    v.emplace_back(0, 0, -radius);
    const int south = static_cast<int>(v.size()) - 1;
    auto idx = [&](int ring, int seg) { return 1 + (ring - 1) * segments + (seg % segments); };
    for (int j = 0; j < segments; ++j)
        t.emplace_back(0, idx(1, j), idx(1, j + 1));
    for (int i = 1; i + 1 < rings; ++i)
        for (int j = 0; j < segments; ++j) {
            t.emplace_back(idx(i, j), idx(i + 1, j), idx(i + 1, j + 1));
            t.emplace_back(idx(i, j), idx(i + 1, j + 1), idx(i, j + 1));
        }
    for (int j = 0; j < segments; ++j)
        t.emplace_back(south, idx(rings - 1, j + 1), idx(rings - 1, j));
    return oriented(std::move(v), std::move(t));
}

TriangleMesh make_icosphere(double radius, int subdivisions)
{
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                           {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
    for (auto& p : v)
        p.normalize();
    std::vector<Eigen::Vector3i> t = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            v.push_back((v[a] + v[b]).normalized());
            int id = static_cast<int>(v.size()) - 1;
            mid[key] = id;
            return id;
        };
        std::vector<Eigen::Vector3i> next;
        for (const auto& tri : t) {
            int a = midpoint(tri[0], tri[1]);
            int b = midpoint(tri[1], tri[2]);
            int c = midpoint(tri[2], tri[0]);
            next.emplace_back(tri[0], a, c);
            next.emplace_back(tri[1], b, a);
            next.emplace_back(tri[2], c, b);
            next.emplace_back(a, b, c);
        }
        t.swap(next);
    }
    for (auto& p : v)
        p *= radius;
    return oriented(std::move(v), std::move(t));
}

TriangleMesh make_box(const Vec3& extents)
{
    Vec3 h = extents / 2.0;
    std::vector<Vec3> v;
    for (int i = 0; i < 8; ++i)
        v.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    std::vector<Eigen::Vector3i> t = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                      {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return oriented(std::move(v), std::move(t));
}

TriangleMesh make_cylinder(double radius, double height, int segments)
{
    std::vector<Vec3> v;
    std::vector<Eigen::Vector3i> t;
    const double h = height / 2.0;
    for (int j = 0; j < segments; ++j) {
        double ph = 2.0 * M_PI * j / segments;
        v.emplace_back(radius * std::cos(ph), radius * std::sin(ph), -h);
        v.emplace_back(radius * std::cos(ph), radius * std::sin(ph), h);
    }
    v.emplace_back(0, 0, -h);
    v.emplace_back(0, 0, h);
    const int bot = 2 * segments;
    const int top = bot + 1;
    for (int j = 0; j < segments; ++j) {
        int a0 = 2 * j, a1 = 2 * j + 1;
        int b0 = 2 * ((j + 1) % segments), b1 = b0 + 1;
        t.emplace_back(a0, b0, b1);
        t.emplace_back(a0, b1, a1);
        t.emplace_back(bot, b0, a0);
        t.emplace_back(top, a1, b1);
    }
    return oriented(std::move(v), std::move(t));
}

} // namespace bidex
