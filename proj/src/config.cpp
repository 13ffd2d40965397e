#include "bidex/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bidex {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields
{
public:
    Fields(const json& j, std::string context) : j_(j), context_(std::move(context))
    {
        if (!j.is_object())
            throw ConfigError(context_ + ": expected an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <class T>
    bool get(const char* key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end())
            return false;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(context_ + "." + key + ": " + e.what());
        }
        return true;
    }

    bool get(const char* key, Vec3& out)
    {
        std::vector<double> v;
        if (!get(key, v))
            return false;
        if (v.size() != 3)
            throw ConfigError(context_ + "." + key + ": expected 3 numbers");
        out = Vec3(v[0], v[1], v[2]);
        return true;
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(context_ + ": unknown key '" + it.key() + "'");
    }

private:
    const json& j_;
    std::string context_;
    std::set<std::string> seen_;
};

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

void require(bool ok, const std::string& message)
{
    if (!ok)
        throw ConfigError(message);
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (p.empty() || p.is_absolute() || base.empty())
        return p;
    return base / p;
}

std::string format_number(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

InitParams init_from_json(const json& j)
{
    InitParams p;
    Fields f(j, "init");
    double jitter_deg = p.jitter * 180.0 / M_PI;
    f.get("jitter_deg", jitter_deg);
    p.jitter = jitter_deg * M_PI / 180.0;
    f.get("preclose", p.preclose);
    f.get("finger_length", p.finger_length);
    f.get("proximity", p.proximity);
    f.get("close_steps", p.close_steps);
    f.finish();
    return p;
}

EnergyWeights weights_from_json(const json& j, EnergyWeights w)
{
    Fields f(j, "weights");
    f.get("w_q_left", w.w_q_left);
    f.get("w_q_right", w.w_q_right);
    f.get("w_dis", w.w_dis);
    f.get("w_region", w.w_region);
    f.get("w_col", w.w_col);
    f.get("beta", w.beta);
    f.get("gamma", w.gamma);
    f.get("a", w.a);
    f.get("mu", w.mu);
    f.get("collision_margin", w.collision_margin);
    f.finish();
    return w;
}

OptimConfig optimizer_from_json(const json& j)
{
    OptimConfig c;
    Fields f(j, "optimizer");
    f.get("iterations", c.iterations);
    f.get("step_translation", c.step_translation);
    f.get("step_rotation", c.step_rotation);
    f.get("step_joint", c.step_joint);
    f.get("anneal_at", c.anneal_at);
    f.get("anneal_factor", c.anneal_factor);
    f.get("max_halvings", c.max_halvings);
    f.get("tolerance", c.tolerance);
    f.get("window", c.window);
    f.get("block_normalize", c.block_normalize);
    f.get("polish_rounds", c.polish_rounds);
    f.get("polish_iterations", c.polish_iterations);
    f.get("polish_factor", c.polish_factor);
    f.get("polish_tolerance", c.polish_tolerance);
    f.finish();
    return c;
}

PregraspOptions pregrasp_from_json(const json& j)
{
    PregraspOptions p;
    Fields f(j, "pregrasp");
    f.get("target", p.target);
    f.get("band", p.band);
    f.get("max_retreat", p.max_retreat);
    f.get("flexion_retreat", p.flexion_retreat);
    f.get("bisection_steps", p.bisection_steps);
    f.finish();
    return p;
}

SuccessCriteria success_from_json(const json& j, SuccessCriteria s)
{
    Fields f(j, "success");
    f.get("mu", s.mu);
    f.get("beta", s.beta);
    f.get("gamma", s.gamma);
    f.get("epsilon", s.epsilon);
    f.get("contact_band", s.contact_band);
    f.get("max_pd", s.max_pd);
    f.get("max_spd", s.max_spd);
    f.finish();
    return s;
}

WorkspaceSphere workspace_from_json(const json& j, const std::string& context)
{
    WorkspaceSphere w;
    Fields f(j, context);
    f.get("center", w.center);
    f.get("radius", w.radius);
    f.finish();
    return w;
}

} // namespace

std::string ObjectSpec::source() const
{
    if (!primitive)
        return mesh.generic_string();
    const PrimitiveSpec& p = *primitive;
    std::string s = "primitive:" + p.type;
    if (p.type == "sphere")
        s += ":r=" + format_number(p.radius) + ":s=" + std::to_string(p.subdivisions);
    else if (p.type == "box")
        s += ":e=" + format_number(p.extents.x()) + "," + format_number(p.extents.y()) + "," +
             format_number(p.extents.z());
    else
        s += ":r=" + format_number(p.radius) + ":h=" + format_number(p.height) + ":n=" + std::to_string(p.segments);
    return s;
}

TriangleMesh ObjectSpec::load() const
{
    if (!primitive) {
        if (!std::filesystem::exists(mesh))
            throw IoError("mesh not found: " + mesh.string());
        return load_mesh(mesh);
    }
    const PrimitiveSpec& p = *primitive;
    if (p.type == "sphere")
        return make_icosphere(p.radius, p.subdivisions);
    if (p.type == "box")
        return make_box(p.extents);
    return make_cylinder(p.radius, p.height, p.segments);
}

std::vector<double> ScaleSweep::sizes() const
{
    if (!explicit_sizes.empty())
        return explicit_sizes;
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i)
        out[i] = count == 1 ? min : min + (max - min) * i / (count - 1);
    return out;
}

ObjectSpec object_from_json(const json& j, const std::filesystem::path& base_dir)
{
    ObjectSpec o;
    Fields f(j, "objects[]");
    f.get("id", o.id);
    std::string mesh;
    bool has_mesh = f.get("mesh", mesh);
    const json* prim = f.child("primitive");
    f.finish();
    require(has_mesh != (prim != nullptr), "object '" + o.id + "': exactly one of mesh, primitive is required");
    if (has_mesh) {
        o.mesh = resolve(mesh, base_dir);
        if (o.id.empty())
            o.id = o.mesh.stem().string();
    } else {
        PrimitiveSpec p;
        Fields pf(*prim, "primitive");
        pf.get("type", p.type);
        pf.get("radius", p.radius);
        pf.get("height", p.height);
        pf.get("extents", p.extents);
        pf.get("subdivisions", p.subdivisions);
        pf.get("segments", p.segments);
        pf.finish();
        if (p.type == "sphere")
            require(p.radius > 0.0 && p.subdivisions >= 0 && p.subdivisions <= 7, "sphere: radius > 0, subdivisions 0..7");
        else if (p.type == "box")
            require((p.extents.array() > 0.0).all(), "box: extents must be positive");
        else if (p.type == "cylinder")
            require(p.radius > 0.0 && p.height > 0.0 && p.segments >= 3, "cylinder: radius, height > 0, segments >= 3");
        else
            throw ConfigError("primitive type must be sphere, box or cylinder, got '" + p.type + "'");
        o.primitive = p;
        if (o.id.empty())
            o.id = p.type;
    }
    return o;
}

RegionParams region_params_from_json(const json& j, RegionParams p)
{
    Fields f(j, "regions");
    f.get("num_anchors", p.num_anchors);
    f.get("region_size", p.region_size);
    f.get("radius", p.radius);
    f.get("contacts_per_region", p.contacts_per_region);
    f.get("num_directions", p.num_directions);
    f.get("top_k", p.top_k);
    f.get("min_distance", p.min_distance);
    f.get("concave_threshold", p.concave_threshold);
    f.get("mu", p.mu);
    f.finish();
    return p;
}

EnergyWeights RunConfig::default_weights()
{
    EnergyWeights w;
    w.w_q_left = 100.0;
    w.w_q_right = 100.0;
    w.w_dis = 1e5;
    w.w_region = 50.0;
    w.w_col = 1e5;
    w.beta = 0.1;
    w.gamma = 0.02;
    return w;
}

SuccessCriteria RunConfig::default_success()
{
    EnergyWeights w = default_weights();
    SuccessCriteria s;
    s.mu = w.mu;
    s.beta = w.beta;
    s.gamma = w.gamma;
    return s;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir)
{
    RunConfig c;
    Fields f(j, "config");

    std::string hand;
    if (f.get("hand", hand))
        c.hand = resolve(hand, base_dir);
    if (const json* objects = f.child("objects")) {
        require(objects->is_array(), "objects: expected an array");
        for (const auto& o : *objects)
            c.objects.push_back(object_from_json(o, base_dir));
    }
    if (const json* s = f.child("scales")) {
        Fields sf(*s, "scales");
        sf.get("min", c.scales.min);
        sf.get("max", c.scales.max);
        sf.get("count", c.scales.count);
        sf.get("sizes", c.scales.explicit_sizes);
        sf.finish();
    }
    f.get("tabletop_poses", c.tabletop_poses);
    f.get("surface_samples", c.surface_samples);
    f.get("hull_offset", c.hull_offset);
    f.get("table_height", c.table_height);
    f.get("table_clearance", c.table_clearance);
    if (const json* ws = f.child("workspace")) {
        Fields wf(*ws, "workspace");
        if (const json* l = wf.child("left"))
            c.workspace[0] = workspace_from_json(*l, "workspace.left");
        if (const json* r = wf.child("right"))
            c.workspace[1] = workspace_from_json(*r, "workspace.right");
        wf.finish();
    }
    if (const json* w = f.child("weights"))
        c.weights = weights_from_json(*w, c.weights);
    // mu, beta and gamma follow the energy weights unless overridden.
    c.regions.mu = c.weights.mu;
    c.success.mu = c.weights.mu;
    c.success.beta = c.weights.beta;
    c.success.gamma = c.weights.gamma;
    if (const json* r = f.child("regions"))
        c.regions = region_params_from_json(*r, c.regions);
    if (const json* i = f.child("init"))
        c.init = init_from_json(*i);
    if (const json* o = f.child("optimizer"))
        c.optimizer = optimizer_from_json(*o);
    if (const json* p = f.child("pregrasp"))
        c.pregrasp = pregrasp_from_json(*p);
    if (const json* s = f.child("success"))
        c.success = success_from_json(*s, c.success);
    f.get("candidates_per_pair", c.candidates_per_pair);
    f.get("grasps_per_object", c.grasps_per_object);
    f.get("workers", c.workers);
    f.get("seed", c.seed);
    std::string output;
    if (f.get("output", output))
        c.output = resolve(output, base_dir);
    f.get("record_timings", c.record_timings);
    f.finish();

    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

void RunConfig::validate() const
{
    if (scales.explicit_sizes.empty()) {
        require(scales.min > 0.0 && scales.max >= scales.min, "scales: need 0 < min <= max");
        require(scales.count >= 1, "scales.count must be >= 1");
    } else {
        for (double s : scales.explicit_sizes)
            require(s > 0.0 && std::isfinite(s), "scales.sizes must be positive");
    }
    require(!tabletop_poses.empty(), "tabletop_poses must not be empty");
    for (int p : tabletop_poses)
        require(p >= 0 && p <= 2, "tabletop_poses entries must be 0, 1 or 2");
    require(surface_samples >= 16, "surface_samples must be >= 16");
    require(hull_offset >= 0.0, "hull_offset must be >= 0");
    require(table_clearance >= 0.0, "table_clearance must be >= 0");
    require(candidates_per_pair >= 1, "candidates_per_pair must be >= 1");
    require(grasps_per_object >= 0, "grasps_per_object must be >= 0");
    require(workers >= 1, "workers must be >= 1");
    require(regions.num_anchors >= 2 && regions.region_size >= 1 && regions.contacts_per_region >= 1 &&
                regions.num_directions >= 1 && regions.top_k >= 1,
            "regions: counts must be >= 1 (num_anchors >= 2)");
    require(regions.radius > 0.0 && regions.min_distance >= 0.0, "regions: radius > 0, min_distance >= 0");
    require(weights.beta > 0.0 && weights.gamma >= 0.0 && weights.mu > 0.0 && weights.a > 0.0,
            "weights: beta, mu, a > 0 and gamma >= 0");
    require(weights.w_q_left >= 0.0 && weights.w_q_right >= 0.0 && weights.w_dis >= 0.0 && weights.w_region >= 0.0 &&
                weights.w_col >= 0.0,
            "weights: term weights must be >= 0");
    require(optimizer.iterations >= 0 && optimizer.window >= 1 && optimizer.max_halvings >= 0,
            "optimizer: iterations >= 0, window >= 1, max_halvings >= 0");
    require(optimizer.anneal_factor > 0.0 && optimizer.anneal_factor <= 1.0, "optimizer.anneal_factor must be in (0, 1]");
    require(optimizer.polish_rounds >= 0 && optimizer.polish_factor >= 1.0, "optimizer: polish_rounds >= 0, polish_factor >= 1");
    require(pregrasp.target > 0.0 && pregrasp.band > 0.0 && pregrasp.band < pregrasp.target,
            "pregrasp: 0 < band < target");
    require(success.beta > 0.0 && success.epsilon >= 0.0 && success.contact_band >= 0.0,
            "success: beta > 0, epsilon and contact_band >= 0");
    std::set<std::string> ids;
    for (const auto& o : objects)
        require(ids.insert(o.id).second, "duplicate object id '" + o.id + "'");
}

ordered_json RunConfig::to_json() const
{
    ordered_json j;
    j["hand"] = hand.generic_string();
    ordered_json objs = ordered_json::array();
    for (const auto& o : objects) {
        ordered_json oj;
        oj["id"] = o.id;
        if (o.primitive) {
            const PrimitiveSpec& p = *o.primitive;
            ordered_json pj;
            pj["type"] = p.type;
            if (p.type == "box") {
                pj["extents"] = vec_json(p.extents);
            } else {
                pj["radius"] = p.radius;
                if (p.type == "sphere")
                    pj["subdivisions"] = p.subdivisions;
                else {
                    pj["height"] = p.height;
                    pj["segments"] = p.segments;
                }
            }
            oj["primitive"] = pj;
        } else {
            oj["mesh"] = o.mesh.generic_string();
        }
        objs.push_back(oj);
    }
    j["objects"] = objs;
    if (scales.explicit_sizes.empty())
        j["scales"] = {{"min", scales.min}, {"max", scales.max}, {"count", scales.count}};
    else
        j["scales"] = {{"sizes", scales.explicit_sizes}};
    j["tabletop_poses"] = tabletop_poses;
    j["surface_samples"] = surface_samples;
    j["hull_offset"] = hull_offset;
    j["table_height"] = table_height;
    j["table_clearance"] = table_clearance;
    j["workspace"]["left"] = {{"center", vec_json(workspace[0].center)}, {"radius", workspace[0].radius}};
    j["workspace"]["right"] = {{"center", vec_json(workspace[1].center)}, {"radius", workspace[1].radius}};
    j["regions"] = {{"num_anchors", regions.num_anchors},
                    {"region_size", regions.region_size},
                    {"radius", regions.radius},
                    {"contacts_per_region", regions.contacts_per_region},
                    {"num_directions", regions.num_directions},
                    {"top_k", regions.top_k},
                    {"min_distance", regions.min_distance},
                    {"concave_threshold", regions.concave_threshold},
                    {"mu", regions.mu}};
    j["init"] = {{"jitter_deg", init.jitter * 180.0 / M_PI},
                 {"preclose", init.preclose},
                 {"finger_length", init.finger_length},
                 {"proximity", init.proximity},
                 {"close_steps", init.close_steps}};
    j["weights"] = {{"w_q_left", weights.w_q_left}, {"w_q_right", weights.w_q_right},
                    {"w_dis", weights.w_dis},       {"w_region", weights.w_region},
                    {"w_col", weights.w_col},       {"beta", weights.beta},
                    {"gamma", weights.gamma},       {"a", weights.a},
                    {"mu", weights.mu},             {"collision_margin", weights.collision_margin}};
    j["optimizer"] = {{"iterations", optimizer.iterations},
                      {"step_translation", optimizer.step_translation},
                      {"step_rotation", optimizer.step_rotation},
                      {"step_joint", optimizer.step_joint},
                      {"anneal_at", optimizer.anneal_at},
                      {"anneal_factor", optimizer.anneal_factor},
                      {"max_halvings", optimizer.max_halvings},
                      {"tolerance", optimizer.tolerance},
                      {"window", optimizer.window},
                      {"block_normalize", optimizer.block_normalize},
                      {"polish_rounds", optimizer.polish_rounds},
                      {"polish_iterations", optimizer.polish_iterations},
                      {"polish_factor", optimizer.polish_factor},
                      {"polish_tolerance", optimizer.polish_tolerance}};
    j["pregrasp"] = {{"target", pregrasp.target},
                     {"band", pregrasp.band},
                     {"max_retreat", pregrasp.max_retreat},
                     {"flexion_retreat", pregrasp.flexion_retreat},
                     {"bisection_steps", pregrasp.bisection_steps}};
    j["success"] = {{"mu", success.mu},           {"beta", success.beta},
                    {"gamma", success.gamma},     {"epsilon", success.epsilon},
                    {"contact_band", success.contact_band}, {"max_pd", success.max_pd},
                    {"max_spd", success.max_spd}};
    j["candidates_per_pair"] = candidates_per_pair;
    j["grasps_per_object"] = grasps_per_object;
    j["workers"] = workers;
    j["seed"] = seed;
    j["output"] = output.generic_string();
    j["record_timings"] = record_timings;
    return j;
}

} // namespace bidex
