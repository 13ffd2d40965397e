// Command-line driver: synthesize, evaluate, regions.
// Exit codes: 0 success, 1 configuration error, 2 I/O error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bidex/config.hpp"
#include "bidex/dataset.hpp"
#include "bidex/pipeline.hpp"

namespace {

using namespace bidex;
using nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kIoError = 2;

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

bool write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text << '\n';
        return true;
    }
    std::ofstream out(path);
    out << text << '\n';
    return static_cast<bool>(out);
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

struct SynthesizeArgs
{
    std::string config;
    std::string out;
    std::string summary;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int run_synthesize(const SynthesizeArgs& a)
{
    RunConfig cfg = RunConfig::load(a.config);
    if (!a.out.empty())
        cfg.output = a.out;
    if (a.workers)
        cfg.workers = *a.workers;
    if (a.seed)
        cfg.seed = *a.seed;
    cfg.validate();
    LogFn log = a.quiet ? LogFn{} : LogFn{log_line};
    SynthesisSummary summary = synthesize_to_file(cfg, log);
    if (!write_text(a.summary, summary.to_json().dump(2)))
        throw IoError("cannot write summary: " + a.summary);
    return kOk;
}

struct EvaluateArgs
{
    std::string in;
    std::string report;
};

int run_evaluate(const EvaluateArgs& a)
{
    std::ifstream in(a.in);
    if (!in)
        throw IoError("cannot read dataset: " + a.in);
    ParsedDataset data = read_dataset(in);
    for (const auto& [line, msg] : data.errors)
        std::cerr << a.in << ":" << line << ": malformed record: " << msg << '\n';
    ordered_json report = evaluate_records(data.records).to_json();
    report["malformed_lines"] = data.errors.size();
    if (!write_text(a.report, report.dump(2)))
        throw IoError("cannot write report: " + a.report);
    return data.errors.empty() ? kOk : kIoError;
}

struct RegionsArgs
{
    std::string object;
    double scale = 0.5;
    std::size_t top = 10;
    std::string config;
    int pose = 0;
    std::uint64_t seed = 0;
};

int run_regions(const RegionsArgs& a)
{
    RunConfig cfg;
    if (!a.config.empty())
        cfg = RunConfig::load(a.config);
    ObjectSpec spec;
    spec.mesh = a.object;
    spec.id = spec.mesh.stem().string();
    cfg.regions.top_k = a.top;
    cfg.seed = a.seed;
    cfg.validate();
    if (a.scale <= 0.0 || a.pose < 0 || a.pose > 2)
        throw ConfigError("--scale must be positive and --pose 0, 1 or 2");

    TriangleMesh unit = spec.load();
    PreparedObject obj = prepare_object(spec, unit, a.scale, a.pose, cfg, sampling_seed(cfg.seed, 0, 0));
    std::vector<RegionPair> pairs =
        select_region_pairs(obj.samples, obj.reference, effective_region_params(cfg), region_seed(cfg.seed, 0, 0));

    auto region_json = [&](const Region& r) {
        ordered_json j;
        j["anchor"] = r.anchor;
        j["position"] = vec_json(obj.samples.points[r.anchor]);
        j["normal"] = vec_json(obj.samples.normals[r.anchor]);
        j["members"] = r.members.size();
        j["mean_position"] = vec_json(r.mean_position);
        j["mean_normal"] = vec_json(r.mean_normal);
        return j;
    };
    ordered_json j;
    j["object"] = spec.source();
    j["scale"] = a.scale;
    j["scale_factor"] = obj.scale_factor;
    j["pose_id"] = a.pose;
    j["reference"] = vec_json(obj.reference);
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ordered_json p;
        p["rank"] = i;
        p["score"] = pairs[i].score;
        p["a"] = region_json(pairs[i].a);
        p["b"] = region_json(pairs[i].b);
        list.push_back(p);
    }
    j["pairs"] = list;
    std::cout << j.dump(2) << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bimanual dexterous grasp synthesis"};
    app.require_subcommand(1);

    SynthesizeArgs syn;
    auto* s = app.add_subcommand("synthesize", "Generate a grasp dataset (JSON lines)");
    s->add_option("--config", syn.config, "Run configuration (JSON)")->required();
    s->add_option("--out", syn.out, "Dataset path, overrides the config");
    s->add_option("--workers", syn.workers, "Worker threads, overrides the config");
    s->add_option("--seed", syn.seed, "Master seed, overrides the config");
    s->add_option("--summary", syn.summary, "Write the stage summary here instead of stdout");
    s->add_flag("--quiet", syn.quiet, "No progress lines on stderr");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Aggregate quality metrics of a dataset");
    e->add_option("--in", ev.in, "Dataset (JSON lines)")->required();
    e->add_option("--report", ev.report, "Write the report here instead of stdout");

    RegionsArgs rg;
    auto* r = app.add_subcommand("regions", "Rank contact region pairs of one object");
    r->add_option("--object", rg.object, "Mesh file (OBJ or STL)")->required();
    r->add_option("--scale", rg.scale, "Bounding-box diagonal in meters")->required();
    r->add_option("--top", rg.top, "Number of pairs");
    r->add_option("--config", rg.config, "Take region and sampling parameters from this config");
    r->add_option("--pose", rg.pose, "Tabletop pose id (0 rests on the largest face)");
    r->add_option("--seed", rg.seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*s)
            return run_synthesize(syn);
        if (*e)
            return run_evaluate(ev);
        return run_regions(rg);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kConfigError;
    } catch (const HandModelError& err) {
        std::cerr << "hand model error: " << err.what() << '\n';
        return kConfigError;
    } catch (const RegionSelectionError& err) {
        std::cerr << "region selection failed: " << err.what() << '\n';
        return kConfigError;
    } catch (const std::exception& err) {
        // Unreadable or malformed input files and unwritable outputs.
        std::cerr << "I/O error: " << err.what() << '\n';
        return kIoError;
    }
}
