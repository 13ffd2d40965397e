#include "bidex/dataset.hpp"

#include <fstream>
#include <map>

#include "bidex/metrics.hpp"

namespace bidex {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw RecordError("expected 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

ordered_json bigrasp_json(const BiGraspPose& g)
{
    ordered_json j;
    j["left"] = pose_to_json(g.left);
    j["right"] = pose_to_json(g.right);
    return j;
}

BiGraspPose bigrasp_from(const json& j) { return {pose_from_json(j.at("left")), pose_from_json(j.at("right"))}; }

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

MetricSummary summarize_means(const std::vector<const GraspRecord*>& records)
{
    MetricSummary s;
    s.count = records.size();
    double pd = 0.0, spd = 0.0, cdc = 0.0, q = 0.0, ok = 0.0;
    for (const GraspRecord* r : records) {
        pd += r->metrics.pd;
        spd += r->metrics.spd;
        cdc += r->metrics.cdc;
        q += r->metrics.q;
        ok += r->metrics.analytic_success ? 1.0 : 0.0;
    }
    s.pd_mean = mean(pd, s.count);
    s.spd_mean = mean(spd, s.count);
    s.cdc_mean = mean(cdc, s.count);
    s.q_mean = mean(q, s.count);
    s.success_rate = mean(ok, s.count);
    return s;
}

ordered_json summary_json(const MetricSummary& s)
{
    ordered_json j;
    j["count"] = s.count;
    j["PD_mean"] = s.pd_mean;
    j["SPD_mean"] = s.spd_mean;
    j["CDC_mean"] = s.cdc_mean;
    j["Q_mean"] = s.q_mean;
    j["success_rate"] = s.success_rate;
    j["D"] = s.d ? ordered_json(*s.d) : ordered_json(nullptr);
    return j;
}

} // namespace

ordered_json record_to_json(const GraspRecord& r)
{
    ordered_json j;
    j["object_id"] = r.object_id;
    j["source"] = r.source;
    j["scale"] = r.scale;
    j["scale_factor"] = r.scale_factor;
    j["pose_id"] = r.pose_id;
    j["seed"] = r.seed;
    j["object_index"] = r.object_index;
    j["scale_index"] = r.scale_index;
    j["candidate"] = r.candidate;
    ordered_json region;
    region["anchor_left"] = r.region.anchor_left;
    region["anchor_right"] = r.region.anchor_right;
    region["position_left"] = vec_json(r.region.position_left);
    region["position_right"] = vec_json(r.region.position_right);
    region["score"] = r.region.score;
    j["region"] = region;
    j["grasp"] = bigrasp_json(r.grasp);
    j["pre"] = bigrasp_json(r.pre);
    j["squeeze"] = bigrasp_json(r.squeeze);
    ordered_json energy;
    energy["q_left"] = r.energy.q_left;
    energy["q_right"] = r.energy.q_right;
    energy["dis"] = r.energy.dis;
    energy["region"] = r.energy.region;
    energy["col"] = r.energy.col;
    energy["total"] = r.energy.total;
    energy["w_col"] = r.final_w_col;
    j["energy"] = energy;
    ordered_json m;
    m["Q_left"] = r.metrics.q_left;
    m["Q_right"] = r.metrics.q_right;
    m["Q"] = r.metrics.q;
    m["PD"] = r.metrics.pd;
    m["SPD"] = r.metrics.spd;
    m["CDC"] = r.metrics.cdc;
    m["active_contacts"] = r.metrics.active_contacts;
    m["analytic_success"] = r.metrics.analytic_success;
    j["metrics"] = m;
    if (!r.timings_ms.empty()) {
        ordered_json t;
        for (const auto& [k, v] : r.timings_ms)
            t[k] = v;
        j["timings_ms"] = t;
    }
    return j;
}

GraspRecord record_from_json(const json& j)
{
    GraspRecord r;
    try {
        r.object_id = j.at("object_id").get<std::string>();
        r.source = j.at("source").get<std::string>();
        r.scale = j.at("scale").get<double>();
        r.scale_factor = j.at("scale_factor").get<double>();
        r.pose_id = j.at("pose_id").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.object_index = j.at("object_index").get<std::size_t>();
        r.scale_index = j.at("scale_index").get<std::size_t>();
        r.candidate = j.at("candidate").get<std::size_t>();
        const json& region = j.at("region");
        r.region.anchor_left = region.at("anchor_left").get<std::size_t>();
        r.region.anchor_right = region.at("anchor_right").get<std::size_t>();
        r.region.position_left = vec_from(region.at("position_left"));
        r.region.position_right = vec_from(region.at("position_right"));
        r.region.score = region.at("score").get<double>();
        r.grasp = bigrasp_from(j.at("grasp"));
        r.pre = bigrasp_from(j.at("pre"));
        r.squeeze = bigrasp_from(j.at("squeeze"));
        const json& e = j.at("energy");
        r.energy.q_left = e.at("q_left").get<double>();
        r.energy.q_right = e.at("q_right").get<double>();
        r.energy.dis = e.at("dis").get<double>();
        r.energy.region = e.at("region").get<double>();
        r.energy.col = e.at("col").get<double>();
        r.energy.total = e.at("total").get<double>();
        r.final_w_col = e.at("w_col").get<double>();
        const json& m = j.at("metrics");
        r.metrics.q_left = m.at("Q_left").get<double>();
        r.metrics.q_right = m.at("Q_right").get<double>();
        r.metrics.q = m.at("Q").get<double>();
        r.metrics.pd = m.at("PD").get<double>();
        r.metrics.spd = m.at("SPD").get<double>();
        r.metrics.cdc = m.at("CDC").get<double>();
        r.metrics.active_contacts = m.at("active_contacts").get<std::size_t>();
        r.metrics.analytic_success = m.at("analytic_success").get<bool>();
        if (auto it = j.find("timings_ms"); it != j.end())
            for (auto t = it->begin(); t != it->end(); ++t)
                r.timings_ms[t.key()] = t->get<double>();
    } catch (const json::exception& e) {
        throw RecordError(e.what());
    } catch (const std::invalid_argument& e) {
        throw RecordError(e.what());
    }
    return r;
}

std::string serialize_record(const GraspRecord& record) { return record_to_json(record).dump(); }

ParsedDataset read_dataset(std::istream& in)
{
    ParsedDataset out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            out.errors.emplace_back(number, e.what());
        } catch (const RecordError& e) {
            out.errors.emplace_back(number, e.what());
        }
    }
    return out;
}

ParsedDataset read_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read dataset: " + path.string());
    return read_dataset(in);
}

EvaluationReport evaluate_records(const std::vector<GraspRecord>& records)
{
    EvaluationReport report;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const GraspRecord*>> groups;
    std::vector<const GraspRecord*> all;
    for (const auto& r : records) {
        auto [it, inserted] = groups.try_emplace(r.object_id);
        if (inserted)
            order.push_back(r.object_id);
        it->second.push_back(&r);
        all.push_back(&r);
    }
    double d_sum = 0.0;
    std::size_t d_count = 0;
    for (const auto& id : order) {
        const auto& group = groups[id];
        MetricSummary s = summarize_means(group);
        if (group.size() >= 2) {
            std::vector<BiGraspPose> grasps;
            for (const GraspRecord* r : group)
                grasps.push_back(r->grasp);
            s.d = first_variance_ratio(grasps);
            d_sum += *s.d;
            ++d_count;
        }
        report.objects.emplace_back(id, s);
    }
    report.aggregate = summarize_means(all);
    if (d_count > 0)
        report.aggregate.d = d_sum / static_cast<double>(d_count);
    return report;
}

ordered_json EvaluationReport::to_json() const
{
    ordered_json j;
    ordered_json objs = ordered_json::array();
    for (const auto& [id, s] : objects) {
        ordered_json o;
        o["object_id"] = id;
        o.update(summary_json(s));
        objs.push_back(o);
    }
    j["objects"] = objs;
    j["aggregate"] = summary_json(aggregate);
    return j;
}

} // namespace bidex
