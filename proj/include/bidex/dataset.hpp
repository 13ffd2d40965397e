#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bidex/handkin.hpp"
#include "bidex/optim.hpp"

namespace bidex {

struct RegionSummary
{
    std::size_t anchor_left = 0; // sample indices
    std::size_t anchor_right = 0;
    Vec3 position_left = Vec3::Zero();
    Vec3 position_right = Vec3::Zero();
    double score = 0.0;
};

struct RecordMetrics
{
    double q_left = 0.0;  // per-hand QP energy over all of the hand's contacts
    double q_right = 0.0;
    double q = 0.0;       // joint QP energy used by analytic_success
    double pd = 0.0;
    double spd = 0.0;
    double cdc = 0.0;
    std::size_t active_contacts = 0;
    bool analytic_success = false;
};

/// One line of the dataset. Poses are in the world frame of the resting,
/// scaled object (table plane at the configured height).
struct GraspRecord
{
    std::string object_id;
    std::string source; // mesh path or primitive description
    double scale = 0.0;        // bounding-box diagonal, meters
    double scale_factor = 0.0; // meters per model unit
    int pose_id = 0;
    std::uint64_t seed = 0;
    std::size_t object_index = 0;
    std::size_t scale_index = 0;
    std::size_t candidate = 0;
    RegionSummary region;
    BiGraspPose grasp;
    BiGraspPose pre;
    BiGraspPose squeeze;
    EnergyTerms energy; // unweighted terms; total uses the final w_col
    double final_w_col = 0.0;
    RecordMetrics metrics;
    std::map<std::string, double> timings_ms; // stage -> ms, empty unless requested
};

class RecordError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Keys in a fixed order; doubles print in shortest round-trip form, so
/// record_from_json(record_to_json(r)) reproduces every field bit for bit.
nlohmann::ordered_json record_to_json(const GraspRecord& record);
GraspRecord record_from_json(const nlohmann::json& j);
std::string serialize_record(const GraspRecord& record);

struct ParsedDataset
{
    std::vector<GraspRecord> records;
    std::vector<std::pair<std::size_t, std::string>> errors; // (1-based line, message)
};

/// Blank lines are skipped; malformed lines are collected, not thrown.
ParsedDataset read_dataset(std::istream& in);
ParsedDataset read_dataset(const std::filesystem::path& path);

struct MetricSummary
{
    std::size_t count = 0;
    double pd_mean = 0.0;
    double spd_mean = 0.0;
    double cdc_mean = 0.0;
    double q_mean = 0.0;
    double success_rate = 0.0;
    std::optional<double> d; // first variance ratio; needs >= 2 grasps
};

struct EvaluationReport
{
    std::vector<std::pair<std::string, MetricSummary>> objects; // in first-appearance order
    MetricSummary aggregate; // means over all records; D is the mean of the per-object values

    nlohmann::ordered_json to_json() const;
};

EvaluationReport evaluate_records(const std::vector<GraspRecord>& records);

} // namespace bidex
