#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gridscan/clustering.hpp"
#include "gridscan/dataset.hpp"
#include "gridscan/oracles.hpp"
#include "gridscan/relief.hpp"
#include "gridscan/scanning.hpp"

namespace gridscan {

nlohmann::json to_json(const FeatureReport& report);
FeatureReport feature_report_from_json(const nlohmann::json& j);
/// Feature, initial weight/rank, adjusted weight/rank; sorted by adjusted rank.
std::string feature_report_csv(const FeatureReport& report);

nlohmann::json to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& j);
/// `hour,cluster_id`.
std::string assignment_csv(const ClusterModel& model,
                           const OperatingPointSet& data);

nlohmann::json to_json(const StabilityTrace& trace);
/// `hour,lambda`; failed hours are written as `nan`.
std::string trace_csv(const StabilityTrace& trace);
StabilityTrace parse_trace_csv(std::string_view text);
StabilityTrace load_trace_csv(const std::filesystem::path& path);

nlohmann::json to_json(const Validation& v);
/// `bin_low,bin_high,count` in percentage points.
std::string histogram_csv(const Validation& v);

/// `include_timing = false` leaves out wall-clock fields, so two runs with the
/// same inputs serialize identically.
nlohmann::json to_json(const ScanReport& report, bool include_timing = true);
nlohmann::json timing_json(const ScanReport& report);
/// `hour,lambda,lambda_hat`; lambda is empty when no full trace is given.
std::string scan_trace_csv(const ScanReport& report,
                           const StabilityTrace* full = nullptr);

nlohmann::json to_json(const WorstCase& w);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gridscan
