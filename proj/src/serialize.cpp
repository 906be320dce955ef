#include "gridscan/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridscan/error.hpp"

namespace gridscan {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

}  // namespace

json to_json(const FeatureReport& r) {
  json features = json::array();
  for (std::size_t i = 0; i < r.size(); ++i) {
    features.push_back({{"name", i < r.names.size() ? r.names[i] : ""},
                        {"weight", r.weight[i]},
                        {"rank", r.rank[i]},
                        {"adjusted_weight", r.adjusted_weight[i]},
                        {"adjusted_rank", r.adjusted_rank[i]},
                        {"variance", r.variance[i]}});
  }
  json history = json::array();
  for (const auto& p : r.history) {
    history.push_back({{"training_size", p.training_size},
                       {"spearman", nullable(p.spearman)},
                       {"max_drift", nullable(p.max_drift)}});
  }
  return {{"features", features},
          {"scale", r.scale},
          {"training_size", r.training_size},
          {"converged", r.converged},
          {"passes", r.passes},
          {"training_rows", r.training_rows},
          {"training_lambda", r.training_lambda},
          {"failed_hours", r.failed_hours},
          {"history", history}};
}

FeatureReport feature_report_from_json(const json& j) {
  FeatureReport r;
  for (const auto& f : j.at("features")) {
    r.names.push_back(f.at("name").get<std::string>());
    r.weight.push_back(f.at("weight").get<double>());
    r.rank.push_back(f.at("rank").get<int>());
    r.adjusted_weight.push_back(f.at("adjusted_weight").get<double>());
    r.adjusted_rank.push_back(f.at("adjusted_rank").get<int>());
    r.variance.push_back(f.at("variance").get<double>());
  }
  r.scale = j.at("scale").get<double>();
  r.training_size = j.at("training_size").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  r.passes = j.value("passes", std::size_t{0});
  r.training_rows = j.value("training_rows", std::vector<std::size_t>{});
  r.training_lambda = j.value("training_lambda", std::vector<double>{});
  r.failed_hours = j.value("failed_hours", std::vector<std::int64_t>{});
  return r;
}

std::string feature_report_csv(const FeatureReport& r) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.adjusted_rank[a] < r.adjusted_rank[b];
  });
  std::ostringstream out;
  out << "feature,initial_weight,initial_rank,adjusted_weight,adjusted_rank\n";
  for (auto i : order) {
    out << (i < r.names.size() ? r.names[i] : std::to_string(i)) << ','
        << num(r.weight[i]) << ',' << r.rank[i] << ','
        << num(r.adjusted_weight[i]) << ',' << r.adjusted_rank[i] << '\n';
  }
  return out.str();
}

json to_json(const ClusterModel& m) {
  return {{"k", m.k()},
          {"smse", m.smse},
          {"weights", m.weights},
          {"centroids", matrix_json(m.centroids)},
          {"assignment", m.assignment}};
}

ClusterModel cluster_model_from_json(const json& j) {
  ClusterModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.centroids = Matrix(0, m.weights.size());
  for (const auto& row : j.at("centroids")) {
    m.centroids.push_row(row.get<std::vector<double>>());
  }
  m.assignment = j.at("assignment").get<std::vector<std::size_t>>();
  m.smse = j.at("smse").get<double>();
  if (j.at("k").get<std::size_t>() != m.k()) {
    throw ParseError("cluster model: k does not match the centroid count");
  }
  return m;
}

std::string assignment_csv(const ClusterModel& model,
                           const OperatingPointSet& data) {
  std::ostringstream out;
  out << "hour,cluster_id\n";
  for (std::size_t i = 0; i < model.assignment.size(); ++i) {
    out << data.hours()[i] << ',' << model.assignment[i] << '\n';
  }
  return out.str();
}

json to_json(const StabilityTrace& t) {
  json lambda = json::array();
  for (double v : t.lambda) lambda.push_back(nullable(v));
  return {{"kind", to_string(t.kind)},
          {"hours", t.hours},
          {"lambda", lambda},
          {"failed_hours", t.failed_hours},
          {"partial", t.partial()},
          {"seconds", t.seconds}};
}

std::string trace_csv(const StabilityTrace& t) {
  std::ostringstream out;
  out << "hour,lambda\n";
  for (std::size_t i = 0; i < t.hours.size(); ++i) {
    out << t.hours[i] << ',' << num(t.lambda[i]) << '\n';
  }
  return out.str();
}

StabilityTrace parse_trace_csv(std::string_view text) {
  StabilityTrace t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "hour,lambda") {
        throw ParseError("trace CSV line 1: expected header 'hour,lambda'");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError("trace CSV line " + std::to_string(lineno) +
                       ": expected two cells");
    }
    std::int64_t hour = 0;
    const std::string h = line.substr(0, comma);
    const std::string v = line.substr(comma + 1);
    auto [hp, he] = std::from_chars(h.data(), h.data() + h.size(), hour);
    if (he != std::errc() || hp != h.data() + h.size()) {
      throw ParseError("trace CSV line " + std::to_string(lineno) +
                       ": bad hour '" + h + "'");
    }
    double lambda = std::numeric_limits<double>::quiet_NaN();
    if (v != "nan") {
      auto [vp, ve] = std::from_chars(v.data(), v.data() + v.size(), lambda);
      if (ve != std::errc() || vp != v.data() + v.size()) {
        throw ParseError("trace CSV line " + std::to_string(lineno) +
                         ": bad lambda '" + v + "'");
      }
    } else {
      t.failed_hours.push_back(hour);
    }
    t.hours.push_back(hour);
    t.lambda.push_back(lambda);
  }
  if (lineno == 0) throw ParseError("trace CSV: empty file");
  return t;
}

StabilityTrace load_trace_csv(const std::filesystem::path& path) {
  return parse_trace_csv(read_text(path));
}

json to_json(const Validation& v) {
  json samples = json::array();
  for (const auto& s : v.samples) {
    samples.push_back({{"hour", s.hour},
                       {"lambda", s.lambda},
                       {"lambda_hat", s.lambda_hat},
                       {"ape", s.ape},
                       {"absolute", s.absolute}});
  }
  json bins = json::array();
  for (const auto& b : v.histogram) {
    bins.push_back({{"bin_low", b.low_pct}, {"bin_high", b.high_pct},
                    {"count", b.count}});
  }
  return {{"sample_count", v.samples.size()},
          {"mape", v.mape},
          {"max_ape", v.max_ape},
          {"absolute_fallbacks", v.absolute_fallbacks},
          {"histogram", bins},
          {"samples", samples}};
}

std::string histogram_csv(const Validation& v) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n";
  for (const auto& b : v.histogram) {
    out << num(b.low_pct) << ',' << num(b.high_pct) << ',' << b.count << '\n';
  }
  return out.str();
}

json timing_json(const ScanReport& r) {
  json t = {{"feature_selection_s", r.timing.feature_selection_s},
            {"clustering_s", r.timing.clustering_s},
            {"centroid_eval_s", r.timing.centroid_eval_s},
            {"fast_total_s", r.timing.fast_total_s()}};
  if (r.timing.full_scan_s) t["full_scan_s"] = *r.timing.full_scan_s;
  if (r.speedup) t["speedup"] = *r.speedup;
  return t;
}

json to_json(const ScanReport& r, bool include_timing) {
  json j = {{"n_points", r.hours.size()},
            {"k_final", r.k_final},
            {"reduction", r.reduction},
            {"oracle_evaluations", r.oracle_evaluations},
            {"training_size", r.features.training_size},
            {"features_converged", r.features.converged},
            {"clustering_converged", r.clustering_converged},
            {"eps_d", r.eps_d},
            {"eps_c", r.eps_c},
            {"smse", r.model.smse},
            {"centroid_lambda", r.centroid_lambda},
            {"lambda_hat", r.lambda_hat}};
  if (r.validation) j["validation"] = to_json(*r.validation);
  if (r.full_errors) {
    j["full_errors"] = {{"mape", r.full_errors->mape},
                        {"max_ape", r.full_errors->max_ape},
                        {"absolute_fallbacks", r.full_errors->absolute_fallbacks}};
  }
  if (include_timing) {
    j["timing"] = timing_json(r);
    if (r.speedup) j["speedup"] = *r.speedup;
  }
  return j;
}

std::string scan_trace_csv(const ScanReport& r, const StabilityTrace* full) {
  std::ostringstream out;
  out << "hour,lambda,lambda_hat\n";
  for (std::size_t i = 0; i < r.hours.size(); ++i) {
    out << r.hours[i] << ',';
    if (full) out << num(full->lambda[i]);
    out << ',' << num(r.lambda_hat[i]) << '\n';
  }
  return out.str();
}

json to_json(const WorstCase& w) {
  return {{"min_lambda_hour", w.min_lambda_hour},
          {"min_lambda", w.min_lambda},
          {"max_demand_hour", w.max_demand_hour},
          {"max_demand", w.max_demand},
          {"correlation", w.correlation},
          {"shifted", w.shifted}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace gridscan
