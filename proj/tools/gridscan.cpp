// gridscan: command-line front end of the fast stability-scanning pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gridscan/clustering.hpp"
#include "gridscan/error.hpp"
#include "gridscan/relief.hpp"
#include "gridscan/scanning.hpp"
#include "gridscan/serialize.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridscan;
using namespace gridscan::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNotConverged = 3;

constexpr const char* kManifest = "run_manifest.json";
constexpr const char* kTraceCsv = "full_trace.csv";
constexpr const char* kTraceJson = "full_trace.json";
constexpr const char* kFeatureJson = "feature_report.json";
constexpr const char* kFeatureCsv = "feature_report.csv";

struct Options {
  std::string config;
  std::string from_manifest;
  std::vector<std::string> overrides;
  std::string out = "gridscan_out";
  bool force = false;
};

// Output directory bookkeeping: overwrite guard, checksums, manifest.
class Run {
 public:
  Run(std::string command, fs::path out, bool force, RunConfig cfg)
      : command_(std::move(command)), out_(std::move(out)), force_(force),
        cfg_(std::move(cfg)) {}

  const RunConfig& config() const { return cfg_; }
  fs::path path(const std::string& name) const { return out_ / name; }
  bool exists(const std::string& name) const { return fs::exists(path(name)); }

  /// Refuses up front to clobber any of `names` unless --force was given.
  void claim(const std::vector<std::string>& names) const {
    if (force_) return;
    for (const auto& n : names) {
      if (exists(n)) {
        throw ValidationError("refusing to overwrite '" + path(n).string() +
                              "' (pass --force)");
      }
    }
  }

  void write(const std::string& name, const std::string& text,
             bool deterministic) {
    write_text(path(name), text);
    artifacts_[name] = {{"sha256", sha256_hex(text)},
                        {"deterministic", deterministic}};
  }
  void write(const std::string& name, const json& j, bool deterministic) {
    write(name, j.dump(2) + "\n", deterministic);
  }

  void reused(const std::string& name) {
    reused_[name] = sha256_hex(read_text(path(name)));
  }

  void finish(int exit_code) const {
    json manifest = json::object();
    if (exists(kManifest)) {
      manifest = json::parse(read_text(path(kManifest)), nullptr, false);
      if (!manifest.is_object()) manifest = json::object();
    }
    const auto& r = cfg_.resolved;
    manifest["tool"] = "gridscan";
    manifest["version"] = "0.1.0";
    manifest["runs"][command_] = {
        {"config", r},
        {"config_hash", sha256_hex(r.dump())},
        {"seeds",
         {{"dataset", r["dataset"]["synthetic"]["seed"]},
          {"relief", r["relief"]["seed"]},
          {"pso", r["pso"]["seed"]},
          {"scan", r["scan"]["seed"]}}},
        {"exit_code", exit_code},
        {"artifacts", artifacts_},
        {"reused", reused_}};
    write_text(path(kManifest), manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_;
  bool force_;
  RunConfig cfg_;
  json artifacts_ = json::object();
  json reused_ = json::object();
};

std::string cache_key(const json& resolved, bool with_relief) {
  json key = {{"dataset", resolved["dataset"]}, {"oracle", resolved["oracle"]}};
  if (with_relief) {
    key["oracle"].erase("cost_ms");
    key["relief"] = resolved["relief"];
  }
  return sha256_hex(key.dump());
}

std::optional<StabilityTrace> cached_trace(Run& run) {
  if (!run.exists(kTraceCsv) || !run.exists(kTraceJson)) return std::nullopt;
  const json meta = json::parse(read_text(run.path(kTraceJson)), nullptr, false);
  if (!meta.is_object() ||
      meta.value("cache_key", "") != cache_key(run.config().resolved, false)) {
    return std::nullopt;
  }
  StabilityTrace trace = load_trace_csv(run.path(kTraceCsv));
  trace.kind = run.config().oracle.kind;
  trace.seconds = meta.value("seconds", 0.0);
  run.reused(kTraceCsv);
  run.reused(kTraceJson);
  return trace;
}

void write_trace(Run& run, const StabilityTrace& trace) {
  json j = to_json(trace);
  j["cache_key"] = cache_key(run.config().resolved, false);
  run.write(kTraceCsv, trace_csv(trace), true);
  run.write(kTraceJson, j, false);
}

std::optional<FeatureReport> cached_features(Run& run) {
  if (!run.exists(kFeatureJson)) return std::nullopt;
  const json j = json::parse(read_text(run.path(kFeatureJson)), nullptr, false);
  if (!j.is_object() ||
      j.value("cache_key", "") != cache_key(run.config().resolved, true)) {
    return std::nullopt;
  }
  run.reused(kFeatureJson);
  return feature_report_from_json(j);
}

void write_features(Run& run, const FeatureReport& report) {
  json j = to_json(report);
  j["cache_key"] = cache_key(run.config().resolved, true);
  run.write(kFeatureJson, j, true);
  run.write(kFeatureCsv, feature_report_csv(report), true);
}

int cmd_generate(Run& run) {
  const auto& ds = run.config().dataset;
  if (ds.source != "synthetic") {
    throw ConfigError("generate needs dataset.source = \"synthetic\"");
  }
  run.claim({"dataset.csv", "normalization.json", "metadata.json"});
  const auto year = generate_synthetic_year(ds.synthetic);
  write_csv(year.points, run.path("dataset.csv"));
  run.write("dataset.csv", read_text(run.path("dataset.csv")), true);
  run.write("normalization.json", normalization_sidecar_json(year.points), true);
  json names = json::array();
  for (auto i : year.informative) names.push_back(year.points.attributes()[i].name);
  run.write("metadata.json",
            json{{"n_hours", year.points.size()},
                 {"n_attributes", year.points.dimension()},
                 {"informative", year.informative},
                 {"informative_names", names},
                 {"synthetic", run.config().resolved["dataset"]["synthetic"]}},
            true);
  std::cout << "generated " << year.points.size() << " hours x "
            << year.points.dimension() << " attributes\n";
  return kExitOk;
}

int cmd_select(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  run.claim({kFeatureJson, kFeatureCsv});
  const auto& cfg = run.config();
  const auto report = select_features(data.points, oracle, cfg.scan.relief,
                                      cfg.scan.adjustment_scale);
  write_features(run, report);
  std::cout << "training size " << report.training_size << ", "
            << (report.converged ? "converged" : "NOT converged") << "\n";
  return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_cluster(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  const auto& cfg = run.config();
  auto features = cached_features(run);
  std::vector<std::string> outputs = {"cluster_model.json", "assignment.csv"};
  if (!features) {
    outputs.push_back(kFeatureJson);
    outputs.push_back(kFeatureCsv);
  }
  run.claim(outputs);
  if (!features) {
    features = select_features(data.points, oracle, cfg.scan.relief,
                               cfg.scan.adjustment_scale);
    write_features(run, *features);
  }
  const auto w = DistanceWeights::from_adjusted(features->adjusted_weight);
  const auto result = self_adaptive_pso_kmeans(data.points.values(), w,
                                               cfg.scan.pso, cfg.scan.adapt);
  json model = to_json(result.model);
  model["converged"] = result.converged;
  model["k_init"] = result.k_init;
  model["outer_passes"] = result.outer_passes;
  model["first_iteration_smse"] = result.first_iteration_smse;
  model["gbest_history"] = result.gbest_history;
  model["reduction"] = 1.0 - static_cast<double>(result.model.k()) /
                                 static_cast<double>(data.points.size());
  run.write("cluster_model.json", model, true);
  run.write("assignment.csv", assignment_csv(result.model, data.points), true);
  std::cout << "k_init " << result.k_init << " -> k " << result.model.k()
            << ", smse " << result.model.smse << ", "
            << (result.converged ? "converged" : "NOT converged") << "\n";
  return (result.converged && features->converged) ? kExitOk
                                                   : kExitNotConverged;
}

int cmd_fullscan(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  run.claim({kTraceCsv, kTraceJson});
  const auto trace = full_scan(data.points, oracle);
  write_trace(run, trace);
  std::cout << "evaluated " << trace.hours.size() << " hours in "
            << trace.seconds << " s";
  if (trace.partial()) std::cout << " (" << trace.failed_hours.size() << " failed)";
  std::cout << "\n";
  return kExitOk;
}

int scan_exit_code(const ScanReport& r) {
  return (r.features.converged && r.clustering_converged) ? kExitOk
                                                          : kExitNotConverged;
}

void print_scan(const ScanReport& r) {
  std::cout << "k " << r.k_final << " (reduction " << r.reduction << "), "
            << r.oracle_evaluations << " oracle calls";
  if (r.validation) {
    std::cout << ", MAPE " << 100.0 * r.validation->mape << "%, max APE "
              << 100.0 * r.validation->max_ape << "%";
  }
  if (r.speedup) std::cout << ", speed-up " << *r.speedup << "x";
  std::cout << "\n";
}

int cmd_fastscan(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  run.claim({"scan_report.json", "scan_trace.csv", "error_histogram.csv",
             "timing.json"});
  const auto& cfg = run.config();
  const auto full = cached_trace(run);
  if (full && full->hours != data.points.hours()) {
    throw ValidationError("cached full trace covers different hours");
  }
  ScanReport report = fast_scan(data.points, oracle, cfg.scan);
  std::span<const std::size_t> exclude;
  if (cfg.scan.exclude_training_from_validation) {
    exclude = report.features.training_rows;
  }
  if (full) {
    report.validation = validate_against_trace(report, *full,
                                               cfg.scan.sample_size,
                                               cfg.scan.seed, exclude);
    report.full_errors = errors_against_trace(report, *full);
  } else {
    report.validation =
        validate(report, data.points, oracle, cfg.scan.sample_size,
                 cfg.scan.seed, exclude, report.features.training_rows,
                 report.features.training_lambda);
  }
  run.write("scan_report.json", to_json(report, false), true);
  run.write("scan_trace.csv", scan_trace_csv(report, full ? &*full : nullptr),
            true);
  run.write("error_histogram.csv", histogram_csv(*report.validation), true);
  run.write("timing.json", timing_json(report), false);
  print_scan(report);
  return scan_exit_code(report);
}

int cmd_compare(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  auto full = cached_trace(run);
  std::vector<std::string> outputs = {"compare_report.json", "compare_trace.csv",
                                      "compare_histogram.csv"};
  if (!full) {
    outputs.push_back(kTraceCsv);
    outputs.push_back(kTraceJson);
  }
  run.claim(outputs);
  if (!full) {
    full = full_scan(data.points, oracle);
    write_trace(run, *full);
  }
  const StabilityTrace trace = *full;
  const ScanReport report =
      compare_full_vs_fast(data.points, oracle, run.config().scan, std::move(full));
  run.write("compare_report.json", to_json(report, true), false);
  run.write("compare_trace.csv", scan_trace_csv(report, &trace), true);
  run.write("compare_histogram.csv", histogram_csv(*report.validation), true);
  print_scan(report);
  return scan_exit_code(report);
}

int cmd_worstcase(Run& run, const LoadedData& data, const StabilityOracle& oracle) {
  auto full = cached_trace(run);
  std::vector<std::string> outputs = {"worstcase.json", "worstcase.csv"};
  if (!full) {
    outputs.push_back(kTraceCsv);
    outputs.push_back(kTraceJson);
  }
  run.claim(outputs);
  if (!full) {
    full = full_scan(data.points, oracle);
    write_trace(run, *full);
  }
  if (full->hours != data.points.hours()) {
    throw ValidationError("cached full trace covers different hours");
  }
  const auto demand = total_demand(data.points);
  const auto wc = worst_case_analysis(*full, demand);
  run.write("worstcase.json", to_json(wc), true);
  std::string csv = "hour,lambda,demand\n";
  for (std::size_t i = 0; i < demand.size(); ++i) {
    csv += std::to_string(full->hours[i]) + ',';
    csv += std::isnan(full->lambda[i]) ? std::string("nan")
                                       : json(full->lambda[i]).dump();
    csv += ',' + json(demand[i]).dump() + '\n';
  }
  run.write("worstcase.csv", csv, true);
  std::cout << "least stable hour " << wc.min_lambda_hour << ", peak demand hour "
            << wc.max_demand_hour << ", correlation " << wc.correlation
            << (wc.shifted ? " (shifted)" : "") << "\n";
  return kExitOk;
}

json user_config(const std::string& command, const Options& opt) {
  json user = json::object();
  if (!opt.config.empty()) {
    user = json::parse(read_text(opt.config), nullptr, false);
    if (user.is_discarded()) {
      throw ParseError("config '" + opt.config + "' is not valid JSON");
    }
  } else if (!opt.from_manifest.empty()) {
    const json m = json::parse(read_text(opt.from_manifest), nullptr, false);
    if (m.is_discarded() || !m.contains("runs") || !m["runs"].contains(command)) {
      throw ParseError("manifest '" + opt.from_manifest + "' has no '" +
                       command + "' run");
    }
    user = m["runs"][command]["config"];
  }
  for (const auto& o : opt.overrides) apply_override(user, o);
  return user;
}

void check_thread_env() {
  const char* env = std::getenv("GRIDSCAN_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    throw ValidationError(std::string("GRIDSCAN_THREADS must be a positive integer, got '") +
                          env + "'");
  }
}

using Handler = std::function<int(Run&, const LoadedData&, const StabilityOracle&)>;

int execute(const std::string& command, const Options& opt, const Handler& body) {
  check_thread_env();
  RunConfig cfg = load_run_config(user_config(command, opt));
  fs::create_directories(opt.out);
  Run run(command, opt.out, opt.force, cfg);
  int code = kExitOk;
  if (command == "generate") {
    code = cmd_generate(run);
  } else {
    const LoadedData data = load_dataset(cfg.dataset);
    const StabilityOracle oracle = build_oracle(cfg.oracle, data);
    code = body(run, data, oracle);
  }
  run.finish(code);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast stability scanning of a year of operating points"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
    Handler body;
  };
  const std::vector<Command> commands = {
      {"generate", "write a synthetic year (dataset.csv, metadata.json)", nullptr},
      {"select", "RReliefF feature selection (feature_report.*)", cmd_select},
      {"cluster", "self-adaptive PSO-k-means (cluster_model.json)", cmd_cluster},
      {"fullscan", "oracle at every hour (full_trace.*)", cmd_fullscan},
      {"fastscan", "fast scan with validation (scan_report.json)", cmd_fastscan},
      {"compare", "full vs fast scan with speed-up (compare_report.json)",
       cmd_compare},
      {"worstcase", "least stable hour vs peak demand (worstcase.json)",
       cmd_worstcase},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto* cfg_opt = sub->add_option("-c,--config", opt.config, "JSON run config");
    sub->add_option("--from-manifest", opt.from_manifest,
                    "replay the config recorded in a run_manifest.json")
        ->excludes(cfg_opt);
    sub->add_option("-s,--set", opt.overrides,
                    "override a config field: dotted.path=value");
    sub->add_option("-o,--out", opt.out, "output directory");
    sub->add_flag("-f,--force", opt.force, "overwrite existing outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Handler body;
  for (const auto& c : commands) {
    if (name == c.name) body = c.body;
  }
  try {
    return execute(name, opt, body);
  } catch (const ValidationError& e) {
    std::cerr << "gridscan: invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    std::cerr << "gridscan: invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "gridscan: error: " << e.what() << "\n";
    return kExitFailure;
  }
}
