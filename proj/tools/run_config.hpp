#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridscan/dataset.hpp"
#include "gridscan/error.hpp"
#include "gridscan/oracles.hpp"
#include "gridscan/scanning.hpp"

namespace gridscan::cli {

/// Bad config document; the message names the offending key path.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct DatasetSpec {
  std::string source = "synthetic";  // "synthetic" | "csv"
  std::string csv_path;
  SyntheticYearConfig synthetic;
};

struct OracleSpec {
  OracleKind kind = OracleKind::damping_surrogate;
  double cost_ms = 0.0;
  /// Informative attribute indices for the standard damping coefficients
  /// (taken from the synthetic generator when absent).
  std::optional<std::vector<std::size_t>> informative;
  /// Full coefficient set; overrides `informative` when present.
  std::optional<DampingCoefficients> damping;
  TwoBusParams two_bus;
  bool two_bus_columns_given = false;
  std::string tabulated_trace;
};

struct RunConfig {
  nlohmann::json resolved;  // defaults merged with the user document
  DatasetSpec dataset;
  OracleSpec oracle;
  ScanConfig scan;
};

/// Every accepted key with its default. `null` marks optional entries.
nlohmann::json default_config();

/// Applies `path.to.key=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Overlays `user` on the defaults. Unknown keys and type mismatches throw
/// ConfigError citing the dotted key path.
nlohmann::json merge_with_defaults(const nlohmann::json& user);

/// Typed view of a merged document, with every parameter block validated.
RunConfig parse_run_config(const nlohmann::json& resolved);

/// Convenience: merge then parse.
RunConfig load_run_config(const nlohmann::json& user);

std::string sha256_hex(std::string_view bytes);

struct LoadedData {
  OperatingPointSet points;
  std::optional<std::vector<std::size_t>> informative;
};

LoadedData load_dataset(const DatasetSpec& spec);

StabilityOracle build_oracle(const OracleSpec& spec, const LoadedData& data);

}  // namespace gridscan::cli
