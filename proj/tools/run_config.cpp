#include "run_config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <unordered_map>

#include "gridscan/serialize.hpp"

namespace gridscan::cli {

using nlohmann::json;

json default_config() {
  const SyntheticYearConfig syn;
  const ReliefParams relief;
  const PsoParams pso;
  const AdaptiveParams adapt;
  const ScanConfig scan;
  const TwoBusParams two_bus;
  return {
      {"dataset",
       {{"source", "synthetic"},
        {"csv_path", nullptr},
        {"synthetic",
         {{"n_hours", syn.n_hours},
          {"n_attributes", syn.n_attributes},
          {"seed", syn.seed},
          {"seasonal_amplitude", syn.seasonal_amplitude},
          {"diurnal_amplitude", syn.diurnal_amplitude},
          {"noise_sigma", syn.noise_sigma},
          {"n_informative", syn.n_informative}}}}},
      {"oracle",
       {{"kind", "damping_surrogate"},
        {"cost_ms", 0.0},
        {"damping",
         {{"informative", nullptr},
          {"b0", nullptr},
          {"linear", nullptr},
          {"interactions", nullptr}}},
        {"two_bus",
         {{"source_voltage", two_bus.source_voltage},
          {"reactance", two_bus.reactance},
          {"load_columns", nullptr},
          {"max_load_fraction", two_bus.max_load_fraction}}},
        {"tabulated", {{"trace_csv", nullptr}}}}},
      {"relief",
       {{"m", relief.m},
        {"k", relief.k},
        {"sigma", relief.sigma},
        {"batch", relief.batch},
        {"rho_threshold", relief.rho_threshold},
        {"epsilon_f", relief.epsilon_f},
        {"window", relief.window},
        {"seed", relief.seed},
        {"scale", nullptr}}},
      {"pso",
       {{"swarm_size", pso.swarm_size},
        {"n_iter", pso.n_iter},
        {"c1", pso.c1},
        {"c2", pso.c2},
        {"w_max", pso.w_max},
        {"w_min", pso.w_min},
        {"sigma_t2", pso.sigma_t2},
        {"p0", pso.p0},
        {"initial_velocity", pso.initial_velocity},
        {"seed", pso.seed}}},
      {"adapt",
       {{"k_init", adapt.k_init},
        {"eps_d", adapt.eps_d},
        {"eps_c", adapt.eps_c},
        {"max_outer", adapt.max_outer},
        {"max_new_per_pass", adapt.max_new_per_pass},
        {"kmeans_iterations", adapt.kmeans_iterations}}},
      {"scan",
       {{"sample_size", scan.sample_size},
        {"seed", scan.seed},
        {"exclude_training_from_validation",
         scan.exclude_training_from_validation}}},
  };
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) +
                      "': expected key.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("override '" + path + "': empty key");
    if (!node->is_object()) {
      throw ConfigError("override '" + path + "': '" + path.substr(0, start - 1) +
                        "' is not an object");
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void overlay(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw ConfigError((prefix.empty() ? std::string("config") : "'" + prefix + "'") +
                      " must be an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = join(prefix, key);
    if (!base.contains(key)) throw ConfigError("unknown key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
      continue;
    }
    bool ok = true;
    const char* expected = "";
    if (slot.is_null()) {
      ok = true;
    } else if (slot.is_number_unsigned()) {
      ok = value.is_number_unsigned();
      expected = "a non-negative integer";
    } else if (slot.is_number()) {
      ok = value.is_number();
      expected = "a number";
    } else if (slot.is_boolean()) {
      ok = value.is_boolean();
      expected = "a boolean";
    } else if (slot.is_string()) {
      ok = value.is_string();
      expected = "a string";
    }
    if (!ok) {
      throw ConfigError("key '" + path + "' must be " + expected + ", got " +
                        value.dump());
    }
    slot = value;
  }
}

template <class T>
T get_as(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    node = &node->at(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + path + "' has the wrong type: " + node->dump());
  }
}

bool is_set(const json& doc, const std::string& a, const std::string& b,
            const std::string& c) {
  return !doc.at(a).at(b).at(c).is_null();
}

// validate() messages already name the offending key.
template <class F>
void checked(F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

json merge_with_defaults(const json& user) {
  json merged = default_config();
  overlay(merged, user, "");
  return merged;
}

RunConfig parse_run_config(const json& r) {
  RunConfig cfg;
  cfg.resolved = r;

  auto& ds = cfg.dataset;
  ds.source = get_as<std::string>(r, "dataset.source");
  if (ds.source != "synthetic" && ds.source != "csv") {
    throw ConfigError("key 'dataset.source' must be \"synthetic\" or \"csv\"");
  }
  if (!r.at("dataset").at("csv_path").is_null()) {
    ds.csv_path = get_as<std::string>(r, "dataset.csv_path");
  }
  if (ds.source == "csv" && ds.csv_path.empty()) {
    throw ConfigError("key 'dataset.csv_path' is required when dataset.source is \"csv\"");
  }
  auto& syn = ds.synthetic;
  syn.n_hours = get_as<std::size_t>(r, "dataset.synthetic.n_hours");
  syn.n_attributes = get_as<std::size_t>(r, "dataset.synthetic.n_attributes");
  syn.seed = get_as<std::uint64_t>(r, "dataset.synthetic.seed");
  syn.seasonal_amplitude = get_as<double>(r, "dataset.synthetic.seasonal_amplitude");
  syn.diurnal_amplitude = get_as<double>(r, "dataset.synthetic.diurnal_amplitude");
  syn.noise_sigma = get_as<double>(r, "dataset.synthetic.noise_sigma");
  syn.n_informative = get_as<std::size_t>(r, "dataset.synthetic.n_informative");
  try {
    syn.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("dataset.synthetic: ") + e.what());
  }

  auto& os = cfg.oracle;
  try {
    os.kind = oracle_kind_from_string(get_as<std::string>(r, "oracle.kind"));
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("key 'oracle.kind': ") + e.what());
  }
  if (os.kind == OracleKind::custom) {
    throw ConfigError("key 'oracle.kind': custom oracles are only available from the library");
  }
  os.cost_ms = get_as<double>(r, "oracle.cost_ms");
  if (!(os.cost_ms >= 0.0)) throw ConfigError("key 'oracle.cost_ms' must be >= 0");

  if (is_set(r, "oracle", "damping", "informative")) {
    os.informative = get_as<std::vector<std::size_t>>(r, "oracle.damping.informative");
  }
  const bool has_linear = is_set(r, "oracle", "damping", "linear");
  if (has_linear) {
    if (!os.informative) {
      throw ConfigError("key 'oracle.damping.linear' needs 'oracle.damping.informative'");
    }
    DampingCoefficients c;
    c.informative = *os.informative;
    c.linear = get_as<std::vector<double>>(r, "oracle.damping.linear");
    if (is_set(r, "oracle", "damping", "b0")) c.b0 = get_as<double>(r, "oracle.damping.b0");
    if (is_set(r, "oracle", "damping", "interactions")) {
      for (const auto& t : get_as<std::vector<std::vector<double>>>(
               r, "oracle.damping.interactions")) {
        if (t.size() != 3 || t[0] < 0 || t[1] < 0) {
          throw ConfigError("key 'oracle.damping.interactions' entries must be [i, j, coeff]");
        }
        c.interactions.push_back({static_cast<std::size_t>(t[0]),
                                  static_cast<std::size_t>(t[1]), t[2]});
      }
    }
    os.damping = std::move(c);
  } else if (is_set(r, "oracle", "damping", "interactions")) {
    throw ConfigError("key 'oracle.damping.interactions' needs 'oracle.damping.linear'");
  } else if (is_set(r, "oracle", "damping", "b0") && !os.informative) {
    throw ConfigError("key 'oracle.damping.b0' needs 'oracle.damping.informative'");
  }

  auto& tb = os.two_bus;
  tb.source_voltage = get_as<double>(r, "oracle.two_bus.source_voltage");
  tb.reactance = get_as<double>(r, "oracle.two_bus.reactance");
  tb.max_load_fraction = get_as<double>(r, "oracle.two_bus.max_load_fraction");
  if (is_set(r, "oracle", "two_bus", "load_columns")) {
    tb.load_columns = get_as<std::vector<std::size_t>>(r, "oracle.two_bus.load_columns");
    os.two_bus_columns_given = true;
  }
  if (!(tb.source_voltage > 0) || !(tb.reactance > 0)) {
    throw ConfigError("'oracle.two_bus': source_voltage and reactance must be > 0");
  }
  if (is_set(r, "oracle", "tabulated", "trace_csv")) {
    os.tabulated_trace = get_as<std::string>(r, "oracle.tabulated.trace_csv");
  }
  if (os.kind == OracleKind::tabulated && os.tabulated_trace.empty()) {
    throw ConfigError("key 'oracle.tabulated.trace_csv' is required for the tabulated oracle");
  }

  auto& rp = cfg.scan.relief;
  rp.m = get_as<std::size_t>(r, "relief.m");
  rp.k = get_as<std::size_t>(r, "relief.k");
  rp.sigma = get_as<double>(r, "relief.sigma");
  rp.batch = get_as<std::size_t>(r, "relief.batch");
  rp.rho_threshold = get_as<double>(r, "relief.rho_threshold");
  rp.epsilon_f = get_as<double>(r, "relief.epsilon_f");
  rp.window = get_as<std::size_t>(r, "relief.window");
  rp.seed = get_as<std::uint64_t>(r, "relief.seed");
  checked([&] { rp.validate(); });
  if (!r.at("relief").at("scale").is_null()) {
    cfg.scan.adjustment_scale = get_as<double>(r, "relief.scale");
    if (!(*cfg.scan.adjustment_scale > 0)) {
      throw ConfigError("key 'relief.scale' must be > 0");
    }
  }

  auto& pp = cfg.scan.pso;
  pp.swarm_size = get_as<std::size_t>(r, "pso.swarm_size");
  pp.n_iter = get_as<std::size_t>(r, "pso.n_iter");
  pp.c1 = get_as<double>(r, "pso.c1");
  pp.c2 = get_as<double>(r, "pso.c2");
  pp.w_max = get_as<double>(r, "pso.w_max");
  pp.w_min = get_as<double>(r, "pso.w_min");
  pp.sigma_t2 = get_as<double>(r, "pso.sigma_t2");
  pp.p0 = get_as<double>(r, "pso.p0");
  pp.initial_velocity = get_as<double>(r, "pso.initial_velocity");
  pp.seed = get_as<std::uint64_t>(r, "pso.seed");
  checked([&] { pp.validate(); });

  auto& ap = cfg.scan.adapt;
  ap.k_init = get_as<std::size_t>(r, "adapt.k_init");
  ap.eps_d = get_as<double>(r, "adapt.eps_d");
  ap.eps_c = get_as<double>(r, "adapt.eps_c");
  ap.max_outer = get_as<std::size_t>(r, "adapt.max_outer");
  ap.max_new_per_pass = get_as<std::size_t>(r, "adapt.max_new_per_pass");
  ap.kmeans_iterations = get_as<std::size_t>(r, "adapt.kmeans_iterations");
  checked([&] { ap.validate(); });

  cfg.scan.sample_size = get_as<std::size_t>(r, "scan.sample_size");
  cfg.scan.seed = get_as<std::uint64_t>(r, "scan.seed");
  cfg.scan.exclude_training_from_validation =
      get_as<bool>(r, "scan.exclude_training_from_validation");
  return cfg;
}

RunConfig load_run_config(const json& user) {
  return parse_run_config(merge_with_defaults(user));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

LoadedData load_dataset(const DatasetSpec& spec) {
  if (spec.source == "csv") return {load_csv(spec.csv_path), std::nullopt};
  auto year = generate_synthetic_year(spec.synthetic);
  return {std::move(year.points), std::move(year.informative)};
}

StabilityOracle build_oracle(const OracleSpec& spec, const LoadedData& data) {
  const std::size_t dim = data.points.dimension();
  StabilityOracle oracle = [&] {
    switch (spec.kind) {
      case OracleKind::damping_surrogate: {
        if (spec.damping) return StabilityOracle::damping(*spec.damping, dim);
        auto informative = spec.informative ? spec.informative : data.informative;
        if (!informative) {
          throw ConfigError(
              "key 'oracle.damping.informative' is required for CSV datasets");
        }
        return StabilityOracle::damping(
            DampingCoefficients::standard(std::move(*informative)), dim);
      }
      case OracleKind::two_bus_margin: {
        TwoBusParams p = spec.two_bus;
        if (!spec.two_bus_columns_given) {
          p.load_columns = data.points.columns_of_kind(AttributeKind::load_P);
        }
        return StabilityOracle::two_bus(std::move(p), dim);
      }
      case OracleKind::tabulated: {
        const auto trace = load_trace_csv(spec.tabulated_trace);
        std::unordered_map<std::int64_t, double> by_hour;
        for (std::size_t i = 0; i < trace.hours.size(); ++i) {
          by_hour[trace.hours[i]] = trace.lambda[i];
        }
        std::vector<double> lambda;
        lambda.reserve(data.points.size());
        for (auto h : data.points.hours()) {
          auto it = by_hour.find(h);
          if (it == by_hour.end()) {
            throw ValidationError("tabulated trace '" + spec.tabulated_trace +
                                  "' has no value for hour " + std::to_string(h));
          }
          lambda.push_back(it->second);
        }
        return StabilityOracle::tabulated(data.points.values(), std::move(lambda));
      }
      case OracleKind::custom: break;
    }
    throw ConfigError("key 'oracle.kind': unsupported");
  }();
  oracle.set_cost_ms(spec.cost_ms);
  return oracle;
}

}  // namespace gridscan::cli
