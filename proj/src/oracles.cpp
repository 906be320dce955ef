#include "gridscan/oracles.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "gridscan/error.hpp"
#include "gridscan/parallel.hpp"

namespace gridscan {

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::damping_surrogate: return "damping_surrogate";
    case OracleKind::two_bus_margin: return "two_bus_margin";
    case OracleKind::tabulated: return "tabulated";
    case OracleKind::custom: return "custom";
  }
  return "custom";
}

OracleKind oracle_kind_from_string(const std::string& text) {
  if (text == "damping_surrogate") return OracleKind::damping_surrogate;
  if (text == "two_bus_margin") return OracleKind::two_bus_margin;
  if (text == "tabulated") return OracleKind::tabulated;
  if (text == "custom") return OracleKind::custom;
  throw ValidationError("unknown oracle kind '" + text + "'");
}

DampingCoefficients DampingCoefficients::standard(
    std::vector<std::size_t> informative) {
  DampingCoefficients c;
  c.b0 = 0.10;
  c.informative = std::move(informative);
  static constexpr double kLinear[] = {0.025, -0.020, 0.015, -0.012, 0.010};
  for (std::size_t i = 0; i < c.informative.size(); ++i) {
    c.linear.push_back(kLinear[i % 5] * (i < 5 ? 1.0 : 0.5));
  }
  for (std::size_t i = 0; i + 1 < c.informative.size(); ++i) {
    c.interactions.push_back({c.informative[i], c.informative[i + 1],
                              (i % 2 == 0 ? 0.010 : -0.008)});
  }
  return c;
}

void DampingCoefficients::validate(std::size_t dimension) const {
  if (linear.size() != informative.size()) {
    throw ValidationError(
        "damping coefficients: one linear coefficient per informative index "
        "is required");
  }
  auto is_informative = [&](std::size_t idx) {
    for (auto i : informative) {
      if (i == idx) return true;
    }
    return false;
  };
  for (auto i : informative) {
    if (i >= dimension) {
      throw ValidationError("damping coefficients: informative index " +
                            std::to_string(i) + " out of range");
    }
  }
  for (const auto& t : interactions) {
    if (!is_informative(t.i) || !is_informative(t.j)) {
      throw ValidationError(
          "damping coefficients: interaction terms must use informative "
          "indices");
    }
  }
  if (!std::isfinite(b0)) throw ValidationError("damping b0 must be finite");
}

double damping_surrogate(std::span<const double> point,
                         const DampingCoefficients& coeffs) {
  double lambda = coeffs.b0;
  for (std::size_t i = 0; i < coeffs.informative.size(); ++i) {
    lambda += coeffs.linear[i] * point[coeffs.informative[i]];
  }
  for (const auto& t : coeffs.interactions) {
    lambda += t.coeff * point[t.i] * point[t.j];
  }
  return lambda;
}

double two_bus_margin(double source_voltage, double reactance,
                      double base_load) {
  return source_voltage * source_voltage / (2.0 * reactance) - base_load;
}

void TwoBusParams::validate(std::size_t dimension) const {
  if (!(source_voltage > 0.0)) throw ValidationError("two-bus E must be > 0");
  if (!(reactance > 0.0)) throw ValidationError("two-bus X must be > 0");
  if (!(max_load_fraction >= 0.0)) {
    throw ValidationError("two-bus max_load_fraction must be >= 0");
  }
  for (auto c : load_columns) {
    if (c >= dimension) {
      throw ValidationError("two-bus load column " + std::to_string(c) +
                            " out of range");
    }
  }
}

double TwoBusParams::demand(std::span<const double> point) const {
  double sum = 0.0;
  std::size_t n = 0;
  if (load_columns.empty()) {
    for (double v : point) sum += v;
    n = point.size();
  } else {
    for (auto c : load_columns) sum += point[c];
    n = load_columns.size();
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  const double p_max =
      source_voltage * source_voltage / (2.0 * reactance);
  return max_load_fraction * p_max * (mean + 1.0) * 0.5;
}

StabilityOracle::StabilityOracle(OracleKind kind, Function fn)
    : kind_(kind),
      fn_(std::move(fn)),
      count_(std::make_unique<std::atomic<std::size_t>>(0)) {}

StabilityOracle StabilityOracle::damping(DampingCoefficients coeffs,
                                         std::size_t dimension) {
  coeffs.validate(dimension);
  return StabilityOracle(
      OracleKind::damping_surrogate,
      [c = std::move(coeffs), dimension](std::span<const double> p) {
        if (p.size() != dimension) {
          throw ValidationError("damping oracle: dimension mismatch");
        }
        return damping_surrogate(p, c);
      });
}

StabilityOracle StabilityOracle::two_bus(TwoBusParams params,
                                         std::size_t dimension) {
  params.validate(dimension);
  return StabilityOracle(
      OracleKind::two_bus_margin,
      [bus = std::move(params), dimension](std::span<const double> p) {
        if (p.size() != dimension) {
          throw ValidationError("two-bus oracle: dimension mismatch");
        }
        return two_bus_margin(bus.source_voltage, bus.reactance,
                              bus.demand(p));
      });
}

StabilityOracle StabilityOracle::tabulated(Matrix points,
                                           std::vector<double> lambda) {
  if (points.rows() != lambda.size() || points.rows() == 0) {
    throw ValidationError(
        "tabulated oracle: need one index per tabulated point");
  }
  return StabilityOracle(
      OracleKind::tabulated,
      [pts = std::move(points), lam = std::move(lambda)](
          std::span<const double> p) {
        if (p.size() != pts.cols()) {
          throw ValidationError("tabulated oracle: dimension mismatch");
        }
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < pts.rows(); ++r) {
          auto row = pts.row(r);
          double d = 0.0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            double diff = row[j] - p[j];
            d += diff * diff;
          }
          if (d < best_d) {
            best_d = d;
            best = r;
          }
        }
        return lam[best];
      });
}

StabilityOracle StabilityOracle::custom(Function fn) {
  if (!fn) throw ValidationError("custom oracle: empty function");
  return StabilityOracle(OracleKind::custom, std::move(fn));
}

double StabilityOracle::evaluate(std::span<const double> point) const {
  count_->fetch_add(1);
  if (cost_ms_ > 0.0) {
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::milli>(cost_ms_));
  }
  double value = 0.0;
  try {
    value = fn_(point);
  } catch (const OracleFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleFailure(std::string("oracle failed: ") + e.what());
  }
  if (!std::isfinite(value)) {
    throw OracleFailure("oracle returned a non-finite index");
  }
  return value;
}

StabilityTrace full_scan(const OperatingPointSet& data,
                         const StabilityOracle& oracle) {
  const auto start = std::chrono::steady_clock::now();
  StabilityTrace trace;
  trace.kind = oracle.kind();
  trace.hours = data.hours();
  trace.lambda.assign(data.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(data.size(), 0);
  parallel_for(data.size(), [&](std::size_t i) {
    try {
      trace.lambda[i] = oracle.evaluate(data.point(i));
    } catch (const OracleFailure&) {
      failed[i] = 1;
    }
  });
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (failed[i]) trace.failed_hours.push_back(data.hours()[i]);
  }
  trace.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return trace;
}

}  // namespace gridscan
