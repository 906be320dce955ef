#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "gridscan/clustering.hpp"
#include "gridscan/dataset.hpp"
#include "gridscan/error.hpp"
#include "gridscan/oracles.hpp"
#include "gridscan/relief.hpp"
#include "gridscan/scanning.hpp"
#include "gridscan/serialize.hpp"

namespace py = pybind11;
using namespace gridscan;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return out;
    }
    default: return py::none();
  }
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw ValidationError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

[[noreturn]] void unknown(const char* block, const std::string& key) {
  throw ValidationError(std::string("unknown ") + block + " key '" + key + "'");
}

ReliefParams relief_from(const py::dict& d) {
  ReliefParams p;
  for (auto [k, v] : d) {
    const auto key = k.cast<std::string>();
    if (key == "m") p.m = v.cast<std::size_t>();
    else if (key == "k") p.k = v.cast<std::size_t>();
    else if (key == "sigma") p.sigma = v.cast<double>();
    else if (key == "batch") p.batch = v.cast<std::size_t>();
    else if (key == "rho_threshold") p.rho_threshold = v.cast<double>();
    else if (key == "epsilon_f") p.epsilon_f = v.cast<double>();
    else if (key == "window") p.window = v.cast<std::size_t>();
    else if (key == "seed") p.seed = v.cast<std::uint64_t>();
    else unknown("relief", key);
  }
  p.validate();
  return p;
}

PsoParams pso_from(const py::dict& d) {
  PsoParams p;
  for (auto [k, v] : d) {
    const auto key = k.cast<std::string>();
    if (key == "swarm_size") p.swarm_size = v.cast<std::size_t>();
    else if (key == "n_iter") p.n_iter = v.cast<std::size_t>();
    else if (key == "c1") p.c1 = v.cast<double>();
    else if (key == "c2") p.c2 = v.cast<double>();
    else if (key == "w_max") p.w_max = v.cast<double>();
    else if (key == "w_min") p.w_min = v.cast<double>();
    else if (key == "sigma_t2") p.sigma_t2 = v.cast<double>();
    else if (key == "p0") p.p0 = v.cast<double>();
    else if (key == "initial_velocity") p.initial_velocity = v.cast<double>();
    else if (key == "seed") p.seed = v.cast<std::uint64_t>();
    else unknown("pso", key);
  }
  p.validate();
  return p;
}

AdaptiveParams adapt_from(const py::dict& d) {
  AdaptiveParams p;
  for (auto [k, v] : d) {
    const auto key = k.cast<std::string>();
    if (key == "k_init") p.k_init = v.cast<std::size_t>();
    else if (key == "eps_d") p.eps_d = v.cast<double>();
    else if (key == "eps_c") p.eps_c = v.cast<double>();
    else if (key == "max_outer") p.max_outer = v.cast<std::size_t>();
    else if (key == "max_new_per_pass") p.max_new_per_pass = v.cast<std::size_t>();
    else if (key == "kmeans_iterations") p.kmeans_iterations = v.cast<std::size_t>();
    else unknown("adapt", key);
  }
  p.validate();
  return p;
}

ScanConfig scan_config(const py::dict& relief, const py::dict& pso,
                       const py::dict& adapt, std::size_t sample_size,
                       std::uint64_t seed, std::optional<double> scale) {
  ScanConfig c;
  c.relief = relief_from(relief);
  c.pso = pso_from(pso);
  c.adapt = adapt_from(adapt);
  c.sample_size = sample_size;
  c.seed = seed;
  c.adjustment_scale = scale;
  return c;
}

py::dict model_dict(const ClusterModel& m) {
  py::dict d = to_py(to_json(m));
  d["centroids"] = to_array(m.centroids);
  return d;
}

py::dict report_dict(const ScanReport& r) {
  py::dict d = to_py(to_json(r, true));
  d["cluster_of_hour"] = r.cluster_of_hour;
  d["hours"] = r.hours;
  d["features"] = to_py(to_json(r.features));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fast stability scanning core";

  // Translators run newest first, so the base class goes in before its children.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<OracleFailure>(m, "OracleFailure", base.ptr());

  py::class_<OperatingPointSet>(m, "OperatingPointSet")
      .def_property_readonly("values", [](const OperatingPointSet& s) {
        return to_array(s.values());
      })
      .def_property_readonly("hours", &OperatingPointSet::hours)
      .def_property_readonly("names", [](const OperatingPointSet& s) {
        std::vector<std::string> out;
        for (const auto& a : s.attributes()) out.push_back(a.name);
        return out;
      })
      .def_property_readonly("kinds", [](const OperatingPointSet& s) {
        std::vector<std::string> out;
        for (const auto& a : s.attributes()) out.emplace_back(to_string(a.kind));
        return out;
      })
      .def_property_readonly("raw_min", [](const OperatingPointSet& s) {
        std::vector<double> out;
        for (const auto& a : s.attributes()) out.push_back(a.raw_min);
        return out;
      })
      .def_property_readonly("raw_max", [](const OperatingPointSet& s) {
        std::vector<double> out;
        for (const auto& a : s.attributes()) out.push_back(a.raw_max);
        return out;
      })
      .def("denormalized", [](const OperatingPointSet& s) {
        return to_array(s.denormalized());
      })
      .def("__len__", &OperatingPointSet::size)
      .def_property_readonly("dimension", &OperatingPointSet::dimension);

  m.def(
      "normalize",
      [](const Array& raw, const std::vector<std::string>& names,
         std::vector<std::int64_t> hours) {
        std::vector<Attribute> attrs;
        for (const auto& n : names) {
          attrs.push_back({n, infer_attribute_kind(n), 0.0, 0.0});
        }
        return normalize(to_matrix(raw), std::move(attrs), std::move(hours));
      },
      py::arg("raw"), py::arg("names"), py::arg("hours") = std::vector<std::int64_t>{},
      "Min-max normalize each column onto [-1, 1].");
  m.def("load_csv", [](const std::string& path) { return load_csv(path); },
        py::arg("path"));
  m.def(
      "generate_synthetic_year",
      [](std::size_t n_hours, std::size_t n_attributes, std::uint64_t seed,
         double seasonal, double diurnal, double noise, std::size_t n_informative) {
        SyntheticYearConfig c;
        c.n_hours = n_hours;
        c.n_attributes = n_attributes;
        c.seed = seed;
        c.seasonal_amplitude = seasonal;
        c.diurnal_amplitude = diurnal;
        c.noise_sigma = noise;
        c.n_informative = n_informative;
        auto year = generate_synthetic_year(c);
        return py::make_tuple(std::move(year.points), year.informative);
      },
      py::arg("n_hours") = 8760, py::arg("n_attributes") = 20, py::arg("seed") = 1,
      py::arg("seasonal_amplitude") = 0.5, py::arg("diurnal_amplitude") = 0.35,
      py::arg("noise_sigma") = 0.25, py::arg("n_informative") = 3,
      "Returns (OperatingPointSet, informative attribute indices).");

  py::class_<StabilityOracle>(m, "StabilityOracle")
      .def_static(
          "damping",
          [](std::vector<std::size_t> informative, std::size_t dimension) {
            return StabilityOracle::damping(
                DampingCoefficients::standard(std::move(informative)), dimension);
          },
          py::arg("informative"), py::arg("dimension"))
      .def_static(
          "two_bus",
          [](std::size_t dimension, double e, double x,
             std::vector<std::size_t> load_columns, double max_load_fraction) {
            TwoBusParams p;
            p.source_voltage = e;
            p.reactance = x;
            p.load_columns = std::move(load_columns);
            p.max_load_fraction = max_load_fraction;
            return StabilityOracle::two_bus(std::move(p), dimension);
          },
          py::arg("dimension"), py::arg("source_voltage") = 1.0,
          py::arg("reactance") = 0.5,
          py::arg("load_columns") = std::vector<std::size_t>{},
          py::arg("max_load_fraction") = 0.9)
      .def_static(
          "tabulated",
          [](const Array& points, const Array& lambda) {
            return StabilityOracle::tabulated(to_matrix(points), to_vector(lambda));
          },
          py::arg("points"), py::arg("lambda_"))
      .def_static(
          "custom",
          [](py::function fn) {
            auto holder = std::make_shared<py::function>(std::move(fn));
            return StabilityOracle::custom([holder](std::span<const double> x) {
              py::gil_scoped_acquire gil;
              py::array_t<double> arr(x.size());
              std::copy(x.begin(), x.end(), arr.mutable_data());
              return (*holder)(arr).cast<double>();
            });
          },
          py::arg("fn"), "Wraps a Python callable point -> float.")
      .def("evaluate",
           [](const StabilityOracle& o, const Array& point) {
             const auto v = to_vector(point);
             py::gil_scoped_release nogil;
             return o.evaluate(v);
           })
      .def_property_readonly("eval_count", &StabilityOracle::eval_count)
      .def("reset_count", &StabilityOracle::reset_count)
      .def_property("cost_ms", &StabilityOracle::cost_ms,
                    &StabilityOracle::set_cost_ms)
      .def_property_readonly("kind", [](const StabilityOracle& o) {
        return to_string(o.kind());
      });

  m.def("two_bus_margin", &two_bus_margin, py::arg("source_voltage"),
        py::arg("reactance"), py::arg("base_load"));

  m.def(
      "full_scan",
      [](const OperatingPointSet& data, const StabilityOracle& oracle) {
        StabilityTrace t;
        {
          py::gil_scoped_release nogil;
          t = full_scan(data, oracle);
        }
        return to_py(to_json(t));
      },
      py::arg("data"), py::arg("oracle"));

  m.def(
      "select_features",
      [](const OperatingPointSet& data, const StabilityOracle& oracle,
         const py::dict& relief, std::optional<double> scale) {
        const auto params = relief_from(relief);
        FeatureReport r;
        {
          py::gil_scoped_release nogil;
          r = select_features(data, oracle, params, scale);
        }
        return to_py(to_json(r));
      },
      py::arg("data"), py::arg("oracle"), py::arg("relief") = py::dict(),
      py::arg("scale") = py::none());

  m.def(
      "weighted_distance",
      [](const Array& x, const Array& y, const Array& w) {
        return weighted_distance(to_vector(x), to_vector(y),
                                 DistanceWeights(to_vector(w)));
      },
      py::arg("x"), py::arg("y"), py::arg("weights"));

  m.def(
      "kmeans",
      [](const Array& data, const Array& initial, const Array& w,
         std::size_t max_iterations) {
        const auto r = kmeans(to_matrix(data), to_matrix(initial),
                              DistanceWeights(to_vector(w)), max_iterations);
        py::dict d = model_dict(r.model);
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["empty_clusters"] = r.empty_clusters;
        d["smse_trace"] = r.smse_trace;
        d["sse_trace"] = r.sse_trace;
        return d;
      },
      py::arg("data"), py::arg("initial"), py::arg("weights"),
      py::arg("max_iterations") = kDefaultKMeansIterations);

  m.def(
      "self_adaptive_pso_kmeans",
      [](const Array& data, const Array& w, const py::dict& pso,
         const py::dict& adapt) {
        const auto p = pso_from(pso);
        const auto a = adapt_from(adapt);
        const auto X = to_matrix(data);
        const DistanceWeights weights(to_vector(w));
        AdaptiveResult r;
        {
          py::gil_scoped_release nogil;
          r = self_adaptive_pso_kmeans(X, weights, p, a);
        }
        py::dict d = model_dict(r.model);
        d["converged"] = r.converged;
        d["k_init"] = r.k_init;
        d["outer_passes"] = r.outer_passes;
        d["gbest_history"] = r.gbest_history;
        d["first_iteration_smse"] = r.first_iteration_smse;
        return d;
      },
      py::arg("data"), py::arg("weights"), py::arg("pso") = py::dict(),
      py::arg("adapt") = py::dict());

  m.def(
      "fast_scan",
      [](const OperatingPointSet& data, const StabilityOracle& oracle,
         const py::dict& relief, const py::dict& pso, const py::dict& adapt,
         std::size_t sample_size, std::uint64_t seed,
         std::optional<double> scale, bool validate_sample) {
        const auto cfg = scan_config(relief, pso, adapt, sample_size, seed, scale);
        ScanReport r;
        {
          py::gil_scoped_release nogil;
          r = fast_scan(data, oracle, cfg);
          if (validate_sample) {
            r.validation = validate(r, data, oracle, cfg.sample_size, cfg.seed,
                                    r.features.training_rows,
                                    r.features.training_rows,
                                    r.features.training_lambda);
          }
        }
        return report_dict(r);
      },
      py::arg("data"), py::arg("oracle"), py::arg("relief") = py::dict(),
      py::arg("pso") = py::dict(), py::arg("adapt") = py::dict(),
      py::arg("sample_size") = 500, py::arg("seed") = 2024,
      py::arg("scale") = py::none(), py::arg("validate") = true,
      "Feature selection, clustering and centroid-only oracle calls. "
      "oracle_evaluations in the result excludes the validation sample.");

  m.def(
      "compare_full_vs_fast",
      [](const OperatingPointSet& data, const StabilityOracle& oracle,
         const py::dict& relief, const py::dict& pso, const py::dict& adapt,
         std::size_t sample_size, std::uint64_t seed, std::optional<double> scale) {
        const auto cfg = scan_config(relief, pso, adapt, sample_size, seed, scale);
        ScanReport r;
        {
          py::gil_scoped_release nogil;
          r = compare_full_vs_fast(data, oracle, cfg);
        }
        return report_dict(r);
      },
      py::arg("data"), py::arg("oracle"), py::arg("relief") = py::dict(),
      py::arg("pso") = py::dict(), py::arg("adapt") = py::dict(),
      py::arg("sample_size") = 500, py::arg("seed") = 2024,
      py::arg("scale") = py::none());

  m.def("total_demand", &total_demand, py::arg("data"));
  m.def(
      "worst_case_analysis",
      [](std::vector<std::int64_t> hours, std::vector<double> lambda,
         std::vector<double> demand) {
        StabilityTrace t;
        t.hours = std::move(hours);
        t.lambda = std::move(lambda);
        return to_py(to_json(worst_case_analysis(t, demand)));
      },
      py::arg("hours"), py::arg("lambda_"), py::arg("demand"));
}
