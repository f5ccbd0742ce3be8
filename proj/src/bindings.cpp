// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ramp/cli.hpp"
#include "ramp/dispatch.hpp"
#include "ramp/error.hpp"

namespace py = pybind11;
using namespace ramp;

namespace {

py::dict regime_dict(const MoeGeometry& g, const HardwareModel& hw) {
  const auto v = region_variables(g);
  const auto r = classify_regime(v, hw);
  py::dict d;
  d["rho"] = v.rho.value();
  d["lambda"] = v.lambda;
  d["kappa"] = v.kappa.value();
  d["misaligned"] = v.misaligned;
  d["regime"] = std::string(to_string(r.regime));
  d["group_m_required"] = r.group_m_required;
  d["split_k_eligible"] = r.split_k_eligible;
  d["split_k_reachable"] = r.split_k_reachable;
  d["modes"] = r.predicted_modes();
  return d;
}

MoeGeometry lookup(const std::string& name) {
  if (auto m = find_model(default_catalog(), name)) return *m;
  throw ValidationError("unknown model '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Routing-aware configuration dispatch for fused MoE kernels.";

  auto base = py::register_exception<Error>(m, "RampError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());

  py::class_<HardwareModel>(m, "HardwareModel")
      .def(py::init<>())
      .def_readwrite("sm_count", &HardwareModel::sm_count)
      .def_readwrite("smem_capacity", &HardwareModel::smem_capacity)
      .def_readwrite("l2_effective", &HardwareModel::l2_effective)
      .def_readwrite("elem_size", &HardwareModel::elem_size)
      .def("validate", &HardwareModel::validate)
      .def("group_m_threshold", &HardwareModel::group_m_threshold);

  py::class_<MoeGeometry>(m, "MoeGeometry")
      .def(py::init([](std::string name, std::int64_t E, std::int64_t N, std::int64_t K, std::int64_t top_k) {
             MoeGeometry g{std::move(name), E, N, K, top_k};
             g.validate();
             return g;
           }),
           py::arg("name"), py::arg("E"), py::arg("N"), py::arg("K"), py::arg("top_k"))
      .def_readonly("name", &MoeGeometry::name)
      .def_readonly("E", &MoeGeometry::E)
      .def_readonly("N", &MoeGeometry::N)
      .def_readonly("K", &MoeGeometry::K)
      .def_readonly("top_k", &MoeGeometry::top_k)
      .def("__repr__", [](const MoeGeometry& g) {
        return "MoeGeometry(" + g.name + ", E=" + std::to_string(g.E) + ", N=" + std::to_string(g.N) +
               ", K=" + std::to_string(g.K) + ", top_k=" + std::to_string(g.top_k) + ")";
      });

  m.def("catalog", [] { return default_catalog(); });
  m.def("model", &lookup, py::arg("name"));
  m.def("classify", &regime_dict, py::arg("geometry"), py::arg("hw") = HardwareModel{});

  py::class_<TileConfig>(m, "TileConfig")
      .def_readonly("id", &TileConfig::id)
      .def_readonly("bm", &TileConfig::bm)
      .def_readonly("bn", &TileConfig::bn)
      .def_readonly("wn", &TileConfig::wn)
      .def_readonly("stg", &TileConfig::stg)
      .def_readonly("ttn", &TileConfig::ttn)
      .def_readonly("group_m", &TileConfig::group_m)
      .def_readonly("split_k", &TileConfig::split_k)
      .def_property_readonly("label", &TileConfig::label)
      .def("__repr__", [](const TileConfig& c) { return "TileConfig(" + std::to_string(c.id) + ", " + c.label() + ")"; });

  m.def(
      "enumerate_configs",
      [](const MoeGeometry& g, const HardwareModel& hw) {
        return enumerate_configs(g, hw, classify_regime(region_variables(g), hw));
      },
      py::arg("geometry"), py::arg("hw") = HardwareModel{});

  m.def(
      "balancedness", [](std::vector<std::int64_t> c) { return balancedness(ExpertHistogram::from_counts(std::move(c))); },
      py::arg("counts"));
  m.def(
      "sample_histogram",
      [](std::int64_t E, std::int64_t S, std::int64_t top_k, double beta, std::uint64_t seed) {
        const auto s = sample_histogram(E, S, top_k, beta, seed);
        return py::make_tuple(s.histogram.counts, s.beta_achieved);
      },
      py::arg("E"), py::arg("S"), py::arg("top_k"), py::arg("beta"), py::arg("seed"),
      "Returns (counts, achieved balancedness).");
  m.def(
      "grid_size",
      [](const TileConfig& c, std::vector<std::int64_t> counts, const MoeGeometry& g) {
        return grid_size(c, ExpertHistogram::from_counts(std::move(counts)), g);
      },
      py::arg("config"), py::arg("counts"), py::arg("geometry"));

  py::class_<CostCoefficients>(m, "CostCoefficients")
      .def(py::init([](double a, double b, double c, double d, bool uses_log) {
             return CostCoefficients{a, b, c, d, uses_log, Variant::P4};
           }),
           py::arg("a") = 0.0, py::arg("b") = 0.0, py::arg("c") = 0.0, py::arg("d") = 0.0, py::arg("uses_log") = false)
      .def_readonly("a", &CostCoefficients::a)
      .def_readonly("b", &CostCoefficients::b)
      .def_readonly("c", &CostCoefficients::c)
      .def_readonly("d", &CostCoefficients::d)
      .def_readonly("uses_log", &CostCoefficients::uses_log)
      .def_property_readonly("variant", [](const CostCoefficients& k) { return std::string(to_string(k.variant)); });

  m.def("predict", &predict, py::arg("coefficients"), py::arg("grid"), py::arg("hw") = HardwareModel{});
  m.def(
      "fit",
      [](const std::vector<std::int64_t>& grids, const std::vector<double>& times, const std::string& variant,
         const HardwareModel& hw) {
        if (grids.size() != times.size()) throw ValidationError("grids and times differ in length");
        std::vector<ProfilingSample> s;
        for (std::size_t i = 0; i < grids.size(); ++i) s.push_back({0, 1, 1.0, 0, grids[i], times[i]});
        const auto r = fit(s, hw, parse_variant(variant));
        return py::make_tuple(r.coefficients, r.r_squared, r.condition_flag);
      },
      py::arg("grids"), py::arg("times"), py::arg("variant") = "p4", py::arg("hw") = HardwareModel{},
      "Returns (coefficients, r_squared, dependent_column_dropped).");

  m.def(
      "simulate_time",
      [](const TileConfig& c, std::int64_t grid, const MoeGeometry& g, std::optional<std::uint64_t> noise_seed) {
        return simulate_time_at_grid(c, grid, g, OracleParams{}, HardwareModel{}, noise_seed);
      },
      py::arg("config"), py::arg("grid"), py::arg("geometry"), py::arg("noise_seed") = py::none(),
      "Default simulator time in microseconds.");

  m.def(
      "split_k_gate", [](const MoeGeometry& g, double omega) { return split_k_gate(region_variables(g), omega); },
      py::arg("geometry"), py::arg("omega"));

  py::class_<DispatchTable>(m, "DispatchTable")
      .def(py::init([](const MoeGeometry& g, const std::string& pool_json, const std::string& coeffs_json,
                       const HardwareModel& hw) {
             return std::make_unique<DispatchTable>(g, parse_pool(pool_json), parse_store(coeffs_json), hw);
           }),
           py::arg("geometry"), py::arg("pool_json"), py::arg("coeffs_json"), py::arg("hw") = HardwareModel{})
      .def(
          "select",
          [](const DispatchTable& t, std::vector<std::int64_t> counts) {
            const auto s = t.evaluate(ExpertHistogram::from_counts(std::move(counts)));
            py::dict d;
            d["config_id"] = s.config_id;
            d["label"] = t.pool().at(static_cast<std::size_t>(s.config_id)).label();
            d["predicted_us"] = s.predicted_us;
            d["grid"] = s.grid;
            d["omega"] = s.omega;
            return d;
          },
          py::arg("counts"))
      .def_property_readonly("evaluations", &DispatchTable::evaluations);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "ramp");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
