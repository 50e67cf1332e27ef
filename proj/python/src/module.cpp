#include "trojdiff/config.hpp"
#include "trojdiff/experiment.hpp"
#include "trojdiff/metrics.hpp"
#include "trojdiff/process.hpp"
#include "trojdiff/sampler.hpp"
#include "trojdiff/schedule.hpp"
#include "trojdiff/trigger.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace trojdiff;

namespace {

// Python side uses one sample per row.
Mat rows_to_cols(const Mat& m) { return m.transpose(); }

ChainMode chain_mode(const std::optional<Trigger>& trigger) {
  return trigger ? ChainMode::trojan(*trigger) : ChainMode::benign();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<std::vector<double>>(), py::arg("betas"))
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def("beta", &NoiseSchedule::beta)
      .def("alpha", &NoiseSchedule::alpha)
      .def("alpha_bar", &NoiseSchedule::alpha_bar);
  m.def("linear_beta_schedule", &linear_beta_schedule, py::arg("steps") = 1000,
        py::arg("beta_1") = 1e-4, py::arg("beta_T") = 0.02);

  py::class_<TrojanCoefficients>(m, "TrojanCoefficients")
      .def("k", &TrojanCoefficients::k)
      .def_property_readonly("steps", &TrojanCoefficients::steps);
  m.def("solve_trojan_coefficients", &solve_trojan_coefficients);
  m.def("ddim_sigma", &ddim_sigma, py::arg("schedule"), py::arg("t"), py::arg("t_prev"),
        py::arg("eta"));
  m.def(
      "ddim_subsequence",
      [](int steps, int S, const std::string& stride) {
        return ddim_subsequence(steps, S, parse_stride_kind(stride)).tau;
      },
      py::arg("steps"), py::arg("S"), py::arg("stride") = "linear");

  py::class_<Trigger>(m, "Trigger")
      .def_property_readonly("delta", &Trigger::delta)
      .def_property_readonly("gamma", &Trigger::gamma)
      .def_property_readonly("mu", &Trigger::mu)
      .def_property_readonly("kind", [](const Trigger& t) { return to_string(t.kind()); });
  m.def("blend_trigger", &make_blend_trigger, py::arg("delta"), py::arg("gamma"));
  m.def("patch_trigger", &make_patch_trigger, py::arg("dim"), py::arg("coords"),
        py::arg("gamma_on"));

  m.def(
      "diffuse",
      [](const NoiseSchedule& s, const Vec& x0, int t, const Vec& eps,
         const std::optional<Trigger>& trigger) { return diffuse(s, chain_mode(trigger), x0, t, eps); },
      py::arg("schedule"), py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("trigger") = py::none());
  m.def(
      "posterior",
      [](const NoiseSchedule& s, const TrojanCoefficients& k, const Vec& x_t, const Vec& x_0, int t,
         const std::optional<Trigger>& trigger) {
        const GaussianKernel g = posterior(s, k, chain_mode(trigger), x_t, x_0, t);
        return py::make_tuple(g.mean, g.std);
      },
      py::arg("schedule"), py::arg("k"), py::arg("x_t"), py::arg("x_0"), py::arg("t"),
      py::arg("trigger") = py::none());

  m.def(
      "sample_gaussian_oracle",
      [](const NoiseSchedule& s, const Vec& mean, const Vec& std, const std::string& family,
         double eta, int S, int n, std::uint64_t seed, const std::optional<Trigger>& trigger) {
        const ChainMode mode = chain_mode(trigger);
        const GaussianOracle oracle(s, mode, mean, std);
        SamplerConfig cfg;
        cfg.family = parse_sampler_family(family);
        cfg.mode = mode;
        if (cfg.family == SamplerFamily::kDdim)
          cfg.ddim = ddim_subsequence(s.steps(), S, StrideKind::kLinear, eta);
        return sample(oracle, cfg, s, solve_trojan_coefficients(s), n, seed);
      },
      py::arg("schedule"), py::arg("mean"), py::arg("std"), py::arg("family") = "ddpm",
      py::arg("eta") = 0.0, py::arg("S") = 100, py::arg("n") = 1000, py::arg("seed") = 0,
      py::arg("trigger") = py::none());

  m.def(
      "sample_checkpoint",
      [](const std::string& path, bool trojan, const std::string& family, double eta, int S, int n,
         std::uint64_t seed, int threads) {
        const LoadedModel loaded = load_checkpoint(path);
        const NoiseSchedule s = schedule_from_meta(loaded.header);
        SamplerConfig cfg;
        cfg.family = parse_sampler_family(family);
        if (trojan) {
          const auto trigger = trigger_from_meta(loaded.header);
          if (!trigger) throw ConfigError("checkpoint " + path + " carries no trigger");
          cfg.mode = ChainMode::trojan(*trigger);
        }
        if (cfg.family == SamplerFamily::kDdim)
          cfg.ddim = ddim_subsequence(s.steps(), S, StrideKind::kLinear, eta);
        py::gil_scoped_release release;
        return sample(loaded.model, cfg, s, solve_trojan_coefficients(s), n, seed, threads);
      },
      py::arg("path"), py::arg("trojan") = false, py::arg("family") = "ddim", py::arg("eta") = 0.0,
      py::arg("S") = 100, py::arg("n") = 1000, py::arg("seed") = 0, py::arg("threads") = 1);
  py::class_<SampleResult>(m, "SampleResult")
      .def_property_readonly("samples", [](const SampleResult& r) { return rows_to_cols(r.samples); })
      .def_property_readonly("capture_t", [](const SampleResult& r) { return r.capture_t; })
      .def_property_readonly("snapshots", [](const SampleResult& r) {
        std::vector<Mat> out;
        for (const Mat& s : r.snapshots) out.push_back(rows_to_cols(s));
        return out;
      });

  m.def(
      "mse_to_target", [](const Mat& rows, const Vec& x) { return mse_to_target(rows_to_cols(rows), x); },
      py::arg("samples"), py::arg("x_target"));
  m.def(
      "knn_precision",
      [](const Mat& rows, const Mat& ref, int k) { return knn_precision(rows_to_cols(rows), rows_to_cols(ref), k); },
      py::arg("samples"), py::arg("reference"), py::arg("k") = 5);
  m.def(
      "knn_recall",
      [](const Mat& rows, const Mat& ref, int k) { return knn_recall(rows_to_cols(rows), rows_to_cols(ref), k); },
      py::arg("samples"), py::arg("reference"), py::arg("k") = 5);

  m.def(
      "validate_config", [](const std::string& text) { return parse_config(text).snapshot; },
      py::arg("text"));
  m.def(
      "run",
      [](const std::string& config_path, const std::string& dir) {
        const ExperimentConfig config = load_config(config_path);
        py::gil_scoped_release release;
        return run_experiment(config, dir);
      },
      py::arg("config"), py::arg("out"));
}
