#include "ptss/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ptss;

namespace {

KernelSpec make_spec(const std::string& kernel, double f, double l, double mu) {
  KernelSpec s{parse_kernel_family(kernel), f, l, mu};
  s.validate();
  return s;
}

TruncationDistribution make_dist(const std::string& spec, int i_min, int i_max, double kappa) {
  return DistributionSpec::parse(spec).realize(i_min, i_max, kappa);
}

std::optional<LowRankShiftPreconditioner> maybe_precond(const Matrix& k, Eigen::Index rank, double eta) {
  if (rank <= 0) return std::nullopt;
  return build_pivoted_cholesky(k, rank, eta);
}

ExperimentConfig config_from(const std::string& experiment, const std::map<std::string, std::string>& settings,
                             bool full_scale) {
  ExperimentConfig c = default_config(parse_experiment(experiment), full_scale);
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
  return c;
}

}  // namespace

PYBIND11_MODULE(_ptss, m) {
  m.doc() = "Truncated single-sample Krylov estimators for Gaussian-process training";

  py::register_exception<Error>(m, "PtssError", PyExc_RuntimeError);

  m.def(
      "gram_matrix",
      [](const Matrix& x, const std::string& kernel, double f, double l, double mu) {
        return gram_matrix(make_spec(kernel, f, l, mu), Dataset(x)).matrix();
      },
      py::arg("x"), py::arg("kernel") = "rbf", py::arg("f") = 1.0, py::arg("l") = 1.0, py::arg("mu") = 0.01);

  m.def(
      "gram_derivative",
      [](const Matrix& x, const std::string& hyper, const std::string& kernel, double f, double l, double mu) {
        return gram_derivative(make_spec(kernel, f, l, mu), Dataset(x), parse_hyper(hyper)).matrix();
      },
      py::arg("x"), py::arg("hyper"), py::arg("kernel") = "rbf", py::arg("f") = 1.0, py::arg("l") = 1.0,
      py::arg("mu") = 0.01);

  m.def(
      "dense_oracle",
      [](const Matrix& a, const Vector& y) {
        const DenseOracleResult r = dense_cholesky_oracle(a, y);
        return py::dict(py::arg("logdet") = r.logdet, py::arg("solution") = r.solution,
                        py::arg("quad_form") = r.quad_form);
      },
      py::arg("a"), py::arg("y"));

  m.def(
      "truncation_pmf",
      [](const std::string& spec, int i_min, int i_max, double kappa) {
        return make_dist(spec, i_min, i_max, kappa).pmf();
      },
      py::arg("spec"), py::arg("i_min"), py::arg("i_max"), py::arg("kappa") = 1.0,
      "Probabilities of Q = i_min..i_max for 'exp:<c>', 'geom', 'gamma-opt-solve', ...");

  m.def(
      "gamma_factor",
      [](const std::vector<double>& pmf, int i_min, const std::string& flavor, double kappa) {
        return gamma_factor(TruncationDistribution(i_min, pmf), parse_flavor(flavor), kappa).value;
      },
      py::arg("pmf"), py::arg("i_min"), py::arg("flavor"), py::arg("kappa"));

  m.def(
      "tss_solve",
      [](const Matrix& a, const Vector& y, int i_min, int i_max, const std::string& dist, std::uint64_t seed,
         Eigen::Index precond_rank, double eta) {
        const auto pc = maybe_precond(a, precond_rank, eta);
        KrylovSettings ks;
        ks.precond = pc ? &*pc : nullptr;
        RngStream rng(seed);
        const TssSolveResult r = tss_solve(DenseOperator(a), y, make_dist(dist, i_min, i_max, 1.0), rng, ks);
        return py::make_tuple(r.estimate, r.sampled_q);
      },
      py::arg("a"), py::arg("y"), py::arg("i_min"), py::arg("i_max"), py::arg("dist") = "exp:0.5",
      py::arg("seed") = 0, py::arg("precond_rank") = 0, py::arg("eta") = 1.0,
      "One TSS draw of A^{-1} y; returns (estimate, sampled Q).");

  m.def(
      "cg_iterate",
      [](const Matrix& a, const Vector& y, int m_iters) {
        CgOptions o;
        o.max_iters = m_iters;
        return cg_run(DenseOperator(a), y, o).iterate(m_iters);
      },
      py::arg("a"), py::arg("y"), py::arg("m"));

  m.def(
      "slq_logdet",
      [](const Matrix& a, int k_z, int m_steps, std::uint64_t seed, Eigen::Index precond_rank, double eta) {
        const auto pc = maybe_precond(a, precond_rank, eta);
        KrylovSettings ks;
        ks.precond = pc ? &*pc : nullptr;
        RngStream rng(seed);
        return slq_logdet(DenseOperator(a), k_z, Truncated{m_steps}, rng, ks);
      },
      py::arg("a"), py::arg("k_z"), py::arg("m"), py::arg("seed") = 0, py::arg("precond_rank") = 0,
      py::arg("eta") = 1.0);

  m.def(
      "nlml_exact",
      [](const Matrix& x, const Vector& y, const std::string& kernel, double f, double l, double mu) {
        const NlmlExact e = nlml_exact_with_grad(GpModel(Dataset(x), y, make_spec(kernel, f, l, mu)));
        return py::make_tuple(e.value, e.grad.grads);
      },
      py::arg("x"), py::arg("y"), py::arg("kernel") = "rbf", py::arg("f") = 1.0, py::arg("l") = 1.0,
      py::arg("mu") = 0.01, "Returns (value, [d/df, d/dl, d/dmu]).");

  m.def(
      "nlml_estimate",
      [](const Matrix& x, const Vector& y, const std::string& kernel, double f, double l, double mu,
         const std::string& method, int i_min, int i_max, const std::string& dist, int k_z, Eigen::Index precond_rank,
         std::uint64_t seed) {
        const GpModel model(Dataset(x), y, make_spec(kernel, f, l, mu));
        const MethodSpec ms = MethodSpec::parse(method);
        if (ms.exact) throw Error("use nlml_exact for the exact method");
        const TruncationDistribution td = make_dist(dist, i_min, i_max, 1.0);
        EstimatorConfig cfg;
        cfg.solver = ms.tss ? SolverChoice(Tss{td}) : SolverChoice(Truncated{ms.resolve_m(td)});
        cfg.k_z = k_z;
        cfg.precond_rank = ms.precond ? precond_rank : 0;
        RngStream rng(seed);
        const NlmlEstimate e = nlml_estimate_full(model, cfg, rng, true, true);
        return py::make_tuple(e.value, e.grad.grads);
      },
      py::arg("x"), py::arg("y"), py::arg("kernel") = "rbf", py::arg("f") = 1.0, py::arg("l") = 1.0,
      py::arg("mu") = 0.01, py::arg("method") = "NP-TSS", py::arg("i_min") = 5, py::arg("i_max") = 15,
      py::arg("dist") = "exp:0.5", py::arg("k_z") = 1, py::arg("precond_rank") = 64, py::arg("seed") = 0);

  m.def("franke", &franke, py::arg("x"), py::arg("y"));

  m.def(
      "default_config",
      [](const std::string& experiment, bool full_scale) {
        std::map<std::string, std::string> out;
        for (const auto& [k, v] : config_echo(default_config(parse_experiment(experiment), full_scale))) out[k] = v;
        return out;
      },
      py::arg("experiment"), py::arg("full_scale") = false);

  m.def(
      "run_experiment",
      [](const std::string& experiment, const std::map<std::string, std::string>& settings, bool full_scale) {
        const ExperimentConfig c = config_from(experiment, settings, full_scale);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        return render_csv(config_echo(c), to_table(r));
      },
      py::arg("experiment"), py::arg("settings") = std::map<std::string, std::string>{},
      py::arg("full_scale") = false, "Runs an experiment and returns the CSV text the CLI would write.");
}
