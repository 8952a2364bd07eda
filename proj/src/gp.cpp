#include "ptss/gp.hpp"

#include <numbers>
#include <optional>
#include <string>

namespace ptss {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_cap(const GpModel& model, Eigen::Index cap) {
  if (model.n() > cap) {
    throw Error("exact NLML: n=" + std::to_string(model.n()) + " exceeds the oracle cap " + std::to_string(cap));
  }
}

}  // namespace

GpModel::GpModel(Dataset d, Vector y, KernelSpec s) : data(std::move(d)), labels(std::move(y)), spec(s) {
  if (labels.size() != data.n()) {
    throw DimensionError("gp model: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(data.n()) + " points");
  }
  spec.validate();
}

NlmlExact nlml_exact_with_grad(const GpModel& model, Eigen::Index size_cap) {
  check_cap(model, size_cap);
  const Eigen::Index n = model.n();
  const DenseOperator k = gram_matrix(model.spec, model.data);
  const Matrix l = dense_cholesky_factor(k.matrix());
  const auto tri = l.triangularView<Eigen::Lower>();
  const Vector alpha = tri.transpose().solve(tri.solve(model.labels));

  NlmlExact out;
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  out.value = 0.5 * (model.labels.dot(alpha) + logdet + static_cast<double>(n) * kLog2Pi);

  Matrix kinv = tri.solve(Matrix::Identity(n, n));
  kinv = tri.transpose().solve(kinv);
  for (Hyper h : kAllHypers) {
    const DenseOperator dk = gram_derivative(model.spec, model.data, h);
    const double quad = alpha.dot(dk.matrix() * alpha);
    const double tr = kinv.cwiseProduct(dk.matrix()).sum();
    out.grad[h] = -0.5 * (quad - tr);
  }
  return out;
}

NlmlValue nlml_exact(const GpModel& model, Eigen::Index size_cap) {
  check_cap(model, size_cap);
  const DenseOperator k = gram_matrix(model.spec, model.data);
  const DenseOracleResult r = dense_cholesky_oracle(k.matrix(), model.labels, size_cap);
  return {0.5 * (r.quad_form + r.logdet + static_cast<double>(model.n()) * kLog2Pi)};
}

NlmlGradient nlml_grad_exact(const GpModel& model, Eigen::Index size_cap) {
  return nlml_exact_with_grad(model, size_cap).grad;
}

GpSystem build_gp_system(const GpModel& model, Eigen::Index precond_rank) {
  GpSystem sys{gram_matrix(model.spec, model.data),
               {gram_derivative(model.spec, model.data, Hyper::F), gram_derivative(model.spec, model.data, Hyper::L),
                gram_derivative(model.spec, model.data, Hyper::Mu)},
               std::nullopt};
  if (precond_rank > 0) {
    const double eta = model.spec.f * model.spec.f * model.spec.mu;
    sys.precond.emplace(build_pivoted_cholesky(sys.k.matrix(), std::min(precond_rank, model.n()), eta));
  }
  return sys;
}

NlmlEstimate nlml_estimate_full(const GpModel& model, const GpSystem& sys, const EstimatorConfig& cfg,
                                RngStream& rng, bool want_value, bool want_grad) {
  if (sys.k.dim() != model.n()) throw DimensionError("gp system does not match the model");
  KrylovSettings settings;
  settings.precond = sys.precond ? &*sys.precond : nullptr;
  settings.reorth = cfg.reorth;
  settings.rtol = cfg.rtol;

  NlmlEstimate out;
  const Vector x = solve_estimate(sys.k, model.labels, cfg.solver, rng, settings);
  out.quad_form = model.labels.dot(x);

  if (want_value) {
    out.logdet = slq_logdet(sys.k, cfg.k_z, cfg.solver, rng, settings);
    out.value = 0.5 * (out.quad_form + out.logdet + static_cast<double>(model.n()) * kLog2Pi);
  }
  if (want_grad) {
    // Truncated: x^T dK x. TSS: x^T dK x' with a second independent draw.
    const Vector x2 = std::holds_alternative<Truncated>(cfg.solver)
                          ? x
                          : solve_estimate(sys.k, model.labels, cfg.solver, rng, settings);
    const LinearOperator* ops[] = {&sys.dk[0], &sys.dk[1], &sys.dk[2]};
    const std::vector<double> traces = hutchinson_trace_derivatives(sys.k, ops, cfg.k_z, cfg.solver, rng, settings);
    for (std::size_t i = 0; i < 3; ++i) {
      const double quad = x.dot(sys.dk[i].matrix() * x2);
      out.grad.grads[i] = -0.5 * (quad - traces[i]);
    }
  }
  return out;
}

NlmlEstimate nlml_estimate_full(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng,
                                bool want_value, bool want_grad) {
  return nlml_estimate_full(model, build_gp_system(model, cfg.precond_rank), cfg, rng, want_value, want_grad);
}

NlmlValue nlml_estimate(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng) {
  return {nlml_estimate_full(model, cfg, rng, true, false).value};
}

NlmlGradient nlml_grad_estimate(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng) {
  return nlml_estimate_full(model, cfg, rng, false, true).grad;
}

Vector sample_labels_from_prior(const KernelSpec& spec, const Dataset& data, RngStream& rng) {
  const DenseOperator k = gram_matrix(spec, data);
  const Matrix l = dense_cholesky_factor(k.matrix());
  return l.triangularView<Eigen::Lower>() * standard_normal_vector(data.n(), rng);
}

}  // namespace ptss
