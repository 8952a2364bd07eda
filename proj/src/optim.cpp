#include "ptss/optim.hpp"

#include <cmath>

namespace ptss {

double softplus(double x) {
  if (x > 20.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw Error("softplus_inv: argument must be positive, got " + std::to_string(y));
  if (y > 20.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double chain_grad(double theta_tilde, double dl_dtheta) { return dl_dtheta * sigmoid(theta_tilde); }

HyperArray UnconstrainedParams::constrained() const {
  return {softplus(tilde[0]), softplus(tilde[1]), softplus(tilde[2])};
}

KernelSpec UnconstrainedParams::apply_to(KernelSpec base) const {
  const HyperArray c = constrained();
  base.f = c[0];
  base.l = c[1];
  base.mu = c[2];
  return base;
}

UnconstrainedParams UnconstrainedParams::from_constrained(const KernelSpec& spec, std::array<bool, 3> active) {
  UnconstrainedParams p;
  p.tilde = {softplus_inv(spec.f), softplus_inv(spec.l), softplus_inv(spec.mu)};
  p.active = active;
  return p;
}

namespace {

void check_finite(const HyperArray& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw Error("non-finite gradient for " + std::string(to_string(static_cast<Hyper>(i))) + ": " +
                  std::to_string(g[i]));
    }
  }
}

}  // namespace

void gd_step(UnconstrainedParams& params, const HyperArray& grads, double lr) {
  check_finite(grads);
  for (std::size_t i = 0; i < 3; ++i) {
    if (params.active[i]) params.tilde[i] -= lr * grads[i];
  }
}

void adam_step(UnconstrainedParams& params, const HyperArray& grads, AdamState& s) {
  check_finite(grads);
  ++s.step_count;
  const double c1 = 1.0 - std::pow(s.beta1, s.step_count);
  const double c2 = 1.0 - std::pow(s.beta2, s.step_count);
  for (std::size_t i = 0; i < 3; ++i) {
    if (!params.active[i]) continue;
    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * grads[i];
    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double m_hat = s.first_moment[i] / c1;
    const double v_hat = s.second_moment[i] / c2;
    params.tilde[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

Trajectory train(const GpModel& model, const UnconstrainedParams& init, const OptimizerConfig& cfg,
                 const EstimatorConfig* estimator, RngStream& rng) {
  if (cfg.iterations < 1) throw Error("train: iterations must be >= 1");
  Trajectory traj;
  UnconstrainedParams p = init;
  AdamState adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.eps;
  const double scale = cfg.normalize ? 1.0 / static_cast<double>(model.n()) : 1.0;

  GpModel current = model;
  for (int step = 0; step <= cfg.iterations; ++step) {
    current.spec = p.apply_to(model.spec);
    TrajectoryRecord rec;
    rec.step = step;
    rec.f = current.spec.f;
    rec.l = current.spec.l;
    rec.mu = current.spec.mu;
    try {
      double loss = 0.0;
      NlmlGradient g;
      if (estimator) {
        const NlmlEstimate e = nlml_estimate_full(current, *estimator, rng, true, step < cfg.iterations);
        loss = e.value;
        g = e.grad;
      } else {
        const NlmlExact e = nlml_exact_with_grad(current);
        loss = e.value;
        g = e.grad;
      }
      rec.loss = loss * scale;
      traj.records.push_back(rec);
      if (step == cfg.iterations) break;
      HyperArray gt{};
      for (std::size_t i = 0; i < 3; ++i) gt[i] = chain_grad(p.tilde[i], g.grads[i] * scale);
      if (cfg.kind == OptimizerKind::Gd) {
        gd_step(p, gt, cfg.lr);
      } else {
        adam_step(p, gt, adam);
      }
    } catch (const std::exception& ex) {
      traj.failed = true;
      traj.failure = "step " + std::to_string(step) + ": " + ex.what();
      break;
    }
  }
  return traj;
}

}  // namespace ptss
