#pragma once

#include "ptss/gp.hpp"

#include <array>
#include <string>
#include <vector>

namespace ptss {

double softplus(double x);
/// Inverse of softplus; throws for y <= 0.
double softplus_inv(double y);
double sigmoid(double x);
/// dL/dtheta_tilde given dL/dtheta at theta = softplus(theta_tilde).
double chain_grad(double theta_tilde, double dl_dtheta);

using HyperArray = std::array<double, 3>;

struct UnconstrainedParams {
  HyperArray tilde{};
  std::array<bool, 3> active{true, true, true};

  double& operator[](Hyper h) { return tilde[static_cast<std::size_t>(h)]; }
  double operator[](Hyper h) const { return tilde[static_cast<std::size_t>(h)]; }
  bool is_active(Hyper h) const { return active[static_cast<std::size_t>(h)]; }

  /// softplus of every entry.
  HyperArray constrained() const;
  /// Copy of `base` with f, l, mu replaced by their constrained values.
  KernelSpec apply_to(KernelSpec base) const;
  static UnconstrainedParams from_constrained(const KernelSpec& spec, std::array<bool, 3> active = {true, true, true});
};

struct AdamState {
  HyperArray first_moment{};
  HyperArray second_moment{};
  int step_count = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Updates active entries only. Gradients are in the unconstrained space.
/// Both throw on non-finite gradients.
void gd_step(UnconstrainedParams& params, const HyperArray& grads, double lr);
void adam_step(UnconstrainedParams& params, const HyperArray& grads, AdamState& state);

enum class OptimizerKind { Gd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Gd;
  double lr = 0.1;
  int iterations = 100;
  /// Optimize L / n instead of L.
  bool normalize = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrajectoryRecord {
  int step = 0;
  double f = 0.0;
  double l = 0.0;
  double mu = 0.0;
  /// Loss at (f, l, mu) as seen by the optimizer (exact or estimated; scaled
  /// by 1/n when normalized).
  double loss = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  bool failed = false;
  std::string failure;
};

/// Runs `cfg.iterations` steps from `init`. With `estimator == nullptr` the
/// exact dense gradient is used. Records hold the parameters before each step
/// plus one final record after the last step.
Trajectory train(const GpModel& model, const UnconstrainedParams& init, const OptimizerConfig& cfg,
                 const EstimatorConfig* estimator, RngStream& rng);

}  // namespace ptss
