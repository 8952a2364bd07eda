#pragma once

#include "ptss/estimators.hpp"
#include "ptss/kernels.hpp"
#include "ptss/precond.hpp"

#include <array>
#include <optional>

namespace ptss {

struct GpModel {
  Dataset data;
  Vector labels;
  KernelSpec spec;

  GpModel(Dataset data, Vector labels, KernelSpec spec);
  Eigen::Index n() const { return data.n(); }
};

inline constexpr std::array<Hyper, 3> kAllHypers = {Hyper::F, Hyper::L, Hyper::Mu};

struct NlmlGradient {
  std::array<double, 3> grads{};

  double& operator[](Hyper h) { return grads[static_cast<std::size_t>(h)]; }
  double operator[](Hyper h) const { return grads[static_cast<std::size_t>(h)]; }
};

struct NlmlValue {
  double value = 0.0;
};

NlmlValue nlml_exact(const GpModel& model, Eigen::Index size_cap = kDefaultOracleCap);
NlmlGradient nlml_grad_exact(const GpModel& model, Eigen::Index size_cap = kDefaultOracleCap);

/// Value and gradient from one factorization.
struct NlmlExact {
  double value = 0.0;
  NlmlGradient grad;
};
NlmlExact nlml_exact_with_grad(const GpModel& model, Eigen::Index size_cap = kDefaultOracleCap);

struct EstimatorConfig {
  SolverChoice solver = Truncated{10};
  /// Probes for SLQ and for each Hutchinson trace.
  int k_z = 1;
  /// Pivoted-Cholesky rank; 0 disables preconditioning.
  Eigen::Index precond_rank = 0;
  ReorthPolicy reorth = ReorthPolicy::full();
  double rtol = 0.0;
};

struct NlmlEstimate {
  double value = 0.0;
  NlmlGradient grad;
  /// Components of the value: y^T x_hat and the log-determinant estimate.
  double quad_form = 0.0;
  double logdet = 0.0;
};

/// K_hat, its three derivatives and the optional preconditioner at the
/// model's hyperparameters.
struct GpSystem {
  DenseOperator k;
  std::array<DenseOperator, 3> dk;
  std::optional<LowRankShiftPreconditioner> precond;
};

/// eta defaults to f^2 mu.
GpSystem build_gp_system(const GpModel& model, Eigen::Index precond_rank);

/// Stochastic NLML and/or gradient. The y-solve is shared between the value
/// and the quadratic gradient term; SLQ and Hutchinson use independent probes.
NlmlEstimate nlml_estimate_full(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng,
                                bool want_value, bool want_grad);
/// Same, reusing a system built for the model (its preconditioner is used
/// as-is; cfg.precond_rank is ignored).
NlmlEstimate nlml_estimate_full(const GpModel& model, const GpSystem& system, const EstimatorConfig& cfg,
                                RngStream& rng, bool want_value, bool want_grad);
NlmlValue nlml_estimate(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng);
NlmlGradient nlml_grad_estimate(const GpModel& model, const EstimatorConfig& cfg, RngStream& rng);

/// y = L g with L the dense Cholesky factor of K_hat and g standard normal.
Vector sample_labels_from_prior(const KernelSpec& spec, const Dataset& data, RngStream& rng);

}  // namespace ptss
