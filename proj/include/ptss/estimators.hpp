#pragma once

#include "ptss/krylov.hpp"
#include "ptss/truncation.hpp"

#include <span>
#include <variant>
#include <vector>

namespace ptss {

/// Krylov settings shared by every estimator call.
struct KrylovSettings {
  /// When set, CG runs become PCG and Lanczos runs iterate M^{-1/2} A M^{-1/2}.
  const Preconditioner* precond = nullptr;
  ReorthPolicy reorth = ReorthPolicy::full();
  /// CG relative-residual stop; increments past convergence are exactly zero.
  double rtol = 0.0;
};

// ---------------------------------------------------------------------------
// Truncated single-sample estimators

struct TssSolveResult {
  Vector estimate;
  int sampled_q = 0;
  int iterations_run = 0;
  /// The deterministic iterate this estimator is unbiased for (i_max).
  int target_iteration = 0;
  bool converged = false;
};

/// x_{i_min-1} + (x_Q - x_{Q-1}) / P(Q), read off a CG trace that covers
/// at least Q iterations (or converged earlier).
Vector tss_solve_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q);

/// Draws Q and runs exactly Q (P)CG iterations from x0 = 0.
TssSolveResult tss_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist,
                         RngStream& rng, const KrylovSettings& settings = {});

struct TssScalarResult {
  double estimate = 0.0;
  int sampled_q = 0;
  double probe_norm_sq = 0.0;
  bool breakdown = false;
};

/// s_{i_min-1} + (s_Q - s_{Q-1}) / P(Q) for a sequence s_1, s_2, ... with
/// s_0 = 0; entries past the end of `s` repeat the last one.
double tss_scalar_from_sequence(std::span<const double> s, const TruncationDistribution& dist, int q);

/// TSS estimate of z^T log(A) z / ||z||^2 from Lanczos quadrature started at
/// z / ||z||. With a preconditioner the target is the preconditioned operator.
TssScalarResult tss_logqf(const LinearOperator& a, const Vector& z, const TruncationDistribution& dist,
                          RngStream& rng, const KrylovSettings& settings = {});

/// s_j = e1^T log(T_j) e1 for j = 1..steps (constant after a breakdown).
std::vector<double> lanczos_log_sequence(const LinearOperator& a, const Vector& z, int steps,
                                         const KrylovSettings& settings = {});

/// s_j = ||y||^2 e1^T T_j^{-1} e1, the Lanczos form of y^T x_j. With a
/// preconditioner the run starts from M^{-1/2} y, so s_j still targets
/// y^T A^{-1} y. With settings.rtol > 0 the sequence is held constant once
/// the relative residual of the implied iterate drops below rtol.
std::vector<double> lanczos_quad_form_sequence(const LinearOperator& a, const Vector& y, int steps,
                                               const KrylovSettings& settings = {});

// ---------------------------------------------------------------------------
// Classical randomized-truncation baselines

/// Delta_Q / P(Q); the distribution must start at 1.
Vector ss_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q);
/// sum_{i<=Q} Delta_i / P(Q >= i).
Vector rr_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q);

Vector ss_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist, RngStream& rng,
                const KrylovSettings& settings = {});
Vector rr_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist, RngStream& rng,
                const KrylovSettings& settings = {});

// ---------------------------------------------------------------------------
// Exact moments and bounds

struct VectorMoments {
  Vector mean;
  double variance = 0.0;  // E ||X - EX||^2
};

struct ScalarMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean sum_{i<=i_max} Delta_i and variance
/// sum_j ||Delta_j||^2 / P(Q=j) - ||sum_j Delta_j||^2 (j over the support).
/// `deltas[k]` is Delta_{k+1}; at least i_max entries are required.
VectorMoments tss_exact_moments(const std::vector<Vector>& deltas, const TruncationDistribution& dist);
ScalarMoments tss_exact_moments(const std::vector<double>& deltas, const TruncationDistribution& dist);

/// Increments Delta_1..Delta_count of a CG trace, zero-padded past convergence.
std::vector<Vector> padded_increments(const CgTrace& trace, int count);

enum class BoundFlavor { Solve, LogQF, SolveOptimal, LogQFOptimal };

struct VarianceBound {
  double bound = 0.0;
  double kappa = 1.0;
  double gamma = 0.0;
  BoundFlavor flavor = BoundFlavor::Solve;
};

/// Solve: 16 kappa^2 ||x||^2 Gamma. LogQF: 16 (sqrt(kappa+1)+1)^2 log^2(2 kappa) Gamma
/// (x_norm_sq is ignored).
VarianceBound variance_bound(Flavor flavor, double kappa, double x_norm_sq, const GammaFactor& gamma);

/// Bound under the Gamma-optimal distribution, written with the simplified
/// prefactors:
///   Solve: 4 kappa^2 ||x||^2 rho^{2(i1-1)} (rho^{i2-i1+1} - 1)^2 (sqrt(kappa)+1)^2
///   LogQF: (sqrt(kappa+1)+1)^6 log^2(2 kappa) / (kappa+1) rho^{4(i1-1)} (rho^{2(i2-i1+1)} - 1)^2
VarianceBound variance_bound_optimal(Flavor flavor, double kappa, double x_norm_sq, int i_min, int i_max);

// ---------------------------------------------------------------------------
// Composite estimators

/// Deterministic truncation after m iterations.
struct Truncated {
  int m = 1;
};

/// Truncated single-sample with the given distribution.
struct Tss {
  TruncationDistribution dist;
};

using SolverChoice = std::variant<Truncated, Tss>;

/// Solution estimate for A x = y from the chosen solver.
Vector solve_estimate(const LinearOperator& a, const Vector& y, const SolverChoice& solver, RngStream& rng,
                      const KrylovSettings& settings = {});

/// Stochastic Lanczos quadrature: mean over k_z standard-normal probes of
/// ||z||^2 s(z); plus log|M| when preconditioned.
double slq_logdet(const LinearOperator& a, int k_z, const SolverChoice& solver, RngStream& rng,
                  const KrylovSettings& settings = {});

/// y^T x_hat.
double quad_form_estimate(const LinearOperator& a, const Vector& y, const SolverChoice& solver,
                          RngStream& rng, const KrylovSettings& settings = {});

/// Truncated: x_m^T dA x_m. TSS: x^T dA x' for two independent draws.
double quad_form_grad_estimate(const LinearOperator& a, const LinearOperator& d_a, const Vector& y,
                               const SolverChoice& solver, RngStream& rng, const KrylovSettings& settings = {});

/// Hutchinson estimate of tr(A^{-1} dA) with standard-normal probes and
/// solution estimates from the chosen solver.
double hutchinson_trace_derivative(const LinearOperator& a, const LinearOperator& d_a, int k_z,
                                   const SolverChoice& solver, RngStream& rng,
                                   const KrylovSettings& settings = {});

/// Same as above for several derivative operators sharing probes and solves.
std::vector<double> hutchinson_trace_derivatives(const LinearOperator& a,
                                                 std::span<const LinearOperator* const> d_as, int k_z,
                                                 const SolverChoice& solver, RngStream& rng,
                                                 const KrylovSettings& settings = {});

}  // namespace ptss
