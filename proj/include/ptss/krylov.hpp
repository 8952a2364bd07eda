#pragma once

#include "ptss/operators.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <vector>

namespace ptss {

/// Symmetric tridiagonal matrix stored as its diagonal and sub-diagonal.
struct SymTridiagonal {
  Vector diag;
  Vector offdiag;  // length diag.size() - 1

  Eigen::Index size() const { return diag.size(); }
  Matrix dense() const;
  /// Leading j x j section.
  SymTridiagonal leading(Eigen::Index j) const;
};

/// Eigenvalues of T in ascending order.
Vector ritz_values(const SymTridiagonal& t);

/// e1^T log(T) e1. Throws KrylovError if T has a non-positive Ritz value.
double e1_log_e1(const SymTridiagonal& t);

/// e1^T T^{-1} e1. Throws KrylovError if T has a non-positive Ritz value.
double e1_inverse_e1(const SymTridiagonal& t);

// ---------------------------------------------------------------------------
// Conjugate gradients

struct CgOptions {
  int max_iters = 1;
  /// Stop once ||r_j|| <= rtol * ||y||. Zero disables the test; an exactly
  /// zero residual always stops the run.
  double rtol = 0.0;
  const Preconditioner* precond = nullptr;
  /// Initial guess; zero when absent.
  std::optional<Vector> x0;
};

/// Per-iteration record of a (P)CG run.
struct CgTrace {
  Vector x0;
  std::vector<Vector> increments;     // Delta_j = x_j - x_{j-1}, j = 1..m
  std::vector<double> alphas;         // alpha_0 .. alpha_{m-1}
  std::vector<double> betas;          // beta_0 .. (m-1 or m entries)
  std::vector<double> residual_norms; // ||r_0|| .. ||r_m||
  bool converged = false;

  int m() const { return static_cast<int>(increments.size()); }

  /// x_k = x0 + sum_{j<=k} Delta_j, with Delta_j = 0 past the end of the run.
  Vector iterate(int k) const;
  /// Delta_k, or zero when the run stopped before iteration k.
  Vector increment(int k) const;
};

CgTrace cg_run(const LinearOperator& a, const Vector& y, const CgOptions& options);

/// Tridiagonal matrix of the Lanczos process underlying a CG run, built from
/// the recorded alphas and betas.
SymTridiagonal cg_to_tridiagonal(const CgTrace& trace, int j);

// ---------------------------------------------------------------------------
// Lanczos

/// Reorthogonalization window. Each new Lanczos vector is orthogonalized
/// against the last min(i_orth - 1, k) stored vectors, q_k included; i_orth = 1 keeps
/// only the three-term recurrence.
class ReorthPolicy {
 public:
  static ReorthPolicy full() { return ReorthPolicy(kFull); }
  static ReorthPolicy window(int i_orth);

  bool is_full() const { return i_orth_ == kFull; }
  int i_orth() const { return i_orth_; }
  /// Number of stored vectors used when k vectors have been generated.
  int reorth_count(int k) const;
  std::string to_string() const;
  static ReorthPolicy parse(const std::string& s);

  bool operator==(const ReorthPolicy&) const = default;

 private:
  static constexpr int kFull = -1;
  explicit ReorthPolicy(int i) : i_orth_(i) {}
  int i_orth_;
};

struct LanczosOptions {
  int steps = 1;
  ReorthPolicy reorth = ReorthPolicy::full();
  /// Iterate M^{-1/2} A M^{-1/2} instead of A.
  const Preconditioner* precond = nullptr;
  /// Breakdown when beta < tol * (running Frobenius norm of T).
  double breakdown_tol = 1e-14;
};

struct LanczosTrace {
  std::vector<double> diag;
  std::vector<double> offdiag;         // m - 1 entries
  std::deque<Vector> basis_window;     // most recent Lanczos vectors
  bool breakdown = false;

  int m() const { return static_cast<int>(diag.size()); }
  /// T_j for j <= m.
  SymTridiagonal tridiagonal(int j) const;
};

LanczosTrace lanczos_run(const LinearOperator& a, const Vector& q1, const LanczosOptions& options);

// ---------------------------------------------------------------------------

struct ConditionEstimateOptions {
  int pilot_steps = 20;
  const Preconditioner* precond = nullptr;
  std::optional<double> lambda_min_floor;
};

/// Condition-number estimate from a pilot Lanczos run with full
/// reorthogonalization: 1.05 * largest Ritz value over
/// max(0.5 * smallest Ritz value, floor).
double estimate_condition_number(const LinearOperator& a, const ConditionEstimateOptions& options,
                                 RngStream& rng);

}  // namespace ptss
