#pragma once

#include "ptss/operators.hpp"

#include <vector>

namespace ptss {

/// M = eta I + U U^T with U from a greedy pivoted Cholesky of (A - eta I).
///
/// A thin SVD U = W diag(sigma) V^T is cached at construction, so
///   M^{-1} v     = (v - W diag(sigma^2 / (eta + sigma^2)) W^T v) / eta
///   M^{-1/2} v   = (v - W diag(1 - sqrt(eta / (eta + sigma^2))) W^T v) / sqrt(eta)
///   log|M|       = n log eta + sum_k log(1 + sigma_k^2 / eta)
/// all cost O(n r).
class LowRankShiftPreconditioner final : public Preconditioner {
 public:
  LowRankShiftPreconditioner(Matrix u, double eta);

  Eigen::Index dim() const override { return n_; }
  Eigen::Index rank() const { return factor_.cols(); }
  double eta() const { return eta_; }
  const Matrix& factor() const { return factor_; }
  const Vector& singular_values() const { return sigma_; }
  /// Pivot order chosen by the factorization (empty when built directly).
  const std::vector<Eigen::Index>& pivots() const { return pivots_; }

  Vector apply(const Vector& v) const;
  Vector apply_inverse(const Vector& v) const override;
  Vector apply_inverse_sqrt(const Vector& v) const override;
  double logdet() const override;
  Matrix dense() const;

 private:
  friend LowRankShiftPreconditioner build_pivoted_cholesky(const Matrix&, Eigen::Index, double);

  Eigen::Index n_;
  double eta_;
  Matrix factor_;
  Matrix w_;
  Vector sigma_;
  std::vector<Eigen::Index> pivots_;
};

/// Greedy pivoted Cholesky of (A - eta I): up to `rank` columns, stopping
/// early once the residual trace drops below 1e-12 of its initial value.
/// Throws NotSpdError if a residual diagonal entry goes below -1e-10.
LowRankShiftPreconditioner build_pivoted_cholesky(const Matrix& a, Eigen::Index rank, double eta);

LowRankShiftPreconditioner build_pivoted_cholesky(const LinearOperator& a, Eigen::Index rank,
                                                  double eta);

}  // namespace ptss
