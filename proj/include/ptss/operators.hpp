#pragma once

#include "ptss/common.hpp"

#include <optional>

namespace ptss {

/// Symmetric linear map R^n -> R^n. Implementations are immutable after
/// construction and `apply` must be reentrant.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Eigen::Index dim() const = 0;

  /// Writes A*v into out (out is resized by the caller).
  virtual void apply(const Vector& v, Vector& out) const = 0;

  /// Dense materialization, when the operator has one.
  virtual const Matrix* dense_form() const { return nullptr; }

  /// Checked matvec.
  Vector matvec(const Vector& v) const;
};

/// Operator backed by an explicit symmetric matrix.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix a);

  static DenseOperator identity(Eigen::Index n);
  static DenseOperator diagonal(const Vector& d);

  Eigen::Index dim() const override { return a_.rows(); }
  void apply(const Vector& v, Vector& out) const override;
  const Matrix* dense_form() const override { return &a_; }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
};

/// SPD approximation M of an operator, applied through M^{-1} and the
/// principal square root M^{-1/2}.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vector apply_inverse(const Vector& v) const = 0;
  virtual Vector apply_inverse_sqrt(const Vector& v) const = 0;
  /// Exact log|M|.
  virtual double logdet() const = 0;
};

/// The symmetrically preconditioned operator M^{-1/2} A M^{-1/2}.
class SplitPreconditionedOperator final : public LinearOperator {
 public:
  SplitPreconditionedOperator(const LinearOperator& a, const Preconditioner& m);
  Eigen::Index dim() const override { return a_.dim(); }
  void apply(const Vector& v, Vector& out) const override;

 private:
  const LinearOperator& a_;
  const Preconditioner& m_;
};

inline constexpr Eigen::Index kDefaultOracleCap = 4096;

struct DenseOracleResult {
  double logdet = 0.0;
  Vector solution;
  double quad_form = 0.0;
};

/// Exact reference via a dense Cholesky factorization: log|A|, A^{-1}y and
/// y^T A^{-1} y. Throws NotSpdError naming the failing pivot.
DenseOracleResult dense_cholesky_oracle(const Matrix& a, const Vector& y,
                                        Eigen::Index size_cap = kDefaultOracleCap);

/// Lower Cholesky factor of an SPD matrix; NotSpdError carries the pivot.
Matrix dense_cholesky_factor(const Matrix& a);

/// lambda_max / lambda_min from a full symmetric eigendecomposition.
double condition_number_dense(const Matrix& a);

}  // namespace ptss
