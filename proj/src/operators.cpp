#include "ptss/operators.hpp"

#include <cmath>
#include <string>

namespace ptss {

Vector LinearOperator::matvec(const Vector& v) const {
  if (v.size() != dim()) {
    throw DimensionError("matvec: vector length " + std::to_string(v.size()) +
                         " does not match operator dimension " + std::to_string(dim()));
  }
  Vector out(dim());
  apply(v, out);
  return out;
}

DenseOperator::DenseOperator(Matrix a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() == 0) {
    throw DimensionError("DenseOperator: matrix must be square and non-empty");
  }
}

DenseOperator DenseOperator::identity(Eigen::Index n) {
  return DenseOperator(Matrix::Identity(n, n));
}

DenseOperator DenseOperator::diagonal(const Vector& d) {
  return DenseOperator(Matrix(d.asDiagonal()));
}

void DenseOperator::apply(const Vector& v, Vector& out) const {
  out.noalias() = a_ * v;
}

SplitPreconditionedOperator::SplitPreconditionedOperator(const LinearOperator& a,
                                                         const Preconditioner& m)
    : a_(a), m_(m) {
  if (a.dim() != m.dim()) {
    throw DimensionError("preconditioner dimension does not match operator");
  }
}

void SplitPreconditionedOperator::apply(const Vector& v, Vector& out) const {
  Vector w = m_.apply_inverse_sqrt(v);
  Vector aw(a_.dim());
  a_.apply(w, aw);
  out = m_.apply_inverse_sqrt(aw);
}

namespace {

// Unblocked right-looking factorization used to locate the failing pivot
// after the blocked factorization reported a problem.
long first_bad_pivot(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return static_cast<long>(j);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return -1;
}

}  // namespace

Matrix dense_cholesky_factor(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky: matrix not square");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    const long pivot = first_bad_pivot(a);
    throw NotSpdError("cholesky: matrix is not SPD (factorization failed at pivot " +
                          std::to_string(pivot) + ")",
                      pivot);
  }
  return llt.matrixL();
}

DenseOracleResult dense_cholesky_oracle(const Matrix& a, const Vector& y,
                                        Eigen::Index size_cap) {
  if (a.rows() > size_cap) {
    throw DimensionError("dense oracle: n=" + std::to_string(a.rows()) +
                         " exceeds the oracle size cap " + std::to_string(size_cap));
  }
  if (y.size() != a.rows()) throw DimensionError("dense oracle: rhs length mismatch");
  const Matrix l = dense_cholesky_factor(a);
  DenseOracleResult r;
  r.logdet = 2.0 * l.diagonal().array().log().sum();
  const auto tri = l.triangularView<Eigen::Lower>();
  const Vector w = tri.solve(y);
  r.solution = tri.transpose().solve(w);
  r.quad_form = w.squaredNorm();
  return r;
}

double condition_number_dense(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("condition number: eigensolver failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) {
    throw NotSpdError("condition number: smallest eigenvalue " + std::to_string(lmin) +
                          " is not positive",
                      0);
  }
  return lmax / lmin;
}

}  // namespace ptss
