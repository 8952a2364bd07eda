#include "ptss/precond.hpp"

#include <cmath>
#include <string>

namespace ptss {

LowRankShiftPreconditioner::LowRankShiftPreconditioner(Matrix u, double eta)
    : n_(u.rows()), eta_(eta), factor_(std::move(u)) {
  if (!(eta_ > 0.0)) throw Error("preconditioner: shift eta must be positive");
  if (n_ < 1) throw DimensionError("preconditioner: empty factor");
  if (factor_.cols() == 0) {
    w_.resize(n_, 0);
    sigma_.resize(0);
    return;
  }
  Eigen::BDCSVD<Matrix> svd(factor_, Eigen::ComputeThinU);
  w_ = svd.matrixU();
  sigma_ = svd.singularValues();
}

Vector LowRankShiftPreconditioner::apply(const Vector& v) const {
  if (v.size() != n_) throw DimensionError("preconditioner: vector length mismatch");
  return eta_ * v + factor_ * (factor_.transpose() * v);
}

Vector LowRankShiftPreconditioner::apply_inverse(const Vector& v) const {
  if (v.size() != n_) throw DimensionError("preconditioner: vector length mismatch");
  if (rank() == 0) return v / eta_;
  const Vector s2 = sigma_.array().square();
  const Vector coeff = (s2.array() / (eta_ + s2.array())).matrix();
  const Vector proj = w_.transpose() * v;
  return (v - w_ * coeff.cwiseProduct(proj)) / eta_;
}

Vector LowRankShiftPreconditioner::apply_inverse_sqrt(const Vector& v) const {
  if (v.size() != n_) throw DimensionError("preconditioner: vector length mismatch");
  if (rank() == 0) return v / std::sqrt(eta_);
  const Vector s2 = sigma_.array().square();
  const Vector coeff = (1.0 - (eta_ / (eta_ + s2.array())).sqrt()).matrix();
  const Vector proj = w_.transpose() * v;
  return (v - w_ * coeff.cwiseProduct(proj)) / std::sqrt(eta_);
}

double LowRankShiftPreconditioner::logdet() const {
  double s = static_cast<double>(n_) * std::log(eta_);
  for (Eigen::Index k = 0; k < sigma_.size(); ++k) s += std::log1p(sigma_[k] * sigma_[k] / eta_);
  return s;
}

Matrix LowRankShiftPreconditioner::dense() const {
  Matrix m = factor_ * factor_.transpose();
  m.diagonal().array() += eta_;
  return m;
}

LowRankShiftPreconditioner build_pivoted_cholesky(const Matrix& a, Eigen::Index rank, double eta) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DimensionError("pivoted cholesky: matrix must be square");
  if (rank < 0 || rank > n) throw Error("pivoted cholesky: rank must lie in 0..n");
  if (!(eta > 0.0)) throw Error("pivoted cholesky: eta must be positive");

  Vector d = a.diagonal().array() - eta;
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  const double neg_tol = -1e-10 * scale;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] < neg_tol) {
      throw NotSpdError("pivoted cholesky: residual diagonal " + std::to_string(d[i]) + " at index " +
                            std::to_string(i) + " is negative (A - eta I is not PSD)",
                        static_cast<long>(i));
    }
  }
  const double initial_trace = d.cwiseMax(0.0).sum();

  Matrix l(n, rank);
  std::vector<Eigen::Index> pivots;
  Eigen::Index k = 0;
  for (; k < rank; ++k) {
    const double trace = d.cwiseMax(0.0).sum();
    if (!(initial_trace > 0.0) || trace < 1e-12 * initial_trace) break;
    Eigen::Index p = 0;
    const double dmax = d.maxCoeff(&p);
    if (!(dmax > 0.0)) break;
    Vector col = a.col(p);
    col[p] -= eta;
    if (k > 0) col.noalias() -= l.leftCols(k) * l.row(p).head(k).transpose();
    col /= std::sqrt(dmax);
    l.col(k) = col;
    d -= col.cwiseAbs2();
    d[p] = 0.0;
    pivots.push_back(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] < neg_tol) {
        throw NotSpdError("pivoted cholesky: residual diagonal went negative (" + std::to_string(d[i]) +
                              ") at index " + std::to_string(i) + "; operator is not PSD-consistent",
                          static_cast<long>(i));
      }
    }
  }
  LowRankShiftPreconditioner pc(Matrix(l.leftCols(k)), eta);
  pc.pivots_ = std::move(pivots);
  return pc;
}

LowRankShiftPreconditioner build_pivoted_cholesky(const LinearOperator& a, Eigen::Index rank,
                                                  double eta) {
  const Matrix* dense = a.dense_form();
  if (!dense) throw Error("pivoted cholesky: operator has no dense form for row access");
  return build_pivoted_cholesky(*dense, rank, eta);
}

}  // namespace ptss
