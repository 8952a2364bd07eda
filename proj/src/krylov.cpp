#include "ptss/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ptss {

Matrix SymTridiagonal::dense() const {
  const Eigen::Index n = diag.size();
  Matrix t = Matrix::Zero(n, n);
  t.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    t(i + 1, i) = offdiag[i];
    t(i, i + 1) = offdiag[i];
  }
  return t;
}

SymTridiagonal SymTridiagonal::leading(Eigen::Index j) const {
  if (j < 1 || j > size()) throw DimensionError("tridiagonal: leading section out of range");
  return {diag.head(j), offdiag.head(j - 1)};
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> tridiagonal_eigen(const SymTridiagonal& t, int options) {
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  if (t.size() == 1) {
    // computeFromTridiagonal needs a (possibly empty) subdiagonal; handle 1x1 directly.
    Matrix m(1, 1);
    m(0, 0) = t.diag[0];
    es.compute(m, options);
  } else {
    es.computeFromTridiagonal(t.diag, t.offdiag, options);
    // The implicit QR sweep occasionally stalls on near-duplicate Ritz values
    // left by lost orthogonality; the dense path reduces the matrix afresh.
    if (es.info() != Eigen::Success) es.compute(t.dense(), options);
  }
  if (es.info() != Eigen::Success) throw Error("tridiagonal eigensolver failed");
  return es;
}

template <class F>
double e1_function_e1(const SymTridiagonal& t, F f, const char* name) {
  const auto es = tridiagonal_eigen(t, Eigen::ComputeEigenvectors);
  const Vector& theta = es.eigenvalues();
  if (theta.minCoeff() <= 0.0) {
    throw KrylovError(std::string(name) + ": non-positive Ritz value in T_" +
                          std::to_string(t.size()),
                      static_cast<int>(t.size()));
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double v = es.eigenvectors()(0, k);
    s += v * v * f(theta[k]);
  }
  return s;
}

}  // namespace

Vector ritz_values(const SymTridiagonal& t) {
  return tridiagonal_eigen(t, Eigen::EigenvaluesOnly).eigenvalues();
}

double e1_log_e1(const SymTridiagonal& t) {
  return e1_function_e1(t, [](double x) { return std::log(x); }, "log quadrature");
}

double e1_inverse_e1(const SymTridiagonal& t) {
  return e1_function_e1(t, [](double x) { return 1.0 / x; }, "inverse quadrature");
}

// ---------------------------------------------------------------------------

Vector CgTrace::iterate(int k) const {
  Vector x = x0;
  const int upto = std::min(k, m());
  for (int j = 0; j < upto; ++j) x += increments[j];
  return x;
}

Vector CgTrace::increment(int k) const {
  if (k < 1) throw DimensionError("increment index must be >= 1");
  if (k > m()) return Vector::Zero(x0.size());
  return increments[k - 1];
}

CgTrace cg_run(const LinearOperator& a, const Vector& y, const CgOptions& opt) {
  const Eigen::Index n = a.dim();
  if (y.size() != n) throw DimensionError("cg: rhs length does not match operator");
  if (opt.max_iters < 1) throw Error("cg: max_iters must be >= 1");
  if (opt.precond && opt.precond->dim() != n) throw DimensionError("cg: preconditioner dimension mismatch");

  CgTrace tr;
  tr.x0 = opt.x0 ? *opt.x0 : Vector::Zero(n);
  if (tr.x0.size() != n) throw DimensionError("cg: x0 length does not match operator");

  Vector r = y;
  if (opt.x0) r -= a.matvec(tr.x0);
  const double ynorm = y.norm();
  tr.residual_norms.push_back(r.norm());
  if (r.squaredNorm() == 0.0) {
    tr.converged = true;
    return tr;
  }

  auto precondition = [&](const Vector& v) { return opt.precond ? opt.precond->apply_inverse(v) : v; };
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  Vector ap(n);

  tr.increments.reserve(opt.max_iters);
  for (int j = 0; j < opt.max_iters; ++j) {
    a.apply(p, ap);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      throw KrylovError("cg: p^T A p = " + std::to_string(pap) + " <= 0 at iteration " +
                            std::to_string(j) + " (operator not positive definite)",
                        j);
    }
    const double alpha = rz / pap;
    if (!(alpha > 0.0)) {
      throw KrylovError("cg: non-positive step length at iteration " + std::to_string(j), j);
    }
    tr.alphas.push_back(alpha);
    tr.increments.push_back(alpha * p);
    r -= alpha * ap;
    const double rnorm = r.norm();
    tr.residual_norms.push_back(rnorm);

    z = precondition(r);
    const double rz_next = r.dot(z);
    if (rz_next == 0.0) {
      tr.converged = true;
      break;
    }
    const double beta = rz_next / rz;
    tr.betas.push_back(beta);
    if (opt.rtol > 0.0 && rnorm <= opt.rtol * ynorm) {
      tr.converged = true;
      break;
    }
    rz = rz_next;
    p = z + beta * p;
  }
  return tr;
}

SymTridiagonal cg_to_tridiagonal(const CgTrace& trace, int j) {
  if (j < 1 || j > trace.m()) {
    throw DimensionError("cg_to_tridiagonal: j=" + std::to_string(j) + " outside 1.." +
                         std::to_string(trace.m()));
  }
  if (static_cast<int>(trace.betas.size()) < j - 1) {
    throw DimensionError("cg_to_tridiagonal: not enough recorded betas");
  }
  SymTridiagonal t{Vector(j), Vector(j - 1)};
  const auto& al = trace.alphas;
  const auto& be = trace.betas;
  t.diag[0] = 1.0 / al[0];
  for (int k = 1; k < j; ++k) t.diag[k] = 1.0 / al[k] + be[k - 1] / al[k - 1];
  for (int k = 0; k + 1 < j; ++k) t.offdiag[k] = std::sqrt(be[k]) / al[k];
  return t;
}

// ---------------------------------------------------------------------------

ReorthPolicy ReorthPolicy::window(int i_orth) {
  if (i_orth < 1) throw Error("reorthogonalization window must be >= 1");
  return ReorthPolicy(i_orth);
}

int ReorthPolicy::reorth_count(int k) const {
  if (is_full()) return k;
  return std::min(i_orth_ - 1, k);
}

std::string ReorthPolicy::to_string() const {
  return is_full() ? std::string("full") : std::to_string(i_orth_);
}

ReorthPolicy ReorthPolicy::parse(const std::string& s) {
  if (s == "full" || s == "FULL" || s == "n") return full();
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return window(v);
  } catch (const std::logic_error&) {
    throw Error("invalid reorthogonalization window '" + s + "' (expected an integer >= 1 or 'full')");
  }
}

SymTridiagonal LanczosTrace::tridiagonal(int j) const {
  if (j < 1 || j > m()) {
    throw DimensionError("lanczos: T_" + std::to_string(j) + " requested but only " +
                         std::to_string(m()) + " steps recorded");
  }
  SymTridiagonal t{Vector(j), Vector(j - 1)};
  for (int k = 0; k < j; ++k) t.diag[k] = diag[k];
  for (int k = 0; k + 1 < j; ++k) t.offdiag[k] = offdiag[k];
  return t;
}

LanczosTrace lanczos_run(const LinearOperator& a, const Vector& q1, const LanczosOptions& opt) {
  const Eigen::Index n = a.dim();
  if (q1.size() != n) throw DimensionError("lanczos: start vector length mismatch");
  if (std::abs(q1.norm() - 1.0) > 1e-12) throw Error("lanczos: start vector must have unit norm");
  if (opt.steps < 1 || opt.steps > n) {
    throw Error("lanczos: steps must lie in 1..n (got " + std::to_string(opt.steps) + ")");
  }

  std::optional<SplitPreconditionedOperator> split;
  if (opt.precond) split.emplace(a, *opt.precond);
  const LinearOperator& op = split ? static_cast<const LinearOperator&>(*split) : a;

  // Vectors needed for reorthogonalization; q_{k-1} is always retained for
  // the recurrence.
  const std::size_t keep = opt.reorth.is_full()
                               ? static_cast<std::size_t>(opt.steps)
                               : static_cast<std::size_t>(std::max(opt.reorth.i_orth() - 1, 1));

  LanczosTrace tr;
  tr.diag.reserve(opt.steps);
  Vector q = q1;
  Vector q_prev = Vector::Zero(n);
  Vector w(n);
  double beta_prev = 0.0;
  double frob2 = 0.0;

  for (int k = 1; k <= opt.steps; ++k) {
    op.apply(q, w);
    if (k > 1) w -= beta_prev * q_prev;
    const double alpha = q.dot(w);
    w -= alpha * q;
    tr.diag.push_back(alpha);
    frob2 += alpha * alpha;

    tr.basis_window.push_back(q);
    if (tr.basis_window.size() > keep) tr.basis_window.pop_front();
    if (k == opt.steps) break;

    // One modified Gram-Schmidt pass over the most recent stored vectors.
    const int count = opt.reorth.reorth_count(k);
    const int stored = static_cast<int>(tr.basis_window.size());
    for (int i = stored - 1; i >= std::max(stored - count, 0); --i) {
      const Vector& v = tr.basis_window[static_cast<std::size_t>(i)];
      w -= v.dot(w) * v;
    }

    const double beta = w.norm();
    if (beta <= opt.breakdown_tol * std::sqrt(frob2 + 2.0 * beta * beta)) {
      tr.breakdown = true;
      break;
    }
    frob2 += 2.0 * beta * beta;
    tr.offdiag.push_back(beta);
    q_prev.swap(q);
    q = w / beta;
    beta_prev = beta;
  }
  return tr;
}

// ---------------------------------------------------------------------------

double estimate_condition_number(const LinearOperator& a, const ConditionEstimateOptions& opt,
                                 RngStream& rng) {
  if (opt.pilot_steps < 2) throw Error("condition estimate: pilot_steps must be >= 2");
  Vector z = standard_normal_vector(a.dim(), rng);
  z /= z.norm();
  LanczosOptions lo;
  lo.steps = static_cast<int>(std::min<Eigen::Index>(opt.pilot_steps, a.dim()));
  lo.reorth = ReorthPolicy::full();
  lo.precond = opt.precond;
  const LanczosTrace tr = lanczos_run(a, z, lo);
  const Vector theta = ritz_values(tr.tridiagonal(tr.m()));
  const double tmin = theta.minCoeff();
  const double tmax = theta.maxCoeff();
  if (!(tmin > 0.0)) {
    throw KrylovError("condition estimate: non-positive Ritz value " + std::to_string(tmin), tr.m());
  }
  double lower = 0.5 * tmin;
  if (opt.lambda_min_floor) lower = std::max(lower, *opt.lambda_min_floor);
  return std::max(1.0, 1.05 * tmax / lower);
}

}  // namespace ptss
