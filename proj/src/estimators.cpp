#include "ptss/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ptss {

namespace {

void check_support_fits(const TruncationDistribution& dist, Eigen::Index n) {
  if (dist.i_max() > n) {
    throw Error("truncation support i_max=" + std::to_string(dist.i_max()) + " exceeds dimension " +
                std::to_string(n));
  }
}

CgOptions cg_options(int iters, const KrylovSettings& s) {
  CgOptions o;
  o.max_iters = iters;
  o.rtol = s.rtol;
  o.precond = s.precond;
  return o;
}

void check_trace_covers(const CgTrace& trace, int q) {
  if (trace.m() < q && !trace.converged) {
    throw Error("CG trace has " + std::to_string(trace.m()) + " iterations; " + std::to_string(q) +
                " needed");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Vector tss_solve_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q) {
  if (q < dist.i_min() || q > dist.i_max()) throw Error("sampled Q outside the truncation support");
  check_trace_covers(trace, q);
  Vector x = trace.iterate(dist.i_min() - 1);
  if (q <= trace.m()) x += trace.increments[static_cast<std::size_t>(q - 1)] / dist.prob(q);
  return x;
}

TssSolveResult tss_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist,
                         RngStream& rng, const KrylovSettings& settings) {
  check_support_fits(dist, a.dim());
  const int q = dist.sample(rng);
  const CgTrace trace = cg_run(a, y, cg_options(q, settings));
  TssSolveResult r;
  r.estimate = tss_solve_from_trace(trace, dist, q);
  r.sampled_q = q;
  r.iterations_run = trace.m();
  r.target_iteration = dist.i_max();
  r.converged = trace.converged && trace.m() < q;
  return r;
}

double tss_scalar_from_sequence(std::span<const double> s, const TruncationDistribution& dist, int q) {
  if (q < dist.i_min() || q > dist.i_max()) throw Error("sampled Q outside the truncation support");
  if (s.empty()) throw Error("empty quadrature sequence");
  auto at = [&](int j) -> double {
    if (j <= 0) return 0.0;
    return s[static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(j), s.size()) - 1)];
  };
  return at(dist.i_min() - 1) + (at(q) - at(q - 1)) / dist.prob(q);
}

namespace {

LanczosTrace run_lanczos_from(const LinearOperator& a, const Vector& start, int steps, const KrylovSettings& s) {
  const double norm = start.norm();
  if (!(norm > 0.0)) throw Error("lanczos: zero start vector");
  LanczosOptions lo;
  lo.steps = static_cast<int>(std::min<Eigen::Index>(steps, a.dim()));
  lo.reorth = s.reorth;
  lo.precond = s.precond;
  return lanczos_run(a, start / norm, lo);
}

double s_log_at(const LanczosTrace& tr, int j) {
  if (j <= 0) return 0.0;
  return e1_log_e1(tr.tridiagonal(std::min(j, tr.m())));
}

}  // namespace

TssScalarResult tss_logqf(const LinearOperator& a, const Vector& z, const TruncationDistribution& dist,
                          RngStream& rng, const KrylovSettings& settings) {
  check_support_fits(dist, a.dim());
  const int q = dist.sample(rng);
  const LanczosTrace tr = run_lanczos_from(a, z, q, settings);
  TssScalarResult r;
  r.sampled_q = q;
  r.probe_norm_sq = z.squaredNorm();
  r.breakdown = tr.breakdown;
  const double base = s_log_at(tr, dist.i_min() - 1);
  const double sq = s_log_at(tr, q);
  const double sq1 = q - 1 == dist.i_min() - 1 ? base : s_log_at(tr, q - 1);
  r.estimate = base + (sq - sq1) / dist.prob(q);
  return r;
}

std::vector<double> lanczos_log_sequence(const LinearOperator& a, const Vector& z, int steps,
                                         const KrylovSettings& settings) {
  const LanczosTrace tr = run_lanczos_from(a, z, steps, settings);
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(steps));
  for (int j = 1; j <= steps; ++j) s.push_back(j <= tr.m() ? e1_log_e1(tr.tridiagonal(j)) : s.back());
  return s;
}

std::vector<double> lanczos_quad_form_sequence(const LinearOperator& a, const Vector& y, int steps,
                                               const KrylovSettings& settings) {
  const Vector start = settings.precond ? settings.precond->apply_inverse_sqrt(y) : y;
  const double scale = start.squaredNorm();
  const LanczosTrace tr = run_lanczos_from(a, start, steps, settings);
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(steps));
  bool frozen = false;
  for (int j = 1; j <= steps; ++j) {
    if (frozen || j > tr.m()) {
      s.push_back(s.back());
      continue;
    }
    const SymTridiagonal t = tr.tridiagonal(j);
    s.push_back(scale * e1_inverse_e1(t));
    if (settings.rtol > 0.0 && j < tr.m()) {
      // Relative residual of the j-th iterate: beta_j |e_j^T T_j^{-1} e1|.
      const Vector w = t.dense().ldlt().solve(Vector::Unit(j, 0));
      frozen = tr.offdiag[static_cast<std::size_t>(j - 1)] * std::abs(w[j - 1]) <= settings.rtol;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

Vector ss_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q) {
  if (dist.i_min() != 1) throw Error("single-sample estimator needs a support starting at 1");
  return tss_solve_from_trace(trace, dist, q);
}

Vector rr_from_trace(const CgTrace& trace, const TruncationDistribution& dist, int q) {
  if (q < dist.i_min() || q > dist.i_max()) throw Error("sampled Q outside the truncation support");
  check_trace_covers(trace, q);
  Vector x = Vector::Zero(trace.x0.size());
  const int upto = std::min(q, trace.m());
  for (int i = 1; i <= upto; ++i) x += trace.increments[static_cast<std::size_t>(i - 1)] / dist.survival(i);
  return x;
}

Vector ss_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist, RngStream& rng,
                const KrylovSettings& settings) {
  check_support_fits(dist, a.dim());
  const int q = dist.sample(rng);
  return ss_from_trace(cg_run(a, y, cg_options(q, settings)), dist, q);
}

Vector rr_solve(const LinearOperator& a, const Vector& y, const TruncationDistribution& dist, RngStream& rng,
                const KrylovSettings& settings) {
  check_support_fits(dist, a.dim());
  const int q = dist.sample(rng);
  return rr_from_trace(cg_run(a, y, cg_options(q, settings)), dist, q);
}

// ---------------------------------------------------------------------------

VectorMoments tss_exact_moments(const std::vector<Vector>& deltas, const TruncationDistribution& dist) {
  if (static_cast<int>(deltas.size()) < dist.i_max()) {
    throw Error("tss moments: " + std::to_string(deltas.size()) + " increments given, " +
                std::to_string(dist.i_max()) + " required");
  }
  VectorMoments m;
  m.mean = Vector::Zero(deltas.front().size());
  for (int i = 1; i <= dist.i_max(); ++i) m.mean += deltas[static_cast<std::size_t>(i - 1)];
  Vector star = Vector::Zero(m.mean.size());
  double weighted = 0.0;
  for (int j = dist.i_min(); j <= dist.i_max(); ++j) {
    const Vector& d = deltas[static_cast<std::size_t>(j - 1)];
    weighted += d.squaredNorm() / dist.prob(j);
    star += d;
  }
  m.variance = weighted - star.squaredNorm();
  return m;
}

ScalarMoments tss_exact_moments(const std::vector<double>& deltas, const TruncationDistribution& dist) {
  if (static_cast<int>(deltas.size()) < dist.i_max()) {
    throw Error("tss moments: " + std::to_string(deltas.size()) + " increments given, " +
                std::to_string(dist.i_max()) + " required");
  }
  ScalarMoments m;
  for (int i = 1; i <= dist.i_max(); ++i) m.mean += deltas[static_cast<std::size_t>(i - 1)];
  double star = 0.0;
  double weighted = 0.0;
  for (int j = dist.i_min(); j <= dist.i_max(); ++j) {
    const double d = deltas[static_cast<std::size_t>(j - 1)];
    weighted += d * d / dist.prob(j);
    star += d;
  }
  m.variance = weighted - star * star;
  return m;
}

std::vector<Vector> padded_increments(const CgTrace& trace, int count) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 1; k <= count; ++k) out.push_back(trace.increment(k));
  return out;
}

VarianceBound variance_bound(Flavor flavor, double kappa, double x_norm_sq, const GammaFactor& gamma) {
  if (!(kappa >= 1.0)) throw Error("variance bound: kappa must be >= 1");
  VarianceBound b;
  b.kappa = kappa;
  b.gamma = gamma.value;
  if (flavor == Flavor::Solve) {
    b.flavor = BoundFlavor::Solve;
    b.bound = 16.0 * kappa * kappa * x_norm_sq * gamma.value;
  } else {
    b.flavor = BoundFlavor::LogQF;
    const double s = std::sqrt(kappa + 1.0) + 1.0;
    const double lg = std::log(2.0 * kappa);
    b.bound = 16.0 * s * s * lg * lg * gamma.value;
  }
  return b;
}

VarianceBound variance_bound_optimal(Flavor flavor, double kappa, double x_norm_sq, int i_min, int i_max) {
  VarianceBound b;
  b.kappa = kappa;
  b.gamma = gamma_min_closed_form(flavor, kappa, i_min, i_max);
  const double r = rho(flavor, kappa);
  const int len = i_max - i_min + 1;
  if (flavor == Flavor::Solve) {
    b.flavor = BoundFlavor::SolveOptimal;
    const double s = std::sqrt(kappa) + 1.0;
    b.bound = 4.0 * kappa * kappa * x_norm_sq * std::pow(r, 2.0 * (i_min - 1)) *
              std::pow(std::pow(r, len) - 1.0, 2) * s * s;
  } else {
    b.flavor = BoundFlavor::LogQFOptimal;
    const double s = std::sqrt(kappa + 1.0) + 1.0;
    const double lg = std::log(2.0 * kappa);
    b.bound = std::pow(s, 6) * lg * lg / (kappa + 1.0) * std::pow(r, 4.0 * (i_min - 1)) *
              std::pow(std::pow(r, 2.0 * len) - 1.0, 2);
  }
  return b;
}

// ---------------------------------------------------------------------------

Vector solve_estimate(const LinearOperator& a, const Vector& y, const SolverChoice& solver, RngStream& rng,
                      const KrylovSettings& settings) {
  if (const auto* t = std::get_if<Truncated>(&solver)) {
    if (t->m < 1) throw Error("truncated solver needs m >= 1");
    return cg_run(a, y, cg_options(t->m, settings)).iterate(t->m);
  }
  return tss_solve(a, y, std::get<Tss>(solver).dist, rng, settings).estimate;
}

double slq_logdet(const LinearOperator& a, int k_z, const SolverChoice& solver, RngStream& rng,
                  const KrylovSettings& settings) {
  if (k_z < 1) throw Error("slq: need at least one probe");
  double acc = 0.0;
  for (int i = 0; i < k_z; ++i) {
    const Vector z = standard_normal_vector(a.dim(), rng);
    const double nz2 = z.squaredNorm();
    if (const auto* t = std::get_if<Truncated>(&solver)) {
      if (t->m < 1) throw Error("slq: truncated solver needs m >= 1");
      const LanczosTrace tr = run_lanczos_from(a, z, t->m, settings);
      acc += nz2 * s_log_at(tr, t->m);
    } else {
      acc += nz2 * tss_logqf(a, z, std::get<Tss>(solver).dist, rng, settings).estimate;
    }
  }
  double est = acc / k_z;
  if (settings.precond) est += settings.precond->logdet();
  return est;
}

double quad_form_estimate(const LinearOperator& a, const Vector& y, const SolverChoice& solver, RngStream& rng,
                          const KrylovSettings& settings) {
  return y.dot(solve_estimate(a, y, solver, rng, settings));
}

double quad_form_grad_estimate(const LinearOperator& a, const LinearOperator& d_a, const Vector& y,
                               const SolverChoice& solver, RngStream& rng, const KrylovSettings& settings) {
  if (d_a.dim() != a.dim()) throw DimensionError("derivative operator dimension mismatch");
  const Vector x = solve_estimate(a, y, solver, rng, settings);
  if (std::holds_alternative<Truncated>(solver)) return x.dot(d_a.matvec(x));
  const Vector x2 = solve_estimate(a, y, solver, rng, settings);
  return x.dot(d_a.matvec(x2));
}

std::vector<double> hutchinson_trace_derivatives(const LinearOperator& a,
                                                 std::span<const LinearOperator* const> d_as, int k_z,
                                                 const SolverChoice& solver, RngStream& rng,
                                                 const KrylovSettings& settings) {
  if (k_z < 1) throw Error("hutchinson: need at least one probe");
  for (const LinearOperator* d : d_as) {
    if (d->dim() != a.dim()) throw DimensionError("derivative operator dimension mismatch");
  }
  std::vector<double> acc(d_as.size(), 0.0);
  Vector dz(a.dim());
  for (int i = 0; i < k_z; ++i) {
    const Vector z = standard_normal_vector(a.dim(), rng);
    const Vector u = solve_estimate(a, z, solver, rng, settings);
    for (std::size_t k = 0; k < d_as.size(); ++k) {
      d_as[k]->apply(z, dz);
      acc[k] += u.dot(dz);
    }
  }
  for (double& v : acc) v /= k_z;
  return acc;
}

double hutchinson_trace_derivative(const LinearOperator& a, const LinearOperator& d_a, int k_z,
                                   const SolverChoice& solver, RngStream& rng, const KrylovSettings& settings) {
  const LinearOperator* ops[] = {&d_a};
  return hutchinson_trace_derivatives(a, ops, k_z, solver, rng, settings).front();
}

}  // namespace ptss
