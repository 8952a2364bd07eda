#include "ptss/kernels.hpp"

#include <cmath>
#include <string>

namespace ptss {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935274463415059;
}

std::string_view to_string(KernelFamily k) {
  return k == KernelFamily::Rbf ? "rbf" : "matern32";
}

std::string_view to_string(Hyper h) {
  switch (h) {
    case Hyper::F: return "f";
    case Hyper::L: return "l";
    case Hyper::Mu: return "mu";
  }
  return "?";
}

KernelFamily parse_kernel_family(std::string_view s) {
  if (s == "rbf" || s == "RBF") return KernelFamily::Rbf;
  if (s == "matern32" || s == "Matern32" || s == "matern") return KernelFamily::Matern32;
  throw Error("unknown kernel family '" + std::string(s) + "' (expected rbf or matern32)");
}

Hyper parse_hyper(std::string_view s) {
  if (s == "f") return Hyper::F;
  if (s == "l") return Hyper::L;
  if (s == "mu") return Hyper::Mu;
  throw Error("unknown hyperparameter '" + std::string(s) + "' (expected f, l or mu)");
}

double KernelSpec::get(Hyper h) const {
  switch (h) {
    case Hyper::F: return f;
    case Hyper::L: return l;
    case Hyper::Mu: return mu;
  }
  throw Error("unknown hyperparameter");
}

void KernelSpec::set(Hyper h, double value) {
  switch (h) {
    case Hyper::F: f = value; return;
    case Hyper::L: l = value; return;
    case Hyper::Mu: mu = value; return;
  }
  throw Error("unknown hyperparameter");
}

void KernelSpec::validate() const {
  if (!(f > 0.0) || !std::isfinite(f)) throw Error("kernel: f must be positive, got " + std::to_string(f));
  if (!(l > 0.0) || !std::isfinite(l)) throw Error("kernel: l must be positive, got " + std::to_string(l));
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw Error("kernel: mu must be nonnegative, got " + std::to_string(mu));
}

Dataset::Dataset(Matrix points) : x(std::move(points)) {
  if (x.rows() < 1 || x.cols() < 1) throw DimensionError("dataset: need n >= 1 and d >= 1");
  if (!x.allFinite()) throw Error("dataset: non-finite entries");
}

double kernel_at_distance(KernelFamily family, double l, double r) {
  if (family == KernelFamily::Rbf) return std::exp(-0.5 * (r * r) / (l * l));
  const double a = kSqrt3 * r / l;
  return (1.0 + a) * std::exp(-a);
}

double kernel_dl_at_distance(KernelFamily family, double l, double r) {
  const double l3 = l * l * l;
  if (family == KernelFamily::Rbf) return kernel_at_distance(family, l, r) * (r * r) / l3;
  return 3.0 * (r * r) / l3 * std::exp(-kSqrt3 * r / l);
}

double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DimensionError("kernel_eval: point dimensions differ");
  const double r2 = std::max(0.0, x.squaredNorm() + y.squaredNorm() - 2.0 * x.dot(y));
  return kernel_at_distance(spec.family, spec.l, std::sqrt(r2));
}

Matrix pairwise_distances(const Dataset& data) {
  const Eigen::Index n = data.n();
  const Vector sq = data.x.rowwise().squaredNorm();
  const Matrix g = data.x * data.x.transpose();
  Matrix r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = std::sqrt(std::max(0.0, sq[i] + sq[j] - 2.0 * g(i, j)));
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

namespace {

template <class Entry>
Matrix symmetric_from_distances(const Matrix& r, Entry entry) {
  const Eigen::Index n = r.rows();
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = entry(r(i, j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

void check(const KernelSpec& spec, const Dataset& data) {
  spec.validate();
  if (data.n() < 1) throw DimensionError("gram matrix: empty dataset");
  if (!data.x.allFinite()) throw Error("gram matrix: non-finite input points");
}

}  // namespace

DenseOperator gram_matrix(const KernelSpec& spec, const Dataset& data) {
  check(spec, data);
  const Matrix r = pairwise_distances(data);
  const double f2 = spec.f * spec.f;
  Matrix k = symmetric_from_distances(
      r, [&](double d) { return f2 * kernel_at_distance(spec.family, spec.l, d); });
  k.diagonal().array() += f2 * spec.mu;
  return DenseOperator(std::move(k));
}

DenseOperator gram_derivative(const KernelSpec& spec, const Dataset& data, Hyper theta) {
  check(spec, data);
  const Eigen::Index n = data.n();
  const double f2 = spec.f * spec.f;
  switch (theta) {
    case Hyper::Mu:
      return DenseOperator(Matrix::Identity(n, n) * f2);
    case Hyper::F: {
      const Matrix r = pairwise_distances(data);
      Matrix k = symmetric_from_distances(r, [&](double d) {
        return 2.0 * spec.f * kernel_at_distance(spec.family, spec.l, d);
      });
      k.diagonal().array() += 2.0 * spec.f * spec.mu;
      return DenseOperator(std::move(k));
    }
    case Hyper::L: {
      const Matrix r = pairwise_distances(data);
      return DenseOperator(symmetric_from_distances(
          r, [&](double d) { return f2 * kernel_dl_at_distance(spec.family, spec.l, d); }));
    }
  }
  throw Error("gram_derivative: unknown hyperparameter");
}

}  // namespace ptss
