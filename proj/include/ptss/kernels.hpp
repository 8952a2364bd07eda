#pragma once

#include "ptss/operators.hpp"

#include <string>
#include <string_view>

namespace ptss {

enum class KernelFamily { Rbf, Matern32 };

enum class Hyper { F, L, Mu };

std::string_view to_string(KernelFamily k);
std::string_view to_string(Hyper h);
KernelFamily parse_kernel_family(std::string_view s);
Hyper parse_hyper(std::string_view s);

/// Kernel family plus hyperparameters (output scale f, length-scale l,
/// regularization mu).
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  double f = 1.0;
  double l = 1.0;
  double mu = 0.01;

  double get(Hyper h) const;
  void set(Hyper h, double value);
  /// Throws if f <= 0, l <= 0 or mu < 0.
  void validate() const;
};

/// Input points, one per row.
struct Dataset {
  Matrix x;

  Dataset() = default;
  explicit Dataset(Matrix points);
  Eigen::Index n() const { return x.rows(); }
  Eigen::Index d() const { return x.cols(); }
};

/// Unit-amplitude kernel value at distance r.
double kernel_at_distance(KernelFamily family, double l, double r);

/// d/dl of the unit-amplitude kernel at distance r.
double kernel_dl_at_distance(KernelFamily family, double l, double r);

double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y);

/// Pairwise Euclidean distances using the expanded form
/// max(0, |x|^2 + |y|^2 - 2 x.y); the diagonal is exactly zero.
Matrix pairwise_distances(const Dataset& data);

/// K_hat = f^2 (k(X,X) + mu I), exactly symmetric.
DenseOperator gram_matrix(const KernelSpec& spec, const Dataset& data);

/// dK_hat/dtheta for theta in {f, l, mu}. Symmetric but not SPD in general.
DenseOperator gram_derivative(const KernelSpec& spec, const Dataset& data, Hyper theta);

}  // namespace ptss
