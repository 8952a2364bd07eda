#pragma once

#include "ptss/common.hpp"

#include <string>
#include <vector>

namespace ptss {

/// Which TSS variance bound a Gamma factor or optimal distribution refers to.
enum class Flavor { Solve, LogQF };

std::string to_string(Flavor f);
Flavor parse_flavor(const std::string& s);

/// Probability mass function of the truncation index Q on {i_min..i_max}.
/// Every mass is strictly positive and the masses sum to one.
class TruncationDistribution {
 public:
  /// Normalizes `weights` (indexed from i_min) and validates the result.
  TruncationDistribution(int i_min, std::vector<double> weights);

  static TruncationDistribution point_mass(int q);

  int i_min() const { return i_min_; }
  int i_max() const { return i_min_ + static_cast<int>(pmf_.size()) - 1; }
  int support_size() const { return static_cast<int>(pmf_.size()); }
  const std::vector<double>& pmf() const { return pmf_; }

  /// P(Q = j); zero outside the support.
  double prob(int j) const;
  /// P(Q >= j); one for j <= i_min.
  double survival(int j) const;
  double expected_q() const;
  /// ceil(E[Q]), the iteration count of the matched-cost truncated baseline.
  int ceil_expected_q() const;

  /// Inverse-CDF draw from one uniform variate.
  int sample(RngStream& rng) const;
  int quantile(double u) const;

 private:
  int i_min_;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

/// Masses below this floor are rejected rather than silently renormalized.
inline constexpr double kMinMass = 1e-300;

/// P(Q = j) proportional to exp(-c j).
TruncationDistribution make_exponential(double c, int i_min, int i_max);

/// P(Q = j) proportional to 2^{-j}.
TruncationDistribution make_geometric(int i_min, int i_max);

/// Convergence factor for the flavor: (sqrt(k)-1)/(sqrt(k)+1) for Solve,
/// (sqrt(k+1)-1)/(sqrt(k+1)+1) for LogQF.
double rho(Flavor flavor, double kappa);

/// Distribution minimizing the Gamma factor of the flavor for condition
/// number kappa. For Solve with kappa = 1 this is a point mass at i_min.
TruncationDistribution make_gamma_optimal(Flavor flavor, double kappa, int i_min, int i_max);

struct GammaFactor {
  double value = 0.0;
  Flavor flavor = Flavor::Solve;
  double rho = 0.0;
};

/// Gamma = sum_j rho^{c (j-1)} / P(Q=j) with c = 2 (Solve) or 4 (LogQF).
GammaFactor gamma_factor(const TruncationDistribution& dist, Flavor flavor, double kappa);

/// Closed-form minimum of the Gamma factor over all distributions on
/// {i_min..i_max}.
double gamma_min_closed_form(Flavor flavor, double kappa, int i_min, int i_max);

struct WeightedSumMinimum {
  std::vector<double> pmf;  // indexed from m1
  double minimum = 0.0;
};

/// argmin / min of sum_{i=m1}^{m2} t^i / p_i over the probability simplex.
WeightedSumMinimum minimize_weighted_sum(double t, int m1, int m2);

/// Textual distribution spec used by configs: "exp:<c>", "geom",
/// "gamma-opt-solve", "gamma-opt-logqf" or "pmf:<p1>,<p2>,...".
struct DistributionSpec {
  enum class Kind { Exponential, Geometric, GammaOptimal, Explicit };
  Kind kind = Kind::Exponential;
  double c = 0.5;
  Flavor flavor = Flavor::Solve;
  std::vector<double> weights;

  static DistributionSpec parse(const std::string& s);
  std::string to_string() const;
  bool needs_kappa() const { return kind == Kind::GammaOptimal; }
  TruncationDistribution realize(int i_min, int i_max, double kappa = 1.0) const;

  bool operator==(const DistributionSpec&) const = default;
};

}  // namespace ptss
