#include "ptss/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace ptss {

std::string to_string(Flavor f) { return f == Flavor::Solve ? "solve" : "logqf"; }

Flavor parse_flavor(const std::string& s) {
  if (s == "solve" || s == "Solve") return Flavor::Solve;
  if (s == "logqf" || s == "LogQF") return Flavor::LogQF;
  throw Error("unknown flavor '" + s + "' (expected solve or logqf)");
}

TruncationDistribution::TruncationDistribution(int i_min, std::vector<double> weights)
    : i_min_(i_min), pmf_(std::move(weights)) {
  if (i_min_ < 1) throw Error("truncation distribution: i_min must be >= 1");
  if (pmf_.empty()) throw Error("truncation distribution: empty support");
  double total = 0.0;
  for (double w : pmf_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("truncation distribution: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw Error("truncation distribution: weights sum to zero");
  cdf_.resize(pmf_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf_.size(); ++k) {
    pmf_[k] /= total;
    if (!(pmf_[k] >= kMinMass)) {
      throw Error("truncation distribution: mass of Q=" + std::to_string(i_min_ + static_cast<int>(k)) +
                  " underflows the 1e-300 floor");
    }
    acc += pmf_[k];
    cdf_[k] = acc;
  }
  cdf_.back() = 1.0;
}

TruncationDistribution TruncationDistribution::point_mass(int q) {
  return TruncationDistribution(q, {1.0});
}

double TruncationDistribution::prob(int j) const {
  if (j < i_min_ || j > i_max()) return 0.0;
  return pmf_[static_cast<std::size_t>(j - i_min_)];
}

double TruncationDistribution::survival(int j) const {
  if (j <= i_min_) return 1.0;
  if (j > i_max()) return 0.0;
  double s = 0.0;
  for (int k = j; k <= i_max(); ++k) s += prob(k);
  return s;
}

double TruncationDistribution::expected_q() const {
  double e = 0.0;
  for (int j = i_min_; j <= i_max(); ++j) e += j * prob(j);
  return e;
}

int TruncationDistribution::ceil_expected_q() const {
  // Guard against E[Q] landing a rounding error above an integer.
  const double e = expected_q();
  const double r = std::round(e);
  if (std::abs(e - r) < 1e-12 * std::max(1.0, e)) return static_cast<int>(r);
  return static_cast<int>(std::ceil(e));
}

int TruncationDistribution::quantile(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto k = std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1);
  return i_min_ + static_cast<int>(k);
}

int TruncationDistribution::sample(RngStream& rng) const { return quantile(uniform01(rng)); }

namespace {

void check_support(int i_min, int i_max) {
  if (i_min < 1) throw Error("truncation support: i_min must be >= 1");
  if (i_min > i_max) {
    throw Error("truncation support: i_min=" + std::to_string(i_min) + " exceeds i_max=" +
                std::to_string(i_max));
  }
}

// Weights base^{j - i_min}; relative to i_min so nothing overflows.
std::vector<double> geometric_weights(double log_base, int i_min, int i_max) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(i_max - i_min + 1));
  for (int j = i_min; j <= i_max; ++j) w.push_back(std::exp(log_base * (j - i_min)));
  return w;
}

}  // namespace

TruncationDistribution make_exponential(double c, int i_min, int i_max) {
  check_support(i_min, i_max);
  if (!(c > 0.0)) throw Error("exponential distribution: rate must be positive");
  return TruncationDistribution(i_min, geometric_weights(-c, i_min, i_max));
}

TruncationDistribution make_geometric(int i_min, int i_max) {
  check_support(i_min, i_max);
  return TruncationDistribution(i_min, geometric_weights(-std::log(2.0), i_min, i_max));
}

double rho(Flavor flavor, double kappa) {
  if (!(kappa >= 1.0)) throw Error("condition number must be >= 1, got " + std::to_string(kappa));
  const double s = flavor == Flavor::Solve ? std::sqrt(kappa) : std::sqrt(kappa + 1.0);
  return (s - 1.0) / (s + 1.0);
}

TruncationDistribution make_gamma_optimal(Flavor flavor, double kappa, int i_min, int i_max) {
  check_support(i_min, i_max);
  const double r = rho(flavor, kappa);
  if (r == 0.0) return TruncationDistribution::point_mass(i_min);
  const double per_step = flavor == Flavor::Solve ? r : r * r;
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(i_max - i_min + 1));
  double v = 1.0;
  for (int j = i_min; j <= i_max; ++j) {
    w.push_back(v);
    v *= per_step;
  }
  return TruncationDistribution(i_min, std::move(w));
}

GammaFactor gamma_factor(const TruncationDistribution& dist, Flavor flavor, double kappa) {
  GammaFactor g;
  g.flavor = flavor;
  g.rho = rho(flavor, kappa);
  const double c = flavor == Flavor::Solve ? 2.0 : 4.0;
  for (int j = dist.i_min(); j <= dist.i_max(); ++j) {
    const double p = dist.prob(j);
    if (!(p > 0.0)) throw Error("gamma factor: zero mass at Q=" + std::to_string(j));
    g.value += std::pow(g.rho, c * (j - 1)) / p;  // pow(0, 0) == 1
  }
  return g;
}

double gamma_min_closed_form(Flavor flavor, double kappa, int i_min, int i_max) {
  check_support(i_min, i_max);
  const double r = rho(flavor, kappa);
  const int len = i_max - i_min + 1;
  if (flavor == Flavor::Solve) {
    const double num = std::pow(r, 2.0 * (i_min - 1)) * std::pow(std::pow(r, len) - 1.0, 2);
    return num / std::pow(r - 1.0, 2);
  }
  const double num = std::pow(r, 4.0 * (i_min - 1)) * std::pow(std::pow(r, 2.0 * len) - 1.0, 2);
  return num / std::pow(r * r - 1.0, 2);
}

WeightedSumMinimum minimize_weighted_sum(double t, int m1, int m2) {
  if (!(t > 0.0)) throw Error("minimize_weighted_sum: t must be positive");
  if (m1 < 1 || m2 < m1) throw Error("minimize_weighted_sum: need m2 >= m1 >= 1");
  WeightedSumMinimum out;
  const double sqrt_t = std::sqrt(t);
  double total = 0.0;
  for (int i = m1; i <= m2; ++i) {
    const double w = std::pow(sqrt_t, i - m1);
    out.pmf.push_back(w);
    total += w;
  }
  for (double& p : out.pmf) p /= total;
  const int len = m2 - m1 + 1;
  if (t == 1.0) {
    out.minimum = static_cast<double>(len) * len;
  } else {
    out.minimum = std::pow(t, m1) * std::pow(std::pow(t, 0.5 * len) - 1.0, 2) / std::pow(sqrt_t - 1.0, 2);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error("invalid number '" + s + "' in " + what);
  }
}

}  // namespace

DistributionSpec DistributionSpec::parse(const std::string& s) {
  DistributionSpec d;
  if (s == "geom" || s == "geometric") {
    d.kind = Kind::Geometric;
  } else if (s == "gamma-opt-solve" || s == "gamma-opt") {
    d.kind = Kind::GammaOptimal;
    d.flavor = Flavor::Solve;
  } else if (s == "gamma-opt-logqf") {
    d.kind = Kind::GammaOptimal;
    d.flavor = Flavor::LogQF;
  } else if (s.rfind("exp:", 0) == 0) {
    d.kind = Kind::Exponential;
    d.c = parse_double(s.substr(4), "distribution spec");
  } else if (s == "exp") {
    d.kind = Kind::Exponential;
  } else if (s.rfind("pmf:", 0) == 0) {
    d.kind = Kind::Explicit;
    std::stringstream ss(s.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) d.weights.push_back(parse_double(item, "distribution spec"));
    if (d.weights.empty()) throw Error("explicit pmf spec has no entries");
  } else {
    throw Error("unknown distribution spec '" + s +
                "' (expected exp:<c>, geom, gamma-opt-solve, gamma-opt-logqf or pmf:<p,...>)");
  }
  return d;
}

std::string DistributionSpec::to_string() const {
  switch (kind) {
    case Kind::Exponential: return "exp:" + format_double(c);
    case Kind::Geometric: return "geom";
    case Kind::GammaOptimal: return flavor == Flavor::Solve ? "gamma-opt-solve" : "gamma-opt-logqf";
    case Kind::Explicit: {
      std::string out = "pmf:";
      for (std::size_t k = 0; k < weights.size(); ++k) {
        if (k) out += ',';
        out += format_double(weights[k]);
      }
      return out;
    }
  }
  return "?";
}

TruncationDistribution DistributionSpec::realize(int i_min, int i_max, double kappa) const {
  switch (kind) {
    case Kind::Exponential: return make_exponential(c, i_min, i_max);
    case Kind::Geometric: return make_geometric(i_min, i_max);
    case Kind::GammaOptimal: return make_gamma_optimal(flavor, kappa, i_min, i_max);
    case Kind::Explicit:
      check_support(i_min, i_max);
      if (static_cast<int>(weights.size()) != i_max - i_min + 1) {
        throw Error("explicit pmf has " + std::to_string(weights.size()) + " entries but support {" +
                    std::to_string(i_min) + ".." + std::to_string(i_max) + "} needs " +
                    std::to_string(i_max - i_min + 1));
      }
      return TruncationDistribution(i_min, weights);
  }
  throw Error("unknown distribution kind");
}

}  // namespace ptss
