#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ptss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a matrix that must be SPD is not. `index()` is the pivot (or
/// eigenvalue position) at which the failure was observed, or -1.
class NotSpdError : public Error {
 public:
  NotSpdError(const std::string& what, long index) : Error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

/// Raised by Krylov iterations on indefiniteness or undefined matrix functions.
class KrylovError : public Error {
 public:
  KrylovError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Every estimator takes an explicit stream. Replicate r of an experiment uses
// substream_seed(base_seed, r) so replicates can run in any order.
using RngStream = std::mt19937_64;

/// splitmix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix64(mix64(base_seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(RngStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draws via Box-Muller on uniform01, so streams are
/// reproducible across standard library implementations.
inline double standard_normal(RngStream& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline Vector standard_normal_vector(Eigen::Index n, RngStream& rng) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = standard_normal(rng);
  return z;
}

}  // namespace ptss
