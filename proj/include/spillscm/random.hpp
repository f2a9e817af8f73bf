#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace spillscm {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser. Used to derive independent stream seeds from a
/// master seed: seed(stream) = mix(master + (stream + 1) * golden_gamma).
inline std::uint64_t mix_seed(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(master + (stream + 1) * 0x9e3779b97f4a7c15ULL);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  double u = 0.0;
  do {
    u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  } while (u <= 0.0);
  return u;
}

/// Bounds that keep sampled scale parameters inside normal double range.
/// Exact-fit data drive noise variances toward zero; without a floor the
/// chain underflows and 1/x overflows.
struct ScaleBounds {
  double lower = 1e-200;
  double upper = 1e200;
};

/// Inverse-gamma draw in the (shape, scale) convention used throughout:
/// density proportional to x^{-shape-1} exp(-scale / x).
/// Sampled as 1/g with g ~ Gamma(shape, rate = scale).
inline double draw_inverse_gamma(double shape, double scale, Rng& rng,
                                 ScaleBounds bounds = {}) {
  const double g = std::gamma_distribution<double>(shape, 1.0 / scale)(rng);
  const double x = g > 0.0 ? 1.0 / g : bounds.upper;
  return std::clamp(x, bounds.lower, bounds.upper);
}

/// Normal(mean, sd^2) truncated to (lo, hi). Naive rejection when the
/// interval carries reasonable mass, otherwise Robert's (1995) exponential
/// proposal on the nearer tail.
inline double draw_truncated_normal(double mean, double sd, double lo,
                                    double hi, Rng& rng) {
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  if (a < 1.0 && b > -1.0) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double z = standard_normal(rng);
      if (z > a && z < b) return mean + sd * z;
    }
  }
  // Work on the upper tail [lower, upper) of a standard normal.
  const bool upper_tail = a >= 1.0 || (a > -b);
  const double lower = upper_tail ? a : -b;
  const double upper = upper_tail ? b : -a;
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(uniform_open(rng)) / rate;
    if (z >= upper) continue;
    const double accept = std::exp(-0.5 * (z - rate) * (z - rate));
    if (uniform_open(rng) <= accept) {
      return mean + sd * (upper_tail ? z : -z);
    }
  }
}

}  // namespace spillscm
