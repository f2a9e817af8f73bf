#pragma once

// Test-side oracles that do not go through the library's solvers.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "spillscm/panel.hpp"

namespace testing_support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One period of the structural system, simulated forward by fixed-point
/// iteration instead of a factorisation:
///   Y^c(0) = rho (w alpha'Y^c(0) + W Y^c(0)) + shock
///   Y_0(1) = alpha'Y^c(0) + tau
///   Y^c(1) = rho (w Y_0(1) + W Y^c(1)) + shock
struct ForwardInstance {
  spillscm::SpatialWeights weights;
  VectorXd alpha;
  double rho = 0.0;
  VectorXd yc0, yc1;
  double y00 = 0.0, y01 = 0.0;
  double tau = 0.0;
};

inline VectorXd fixed_point(const std::function<VectorXd(const VectorXd&)>& map, VectorXd x) {
  for (int it = 0; it < 5000; ++it) {
    const VectorXd next = map(x);
    if ((next - x).lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + next.lpNorm<Eigen::Infinity>())) {
      return next;
    }
    x = next;
  }
  return x;
}

/// Random instance whose structural maps are contractions, so fixed-point
/// iteration converges. Weights are row-normalised (w | W) with random
/// sparsity and |rho| * (|w||alpha|_1 + 1) < 1.
inline ForwardInstance random_instance(std::mt19937_64& rng, int n, double rho) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ForwardInstance f;
  f.rho = rho;
  MatrixXd block = MatrixXd::Zero(n, n + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i + 1) continue;
      if (unif(rng) < 0.5) block(i, j) = unif(rng);
    }
    if (block.row(i).sum() == 0.0) block(i, i == 0 ? 2 : 0) = 1.0;
    block.row(i) /= block.row(i).sum();
  }
  f.weights = spillscm::SpatialWeights::from_block(block);
  f.alpha = VectorXd(n);
  for (int i = 0; i < n; ++i) f.alpha[i] = normal(rng);
  // Keep the combined map contractive: |rho| (max_i w_i |alpha|_1 + 1) < 0.95.
  const double wa = f.weights.w.maxCoeff() * f.alpha.lpNorm<1>();
  if (std::abs(rho) * (wa + 1.0) >= 0.95) f.alpha *= (0.95 / std::abs(rho) - 1.0) / wa * 0.99;
  VectorXd shock(n);
  for (int i = 0; i < n; ++i) shock[i] = normal(rng);
  f.tau = 1.0 + normal(rng);
  const auto& w = f.weights.w;
  const auto& W = f.weights.W;
  f.yc0 = fixed_point([&](const VectorXd& y) -> VectorXd {
    return rho * (w * f.alpha.dot(y) + W * y) + shock;
  }, shock);
  f.y00 = f.alpha.dot(f.yc0);
  f.y01 = f.y00 + f.tau;
  f.yc1 = fixed_point([&](const VectorXd& y) -> VectorXd {
    return rho * (w * f.y01 + W * y) + shock;
  }, shock);
  return f;
}

}  // namespace testing_support
