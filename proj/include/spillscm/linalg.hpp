#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "spillscm/errors.hpp"
#include "spillscm/random.hpp"

namespace spillscm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LogAbsDeterminant {
  double value = 0.0;  // log|det|, -inf when singular
  int sign = 1;        // sign of det, 0 when singular
};

inline bool lu_has_zero_pivot(const Eigen::PartialPivLU<MatrixXd>& lu) {
  const auto diag = lu.matrixLU().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (diag[i] == 0.0 || !std::isfinite(diag[i])) return true;
  }
  return false;
}

/// log|det(A)| through a partial-pivoting LU, tracking the sign.
inline LogAbsDeterminant log_abs_determinant(const MatrixXd& a) {
  LogAbsDeterminant out;
  if (a.rows() == 0) return out;
  const Eigen::PartialPivLU<MatrixXd> lu(a);
  const auto diag = lu.matrixLU().diagonal();
  int sign = lu.permutationP().determinant();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double d = diag[i];
    if (d == 0.0 || !std::isfinite(d)) {
      return {-std::numeric_limits<double>::infinity(), 0};
    }
    if (d < 0.0) sign = -sign;
    sum += std::log(std::abs(d));
  }
  out.value = sum;
  out.sign = sign;
  return out;
}

/// Reciprocal condition estimate (L1 norm) of an LU factorisation; zero when
/// a pivot vanished.
inline double reciprocal_condition(const Eigen::PartialPivLU<MatrixXd>& lu) {
  if (lu.rows() == 0) return 1.0;
  if (lu_has_zero_pivot(lu)) return 0.0;
  const double rc = lu.rcond();
  return std::isfinite(rc) ? rc : 0.0;
}

/// Draws mean + sqrt(scale) * z with Cov(z) = P^{-1}, given the Cholesky
/// factor of the precision P = L L'.
inline VectorXd draw_gaussian_from_precision(const Eigen::LLT<MatrixXd>& chol,
                                             const VectorXd& mean,
                                             double scale, Rng& rng) {
  VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  const VectorXd e = chol.matrixU().solve(z);
  return mean + std::sqrt(scale) * e;
}

}  // namespace spillscm
