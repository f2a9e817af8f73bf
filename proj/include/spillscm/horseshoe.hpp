#pragma once

#include <Eigen/Dense>

#include <vector>

#include "spillscm/errors.hpp"
#include "spillscm/linalg.hpp"
#include "spillscm/random.hpp"

namespace spillscm {

// Horseshoe hierarchy in the auxiliary-variable form, with every half-Cauchy
// written as two inverse-gamma layers:
//
//   coef_i | lambda_i^2       ~ N(0, lambda_i^2)
//   lambda_i^2 | nu_lambda    ~ IG(1/2, 1/nu_lambda)
//   nu_lambda | tau^2         ~ IG(1/2, 1/tau^2)
//   tau^2 | nu_tau            ~ IG(1/2, 1/nu_tau)
//   nu_tau | sigma^2          ~ IG(1/2, 1/sigma^2)      (tau | sigma ~ C+(0, sigma))
//   sigma^2 | nu_sigma        ~ IG(1/2, 1/nu_sigma)
//   nu_sigma                  ~ IG(1/2, 1/hyperscale^2) (sigma ~ C+(0, 10))
//
// IG(a, b) always means shape a, scale b: density ~ x^{-a-1} exp(-b/x).
//
// All d local scales share one nu_lambda, so its full conditional has shape
// (d + 1)/2; for a single coefficient that is shape 1. The 1/nu_tau term in
// the noise-variance scale is not a typo: it is the contribution of nu_tau's
// prior IG(1/2, 1/sigma^2).

struct HorseshoeState {
  VectorXd coef;
  VectorXd local_scale_sq;   // lambda_i^2
  double aux_local = 1.0;    // nu_lambda
  double global_scale_sq = 1.0;  // tau^2
  double aux_global = 1.0;   // nu_tau
  double noise_var = 1.0;    // sigma^2
  double aux_noise = 1.0;    // nu_sigma

  /// coef = 0, every scale 1, sigma^2 = sample variance of the response.
  static HorseshoeState initial(Eigen::Index dim, double response_variance) {
    HorseshoeState s;
    s.coef = VectorXd::Zero(dim);
    s.local_scale_sq = VectorXd::Ones(dim);
    s.noise_var = response_variance > 0.0 ? response_variance : 1.0;
    return s;
  }

  bool all_positive() const {
    return (local_scale_sq.array() > 0.0).all() && aux_local > 0.0 && global_scale_sq > 0.0 &&
           aux_global > 0.0 && noise_var > 0.0 && aux_noise > 0.0;
  }
};

struct HorseshoeConfig {
  double hyperscale = 10.0;  // scale of the top-level half-Cauchy on sigma
  ScaleBounds bounds;
};

struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;

  double draw(Rng& rng, ScaleBounds bounds = {}) const {
    return draw_inverse_gamma(shape, scale, rng, bounds);
  }
};

struct GaussianConditional {
  VectorXd mean;
  MatrixXd covariance;
};

inline double sample_variance(const VectorXd& v) {
  if (v.size() < 2) return 1.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

namespace detail {

/// Cholesky of A = X'X + sigma^2 diag(1 / lambda^2).
inline Eigen::LLT<MatrixXd> coefficient_precision(const MatrixXd& gram,
                                                  const HorseshoeState& state) {
  MatrixXd a = gram;
  a.diagonal().array() += state.noise_var / state.local_scale_sq.array();
  Eigen::LLT<MatrixXd> chol(a);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("horseshoe coefficient precision is not positive definite");
  }
  return chol;
}

}  // namespace detail

/// Full conditional of the coefficients from sufficient statistics
/// gram = X'X and cross = X'y: N(A^{-1} X'y, sigma^2 A^{-1}).
inline GaussianConditional coefficient_conditional_from_moments(const MatrixXd& gram,
                                                                const VectorXd& cross,
                                                                const HorseshoeState& state) {
  const auto chol = detail::coefficient_precision(gram, state);
  GaussianConditional out;
  out.mean = chol.solve(cross);
  out.covariance =
      state.noise_var * chol.solve(MatrixXd::Identity(gram.rows(), gram.cols()));
  return out;
}

inline GaussianConditional compute_coef_conditional(const MatrixXd& design,
                                                    const VectorXd& response,
                                                    const HorseshoeState& state) {
  return coefficient_conditional_from_moments(design.transpose() * design,
                                              design.transpose() * response, state);
}

inline VectorXd sample_coefficients_from_moments(const MatrixXd& gram, const VectorXd& cross,
                                                 const HorseshoeState& state, Rng& rng) {
  if (gram.rows() == 0) return VectorXd();
  const auto chol = detail::coefficient_precision(gram, state);
  return draw_gaussian_from_precision(chol, chol.solve(cross), state.noise_var, rng);
}

inline VectorXd sample_coefficients(const MatrixXd& design, const VectorXd& response,
                                    const HorseshoeState& state, Rng& rng) {
  return sample_coefficients_from_moments(design.transpose() * design,
                                          design.transpose() * response, state, rng);
}

/// lambda_i^2 | rest ~ IG(1, coef_i^2 / 2 + 1 / nu_lambda)
inline std::vector<InverseGammaParams> local_scale_conditionals(const HorseshoeState& state) {
  std::vector<InverseGammaParams> out;
  out.reserve(state.coef.size());
  for (Eigen::Index i = 0; i < state.coef.size(); ++i) {
    out.push_back({1.0, 0.5 * state.coef[i] * state.coef[i] + 1.0 / state.aux_local});
  }
  return out;
}

inline VectorXd sample_local_scales(const HorseshoeState& state, Rng& rng,
                                    const HorseshoeConfig& config = {}) {
  const auto params = local_scale_conditionals(state);
  VectorXd out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i].draw(rng, config.bounds);
  return out;
}

/// nu_lambda | rest ~ IG((d + 1)/2, sum_i 1/lambda_i^2 + 1/tau^2)
inline InverseGammaParams aux_local_conditional(const HorseshoeState& state) {
  return {0.5 * (static_cast<double>(state.coef.size()) + 1.0),
          state.local_scale_sq.cwiseInverse().sum() + 1.0 / state.global_scale_sq};
}

/// tau^2 | rest ~ IG(1, 1/nu_lambda + 1/nu_tau)
inline InverseGammaParams global_scale_conditional(const HorseshoeState& state) {
  return {1.0, 1.0 / state.aux_local + 1.0 / state.aux_global};
}

/// nu_tau | rest ~ IG(1, 1/tau^2 + 1/sigma^2)
inline InverseGammaParams aux_global_conditional(const HorseshoeState& state) {
  return {1.0, 1.0 / state.global_scale_sq + 1.0 / state.noise_var};
}

/// Sequential draws of nu_lambda, tau^2 and nu_tau, each conditioning on the
/// values just drawn.
inline void sample_global_and_aux(HorseshoeState& state, Rng& rng,
                                  const HorseshoeConfig& config = {}) {
  state.aux_local = aux_local_conditional(state).draw(rng, config.bounds);
  state.global_scale_sq = global_scale_conditional(state).draw(rng, config.bounds);
  state.aux_global = aux_global_conditional(state).draw(rng, config.bounds);
}

/// sigma^2 | rest ~ IG(1 + n/2, 1/nu_tau + 1/nu_sigma + r'r/2) for n
/// residuals. Without coefficients (dimension 0) there is no tau layer and
/// the 1/nu_tau term drops out.
inline InverseGammaParams noise_variance_conditional(double residual_ss, Eigen::Index n,
                                                     const HorseshoeState& state) {
  const double global_term = state.coef.size() > 0 ? 1.0 / state.aux_global : 0.0;
  return {1.0 + 0.5 * static_cast<double>(n),
          global_term + 1.0 / state.aux_noise + 0.5 * residual_ss};
}

/// nu_sigma | rest ~ IG(1, 1/sigma^2 + 1/hyperscale^2)
inline InverseGammaParams aux_noise_conditional(const HorseshoeState& state,
                                                double hyperscale = 10.0) {
  return {1.0, 1.0 / state.noise_var + 1.0 / (hyperscale * hyperscale)};
}

/// Draws sigma^2 then refreshes nu_sigma.
inline void sample_noise_variance(const VectorXd& residuals, HorseshoeState& state, Rng& rng,
                                  const HorseshoeConfig& config = {}) {
  state.noise_var =
      noise_variance_conditional(residuals.squaredNorm(), residuals.size(), state)
          .draw(rng, config.bounds);
  state.aux_noise = aux_noise_conditional(state, config.hyperscale).draw(rng, config.bounds);
}

}  // namespace spillscm
