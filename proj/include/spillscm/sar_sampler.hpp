#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "spillscm/chain.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/horseshoe.hpp"
#include "spillscm/linalg.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/random.hpp"

namespace spillscm {

// Pretreatment model for the controls:
//
//   Y_t^c = rho (w Y_0t + W Y_t^c) + X_t beta + eta gamma_t + e_t,
//   gamma_t = phi_gamma gamma_{t-1} + v_t,   v_t ~ N(0, sigma_gamma^2 I_p),
//   eta_i ~ N_p(0, sigma_eta^2 diag(omega^2)),   e_t ~ N(0, sigma_2^2 I_N),
//
// with a horseshoe on beta, half-Cauchy(0, 10) on sigma_2, sigma_gamma,
// sigma_eta and omega_j, and a random-walk Metropolis step for rho.

struct FactorState {
  MatrixXd gamma;  // T0 x p, row t is gamma_t'
  MatrixXd eta;    // N x p, row i is eta_i'
  double phi_gamma = 0.0;
  double sigma_gamma_sq = 1.0;
  double aux_sigma_gamma = 1.0;
  double sigma_eta_sq = 1.0;
  double aux_sigma_eta = 1.0;
  VectorXd omega_sq;
  VectorXd aux_omega;

  int factors() const { return static_cast<int>(gamma.cols()); }

  static FactorState initial(int t0, int n, int p) {
    FactorState f;
    f.gamma = MatrixXd::Zero(t0, p);
    f.eta = MatrixXd::Zero(n, p);
    f.omega_sq = VectorXd::Ones(p);
    f.aux_omega = VectorXd::Ones(p);
    return f;
  }
};

struct SarState {
  double rho = 0.0;
  VectorXd alpha;  // current synthetic weights; read only by the simultaneous Jacobian
  HorseshoeState beta;  // noise_var holds sigma_2^2
  FactorState factors;
  double metropolis_scale = 0.1;
  long accept_count = 0;
  long proposal_count = 0;
  long window_accepts = 0;
  long window_proposals = 0;

  double sigma2_sq() const { return beta.noise_var; }
};

/// Jacobian in the rho conditional. `spatial` is |I - rho W|, treating the
/// treated unit's outcomes as given. `simultaneous` is |I - rho w alpha' - rho W|,
/// the Jacobian of the system when Y_0t = alpha' Y_t^c holds before treatment;
/// it needs the current weights and so only runs inside the joint chain.
enum class RhoJacobian { spatial, simultaneous };

struct SarConfig {
  ChainConfig chain;
  RhoJacobian jacobian = RhoJacobian::spatial;
  int factors = 2;
  int adapt_interval = 50;
  double initial_scale = 0.0;  // <= 0 picks 2.4 / sqrt(curvature) at the start
  double rho_search_radius = 1.0;
  HorseshoeConfig horseshoe;

  void validate() const {
    chain.validate();
    if (factors < 1) throw ConfigError("factor count must be at least 1");
    if (adapt_interval < 1) throw ConfigError("adaptation interval must be positive");
    if (rho_search_radius <= 0.0) throw ConfigError("rho search radius must be positive");
  }
};

struct SarPosterior {
  VectorXd rho;
  MatrixXd beta;  // draws x k
  VectorXd sigma2_sq;
  VectorXd phi_gamma;
  VectorXd sigma_gamma_sq;
  VectorXd sigma_eta_sq;
  long accepted = 0;  // post burn-in
  long proposed = 0;  // post burn-in
  double metropolis_scale = 0.0;
  ChainConfig meta;

  int draws() const { return static_cast<int>(rho.size()); }
  double acceptance_rate() const {
    return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }
};

struct MetropolisResult {
  double value;
  bool accepted;
};

/// Random-walk Metropolis update: propose current + scale * N(0, 1) and
/// accept with probability min(1, p(proposal) / p(current)), in log space.
template <typename LogDensity>
MetropolisResult random_walk_metropolis(double current, double current_log_density, double scale,
                                        LogDensity&& log_density, Rng& rng) {
  const double proposal = current + scale * standard_normal(rng);
  const double proposal_log_density = log_density(proposal);
  const double log_u = std::log(uniform_open(rng));
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (!(proposal_log_density > neg_inf)) return {current, false};
  if (!(current_log_density > neg_inf)) return {proposal, true};
  if (log_u < proposal_log_density - current_log_density) return {proposal, true};
  return {current, false};
}

/// Scale multiplied by 1.1 when the window acceptance exceeds 0.6 and by 0.9
/// when it falls below 0.4. The window counters are reset.
inline void adapt_metropolis_scale(SarState& state) {
  if (state.window_proposals > 0) {
    const double rate =
        static_cast<double>(state.window_accepts) / static_cast<double>(state.window_proposals);
    if (rate > 0.6) state.metropolis_scale *= 1.1;
    else if (rate < 0.4) state.metropolis_scale *= 0.9;
  }
  state.window_accepts = 0;
  state.window_proposals = 0;
}

struct NormalParams {
  double mean;
  double sd;
};

/// phi_gamma | rest before truncation: N(sum g_{t-1}'g_t / S, sigma_gamma^2 / S)
/// with S = sum g_{t-1}'g_{t-1} and gamma_{-1} = 0. Empty when S vanishes.
inline std::optional<NormalParams> ar_coefficient_conditional(const MatrixXd& gamma,
                                                              double sigma_gamma_sq) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 1; t < gamma.rows(); ++t) {
    num += gamma.row(t - 1).dot(gamma.row(t));
    den += gamma.row(t - 1).squaredNorm();
  }
  if (!(den > 1e-300)) return std::nullopt;
  return NormalParams{num / den, std::sqrt(sigma_gamma_sq / den)};
}

/// sigma_gamma^2 | rest ~ IG(1/2 + p T0 / 2, 1/aux + sum |g_t - phi g_{t-1}|^2 / 2)
inline InverseGammaParams innovation_variance_conditional(const MatrixXd& gamma, double phi,
                                                          double aux) {
  double ss = gamma.rows() > 0 ? gamma.row(0).squaredNorm() : 0.0;
  for (Eigen::Index t = 1; t < gamma.rows(); ++t) {
    ss += (gamma.row(t) - phi * gamma.row(t - 1)).squaredNorm();
  }
  return {0.5 + 0.5 * static_cast<double>(gamma.size()), 1.0 / aux + 0.5 * ss};
}

/// C = sum_t g_t g_t' + sigma_2^2 / sigma_eta^2 diag(1 / omega^2). Each
/// loading row is N(C^{-1} sum_t g_t e_it, sigma_2^2 C^{-1}).
inline MatrixXd loading_precision(const MatrixXd& gamma, double sigma2_sq, double sigma_eta_sq,
                                  const VectorXd& omega_sq) {
  MatrixXd c = gamma.transpose() * gamma;
  c.diagonal().array() += (sigma2_sq / sigma_eta_sq) / omega_sq.array();
  return c;
}

class SarSampler {
 public:
  SarSampler(const PretreatmentData& pre, const SpatialWeights& weights, SarConfig config = {})
      : config_(std::move(config)),
        t0_(pre.t0()),
        n_(pre.n_controls()),
        k_(pre.n_covariates()),
        W_(weights.W),
        w_(weights.w) {
    if (weights.n_controls() != n_ || W_.rows() != n_ || W_.cols() != n_) {
      throw DataError("spatial weights do not match the number of controls");
    }
    if (t0_ < 1) throw DataError("SAR sampler needs at least one pretreatment period");
    if (static_cast<int>(pre.covariates.size()) != t0_) {
      throw DataError("SAR sampler needs covariates for every pretreatment period");
    }
    if (!pre.controls.allFinite() || !pre.treated.allFinite()) {
      throw DataError("SAR sampler: pretreatment outcomes must be complete");
    }
    controls_ = pre.controls.transpose();
    lag_ = W_ * controls_ + w_ * pre.treated.transpose();
    design_.resize(static_cast<Eigen::Index>(t0_) * n_, k_);
    for (int t = 0; t < t0_; ++t) {
      if (!pre.covariates[t].allFinite()) {
        throw DataError("SAR sampler: pretreatment covariates must be complete");
      }
      design_.middleRows(static_cast<Eigen::Index>(t) * n_, n_) = pre.covariates[t];
    }
    gram_ = design_.transpose() * design_;
    lag_ss_ = lag_.squaredNorm();
  }

  const SarConfig& config() const { return config_; }
  int t0() const { return t0_; }
  int n_controls() const { return n_; }
  int n_covariates() const { return k_; }

  /// log|det(I - rho W)|; -inf when singular.
  double log_abs_det(double rho) const {
    MatrixXd a = -rho * W_;
    a.diagonal().array() += 1.0;
    return log_abs_determinant(a).value;
  }

  /// log|I - rho w alpha' - rho W|; -inf when singular.
  double log_abs_det_simultaneous(double rho, const VectorXd& alpha) const {
    if (alpha.size() != n_) throw DataError("simultaneous Jacobian needs the current weights");
    MatrixXd a = -rho * W_;
    a.noalias() -= rho * w_ * alpha.transpose();
    a.diagonal().array() += 1.0;
    return log_abs_determinant(a).value;
  }

  /// T0 log|I - rho W| - sum_t |A Y_t^c - rho w Y_0t - X_t beta - eta gamma_t|^2 / (2 sigma^2)
  double log_posterior_rho(double rho, const SarState& state) const {
    const Quadratic q = rho_quadratic(state);
    return log_posterior_rho(rho, q, state.sigma2_sq(), state.alpha);
  }

  /// Starting state: neutral factor and horseshoe scales; rho and beta from a
  /// few rounds of conditional maximisation with the factors switched off;
  /// proposal scale from the curvature of the rho conditional there. The
  /// simultaneous Jacobian needs starting weights.
  SarState initial_state(const VectorXd& alpha = VectorXd()) const {
    SarState s;
    if (config_.jacobian == RhoJacobian::simultaneous && alpha.size() != n_) {
      throw ConfigError("the simultaneous Jacobian needs the joint chain (starting weights missing)");
    }
    s.alpha = alpha;
    s.beta = HorseshoeState::initial(k_, sample_variance(flatten(controls_)));
    s.factors = FactorState::initial(t0_, n_, config_.factors);
    s.rho = 0.0;
    for (int round = 0; round < 3; ++round) {
      s.beta.coef = least_squares_beta(s.rho);
      const MatrixXd resid = controls_ - s.rho * lag_ - covariate_term(s.beta.coef);
      s.beta.noise_var =
          std::max(resid.squaredNorm() / static_cast<double>(resid.size()), 1e-12);
      s.rho = maximise_rho(s, round == 0 ? config_.rho_search_radius : 0.02, s.rho);
    }
    s.beta.coef = least_squares_beta(s.rho);
    const MatrixXd resid = controls_ - s.rho * lag_ - covariate_term(s.beta.coef);
    s.beta.noise_var = std::max(resid.squaredNorm() / static_cast<double>(resid.size()), 1e-12);
    s.metropolis_scale =
        config_.initial_scale > 0.0 ? config_.initial_scale : curvature_scale(s);
    return s;
  }

  /// beta | rest with response (I - rho W) Y_t^c - rho w Y_0t - eta gamma_t,
  /// then the horseshoe scale chain.
  void sample_beta_block(SarState& s, Rng& rng) const {
    if (k_ == 0) return;
    const MatrixXd target = controls_ - s.rho * lag_ - factor_term(s.factors);
    const VectorXd cross = design_.transpose() * flatten(target);
    s.beta.coef = sample_coefficients_from_moments(gram_, cross, s.beta, rng);
    s.beta.local_scale_sq = sample_local_scales(s.beta, rng, config_.horseshoe);
    sample_global_and_aux(s.beta, rng, config_.horseshoe);
  }

  /// phi_gamma, sigma_gamma^2 and its auxiliary, regenerate gamma by the AR
  /// recursion, then eta, sigma_eta^2, omega^2 and their auxiliaries.
  void sample_factor_block(SarState& s, Rng& rng) const {
    FactorState& f = s.factors;
    const int p = f.factors();
    const double h2 = config_.horseshoe.hyperscale * config_.horseshoe.hyperscale;
    const ScaleBounds bounds = config_.horseshoe.bounds;

    if (const auto phi = ar_coefficient_conditional(f.gamma, f.sigma_gamma_sq)) {
      f.phi_gamma = draw_truncated_normal(phi->mean, phi->sd, -1.0, 1.0, rng);
    }
    f.sigma_gamma_sq =
        innovation_variance_conditional(f.gamma, f.phi_gamma, f.aux_sigma_gamma).draw(rng, bounds);
    f.aux_sigma_gamma =
        InverseGammaParams{1.0, 1.0 / f.sigma_gamma_sq + 1.0 / h2}.draw(rng, bounds);

    const double sd_gamma = std::sqrt(f.sigma_gamma_sq);
    for (int t = 0; t < t0_; ++t) {
      for (int j = 0; j < p; ++j) {
        const double prev = t > 0 ? f.gamma(t - 1, j) : 0.0;
        f.gamma(t, j) = f.phi_gamma * prev + sd_gamma * standard_normal(rng);
      }
    }

    const MatrixXd resid = controls_ - s.rho * lag_ - covariate_term(s.beta.coef);
    const Eigen::LLT<MatrixXd> chol(
        loading_precision(f.gamma, s.sigma2_sq(), f.sigma_eta_sq, f.omega_sq));
    if (chol.info() != Eigen::Success) {
      throw NumericalError("factor loading precision is not positive definite");
    }
    const MatrixXd means = chol.solve(f.gamma.transpose() * resid.transpose());  // p x N
    for (int i = 0; i < n_; ++i) {
      f.eta.row(i) =
          draw_gaussian_from_precision(chol, means.col(i), s.sigma2_sq(), rng).transpose();
    }

    double q = 0.0;
    for (int i = 0; i < n_; ++i) {
      q += (f.eta.row(i).transpose().array().square() / f.omega_sq.array()).sum();
    }
    f.sigma_eta_sq =
        InverseGammaParams{0.5 + 0.5 * p * n_, 1.0 / f.aux_sigma_eta + 0.5 * q}.draw(rng, bounds);
    f.aux_sigma_eta = InverseGammaParams{1.0, 1.0 / f.sigma_eta_sq + 1.0 / h2}.draw(rng, bounds);
    for (int j = 0; j < p; ++j) {
      const double ss = f.eta.col(j).squaredNorm() / f.sigma_eta_sq;
      f.omega_sq[j] =
          InverseGammaParams{0.5 + 0.5 * n_, 1.0 / f.aux_omega[j] + 0.5 * ss}.draw(rng, bounds);
      f.aux_omega[j] = InverseGammaParams{1.0, 1.0 / f.omega_sq[j] + 1.0 / h2}.draw(rng, bounds);
    }
  }

  /// sigma_2^2 | rest ~ IG(1 + N T0 / 2, 1/nu_tau_beta + 1/nu_sigma2 + u'u / 2).
  void sample_noise_block(SarState& s, Rng& rng) const {
    sample_noise_variance(flatten(residuals(s)), s.beta, rng, config_.horseshoe);
  }

  /// One Metropolis update of rho; returns whether the proposal was taken.
  bool metropolis_rho_step(SarState& s, Rng& rng) const {
    const Quadratic q = rho_quadratic(s);
    const double sigma_sq = s.sigma2_sq();
    auto density = [&](double r) { return log_posterior_rho(r, q, sigma_sq, s.alpha); };
    const MetropolisResult step =
        random_walk_metropolis(s.rho, density(s.rho), s.metropolis_scale, density, rng);
    s.rho = step.value;
    ++s.proposal_count;
    ++s.window_proposals;
    if (step.accepted) {
      ++s.accept_count;
      ++s.window_accepts;
    }
    return step.accepted;
  }

  /// Full sweep: beta block, factor block, sigma_2^2, rho. During burn-in the
  /// proposal scale adapts every adapt_interval sweeps; afterwards it is fixed.
  bool sweep(SarState& s, Rng& rng, int iteration) const {
    sample_beta_block(s, rng);
    sample_factor_block(s, rng);
    sample_noise_block(s, rng);
    const bool accepted = metropolis_rho_step(s, rng);
    if (iteration < config_.chain.burn_in && (iteration + 1) % config_.adapt_interval == 0) {
      adapt_metropolis_scale(s);
    }
    check(s, iteration);
    return accepted;
  }

  /// e_t = Y_t^c - rho w Y_0t - rho W Y_t^c - X_t beta - eta gamma_t, as N x T0.
  MatrixXd residuals(const SarState& s) const {
    return controls_ - s.rho * lag_ - covariate_term(s.beta.coef) - factor_term(s.factors);
  }

 private:
  struct Quadratic {
    double aa = 0.0;
    double ab = 0.0;
    double bb = 0.0;
  };

  static VectorXd flatten(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
  }

  MatrixXd covariate_term(const VectorXd& beta) const {
    if (k_ == 0) return MatrixXd::Zero(n_, t0_);
    const VectorXd fitted = design_ * beta;
    return Eigen::Map<const MatrixXd>(fitted.data(), n_, t0_);
  }

  MatrixXd factor_term(const FactorState& f) const { return f.eta * f.gamma.transpose(); }

  /// |A - rho B|^2 = aa - 2 rho ab + rho^2 bb with A the rho-free part of the
  /// residual and B the spatial lag.
  Quadratic rho_quadratic(const SarState& s) const {
    const MatrixXd a = controls_ - covariate_term(s.beta.coef) - factor_term(s.factors);
    return {a.squaredNorm(), a.cwiseProduct(lag_).sum(), lag_ss_};
  }

  double log_posterior_rho(double rho, const Quadratic& q, double sigma_sq,
                           const VectorXd& alpha) const {
    const double logdet = config_.jacobian == RhoJacobian::simultaneous
                              ? log_abs_det_simultaneous(rho, alpha)
                              : log_abs_det(rho);
    if (!std::isfinite(logdet)) return -std::numeric_limits<double>::infinity();
    const double ss = q.aa - 2.0 * rho * q.ab + rho * rho * q.bb;
    return static_cast<double>(t0_) * logdet - 0.5 * ss / sigma_sq;
  }

  VectorXd least_squares_beta(double rho) const {
    if (k_ == 0) return VectorXd();
    const MatrixXd target = controls_ - rho * lag_;
    return design_.completeOrthogonalDecomposition().solve(flatten(target));
  }

  /// Grid search of the rho conditional on [centre - radius, centre + radius]
  /// followed by a finer local grid.
  double maximise_rho(const SarState& s, double radius, double centre) const {
    const Quadratic q = rho_quadratic(s);
    const double sigma_sq = s.sigma2_sq();
    double best = centre;
    double best_lp = log_posterior_rho(centre, q, sigma_sq, s.alpha);
    auto scan = [&](double lo, double hi, int points) {
      for (int i = 0; i <= points; ++i) {
        const double r = lo + (hi - lo) * static_cast<double>(i) / points;
        const double lp = log_posterior_rho(r, q, sigma_sq, s.alpha);
        if (lp > best_lp) {
          best_lp = lp;
          best = r;
        }
      }
    };
    scan(centre - radius, centre + radius, 400);
    const double step = 2.0 * radius / 400.0;
    scan(best - step, best + step, 200);
    return best;
  }

  double curvature_scale(const SarState& s) const {
    MatrixXd a = -s.rho * W_;
    a.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<MatrixXd> lu(a);
    double trace_g2 = 0.0;
    if (!lu_has_zero_pivot(lu)) {
      const MatrixXd g = W_ * lu.inverse();
      trace_g2 = (g * g).trace();
    }
    const double info = lag_ss_ / s.sigma2_sq() + static_cast<double>(t0_) * std::max(trace_g2, 0.0);
    if (!(info > 0.0) || !std::isfinite(info)) return 0.1;
    return 2.4 / std::sqrt(info);
  }

  static void check(const SarState& s, int iteration) {
    const FactorState& f = s.factors;
    const bool finite = std::isfinite(s.rho) && std::isfinite(s.sigma2_sq()) &&
                        s.beta.coef.allFinite() && f.gamma.allFinite() && f.eta.allFinite() &&
                        std::isfinite(f.sigma_gamma_sq) && std::isfinite(f.sigma_eta_sq) &&
                        f.omega_sq.allFinite();
    if (!finite) {
      std::ostringstream msg;
      msg << "SAR sampler produced a non-finite state: rho=" << s.rho
          << " sigma2^2=" << s.sigma2_sq() << " beta=[" << s.beta.coef.transpose() << "]";
      throw DivergenceError(msg.str(), iteration);
    }
  }

  SarConfig config_;
  int t0_;
  int n_;
  int k_;
  MatrixXd W_;
  VectorXd w_;
  MatrixXd controls_;  // N x T0, column t is Y_t^c
  MatrixXd lag_;       // N x T0, column t is W Y_t^c + w Y_0t
  MatrixXd design_;    // (N T0) x k, row t N + i is X_it
  MatrixXd gram_;
  double lag_ss_ = 0.0;
};

class SarRecorder {
 public:
  SarRecorder(const ChainConfig& config, int k) {
    const int m = config.stored_draws();
    post_.meta = config;
    post_.rho.resize(m);
    post_.beta.resize(m, k);
    post_.sigma2_sq.resize(m);
    post_.phi_gamma.resize(m);
    post_.sigma_gamma_sq.resize(m);
    post_.sigma_eta_sq.resize(m);
  }

  void record(int iteration, const SarState& s, bool accepted) {
    if (iteration >= post_.meta.burn_in) {
      ++post_.proposed;
      if (accepted) ++post_.accepted;
    }
    post_.metropolis_scale = s.metropolis_scale;
    if (!post_.meta.stores(iteration)) return;
    const int slot = post_.meta.slot(iteration);
    post_.rho[slot] = s.rho;
    post_.beta.row(slot) = s.beta.coef.transpose();
    post_.sigma2_sq[slot] = s.sigma2_sq();
    post_.phi_gamma[slot] = s.factors.phi_gamma;
    post_.sigma_gamma_sq[slot] = s.factors.sigma_gamma_sq;
    post_.sigma_eta_sq[slot] = s.factors.sigma_eta_sq;
  }

  SarPosterior take() { return std::move(post_); }

 private:
  SarPosterior post_;
};

/// Runs the SAR chain on pretreatment data only.
inline SarPosterior run_sar_chain(const PretreatmentData& pre, const SpatialWeights& weights,
                                  const SarConfig& config) {
  config.validate();
  if (config.jacobian == RhoJacobian::simultaneous) {
    throw ConfigError("the simultaneous Jacobian is only available in the joint chain");
  }
  const SarSampler sampler(pre, weights, config);
  Rng rng(config.chain.seed);
  SarState state = sampler.initial_state();
  SarRecorder recorder(config.chain, sampler.n_covariates());
  for (int it = 0; it < config.chain.iterations; ++it) {
    const bool accepted = sampler.sweep(state, rng, it);
    recorder.record(it, state, accepted);
  }
  return recorder.take();
}

inline SarPosterior run_sar_chain(const PanelData& panel, const SpatialWeights& weights,
                                  const SarConfig& config) {
  return run_sar_chain(extract_pretreatment(panel), weights, config);
}

}  // namespace spillscm
