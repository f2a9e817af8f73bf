#pragma once

#include <Eigen/Dense>

#include <sstream>

#include "spillscm/errors.hpp"
#include "spillscm/linalg.hpp"
#include "spillscm/panel.hpp"

namespace spillscm {

/// Synthetic weights alpha and spatial correlation rho.
struct StructuralParams {
  VectorXd alpha;
  double rho = 0.0;
};

inline constexpr double kDefaultInvertibilityThreshold = 1e-10;

struct InvertibilityCheck {
  double condition_number = 1.0;  // L1 estimate, +inf when singular
  bool ok = true;
};

/// I_N - rho * w * alpha' - rho * W
inline MatrixXd identification_matrix(const StructuralParams& params,
                                      const SpatialWeights& weights) {
  const Eigen::Index n = weights.w.size();
  if (params.alpha.size() != n || weights.W.rows() != n || weights.W.cols() != n) {
    throw DataError("alpha, w and W dimensions disagree");
  }
  MatrixXd m = -params.rho * weights.W;
  m.noalias() -= params.rho * weights.w * params.alpha.transpose();
  m.diagonal().array() += 1.0;
  return m;
}

/// Factorises I - rho*w*alpha' - rho*W once and recovers untreated
/// counterfactuals for any number of periods.
class IdentificationSolver {
 public:
  IdentificationSolver(StructuralParams params, const SpatialWeights& weights,
                       double threshold = kDefaultInvertibilityThreshold)
      : params_(std::move(params)), w_(weights.w), W_(weights.W) {
    lu_.compute(identification_matrix(params_, weights));
    rcond_ = reciprocal_condition(lu_);
    ok_ = rcond_ > threshold;
  }

  bool invertible() const { return ok_; }
  double condition_number() const {
    return rcond_ > 0.0 ? 1.0 / rcond_ : std::numeric_limits<double>::infinity();
  }
  const StructuralParams& params() const { return params_; }

  /// Y_t^c(0) = (I - rho w alpha' - rho W)^{-1} ((I - rho W) Y_t^c - rho w Y_0t)
  VectorXd counterfactual_controls(const VectorXd& yc, double y0) const {
    require_invertible();
    if (yc.size() != w_.size()) throw DataError("control outcome vector has wrong length");
    const VectorXd rhs = yc - params_.rho * (W_ * yc) - (params_.rho * y0) * w_;
    return lu_.solve(rhs);
  }

  double treatment_effect(const VectorXd& yc, double y0) const {
    return y0 - params_.alpha.dot(counterfactual_controls(yc, y0));
  }

  VectorXd spillover_effects(const VectorXd& yc, double y0) const {
    return yc - counterfactual_controls(yc, y0);
  }

 private:
  void require_invertible() const {
    if (!ok_) {
      std::ostringstream msg;
      msg << "I - rho*w*alpha' - rho*W is singular (rho=" << params_.rho
          << ", condition number " << condition_number() << ")";
      throw SingularSystemError(msg.str(), condition_number());
    }
  }

  StructuralParams params_;
  VectorXd w_;
  MatrixXd W_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  double rcond_ = 0.0;
  bool ok_ = false;
};

inline InvertibilityCheck check_invertibility(const StructuralParams& params,
                                              const SpatialWeights& weights,
                                              double threshold = kDefaultInvertibilityThreshold) {
  const IdentificationSolver solver(params, weights, threshold);
  return {solver.condition_number(), solver.invertible()};
}

inline VectorXd counterfactual_controls(const StructuralParams& params,
                                        const SpatialWeights& weights, const VectorXd& yc,
                                        double y0) {
  return IdentificationSolver(params, weights).counterfactual_controls(yc, y0);
}

/// Treatment effect on the treated unit at a post-treatment period.
inline double treatment_effect(const StructuralParams& params, const SpatialWeights& weights,
                               const VectorXd& yc, double y0) {
  return IdentificationSolver(params, weights).treatment_effect(yc, y0);
}

/// Spillover effects on the N controls at a post-treatment period.
inline VectorXd spillover_effects(const StructuralParams& params, const SpatialWeights& weights,
                                  const VectorXd& yc, double y0) {
  return IdentificationSolver(params, weights).spillover_effects(yc, y0);
}

/// Naive synthetic-control estimate Y_0t - alpha' Y_t^c. Under spillovers it
/// equals the treatment effect plus alpha'(Y_t^c(0) - Y_t^c(1)).
inline double standard_scm_gap(const VectorXd& alpha, const VectorXd& yc, double y0) {
  return y0 - alpha.dot(yc);
}

}  // namespace spillscm
