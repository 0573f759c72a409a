#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "scdonor/panel.hpp"
#include "scdonor/regression.hpp"

namespace scdonor {

struct ScFit {
  RegressionFit fit;
  std::vector<std::string> donor_ids;
  bool sparse = false;
};

struct EffectEstimate {
  double tau_hat = 0.0;
  Eigen::VectorXd per_time_effects;  // y_t - yhat_cf_t over post points
  std::pair<double, double> interval_95{0.0, 0.0};
  Eigen::VectorXd counterfactual;
  Eigen::VectorXd observed;
  Eigen::VectorXd effect_lower;  // per-time 95% band on the effect
  Eigen::VectorXd effect_upper;
  std::vector<std::int64_t> post_times;
};

inline constexpr double kDefaultScLambda = 1e-6;

// Regresses the target on the named donors over pre-intervention rows.
// The plain variant uses a small ridge for numerical stability; the sparse
// variant applies the mixture prior over the full donor list given.
ScFit fit_sc(const Panel& panel, const std::vector<std::string>& donor_ids,
             const std::optional<SparsePriorConfig>& sparse = std::nullopt,
             double lambda = kDefaultScLambda);

// Post-period counterfactual from the fitted weights; tau_hat is the mean
// pointwise gap. The 95% interval uses the fit's predictive variance at the
// mean post-period donor profile plus the fresh-noise term.
EffectEstimate estimate_effect(const Panel& panel, const ScFit& sc);

}  // namespace scdonor
