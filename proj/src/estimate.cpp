#include "scdonor/estimate.hpp"

#include <cmath>

#include "scdonor/error.hpp"

namespace scdonor {

namespace {

Eigen::MatrixXd donor_columns(const Panel& panel,
                              const std::vector<std::string>& ids) {
  Eigen::MatrixXd out(panel.n_times(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = panel.donors.col(panel.donor_index(ids[j]));
  }
  return out;
}

}  // namespace

ScFit fit_sc(const Panel& panel, const std::vector<std::string>& donor_ids,
             const std::optional<SparsePriorConfig>& sparse, double lambda) {
  panel.validate();
  if (donor_ids.empty()) throw_validation("fit_sc: donor id list is empty");
  if (panel.n_pre() < 2) {
    throw_validation("fit_sc: need at least 2 pre-intervention points");
  }

  Eigen::MatrixXd x = donor_columns(panel, donor_ids);
  Eigen::MatrixXd x_pre = x.topRows(panel.n_pre());
  Eigen::VectorXd y_pre = panel.target.head(panel.n_pre());

  ScFit out;
  out.donor_ids = donor_ids;
  if (sparse) {
    out.fit = fit_sparse_map(x_pre, y_pre, *sparse);
    out.sparse = true;
  } else {
    out.fit = fit_ridge(x_pre, y_pre, lambda);
  }
  return out;
}

EffectEstimate estimate_effect(const Panel& panel, const ScFit& sc) {
  panel.validate();
  if (sc.fit.design_dim != static_cast<Eigen::Index>(sc.donor_ids.size())) {
    throw_validation("estimate_effect: fit dimension != donor id count");
  }

  const Eigen::Index t_star = panel.intervention_time;
  const Eigen::Index n_post = panel.n_post();
  Eigen::MatrixXd x = donor_columns(panel, sc.donor_ids);

  EffectEstimate est;
  est.counterfactual.resize(n_post);
  est.per_time_effects.resize(n_post);
  est.observed = panel.target.tail(n_post);
  est.effect_lower.resize(n_post);
  est.effect_upper.resize(n_post);
  est.post_times.assign(panel.times.begin() + t_star, panel.times.end());

  const double rv = sc.fit.residual_variance;
  for (Eigen::Index k = 0; k < n_post; ++k) {
    Eigen::VectorXd row = x.row(t_star + k).transpose();
    est.counterfactual(k) = sc.fit.predict(row);
    est.per_time_effects(k) = est.observed(k) - est.counterfactual(k);
    const double half = 1.96 * std::sqrt(rv * (1.0 + sc.fit.leverage(row)));
    est.effect_lower(k) = est.per_time_effects(k) - half;
    est.effect_upper(k) = est.per_time_effects(k) + half;
  }
  est.tau_hat = est.per_time_effects.mean();

  // Uncertainty on the mean gap: fresh-noise variance shrinks with n_post;
  // weight-estimation error is shared across post points and enters through
  // the leverage of the mean post-period donor profile.
  Eigen::VectorXd mean_row =
      x.bottomRows(n_post).colwise().mean().transpose();
  const double var_tau =
      rv * (1.0 / static_cast<double>(n_post) + sc.fit.leverage(mean_row));
  const double half = 1.96 * std::sqrt(var_tau);
  est.interval_95 = {est.tau_hat - half, est.tau_hat + half};
  return est;
}

}  // namespace scdonor
