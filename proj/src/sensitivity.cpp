#include "scdonor/sensitivity.hpp"

#include <cmath>
#include <limits>

#include "scdonor/error.hpp"

namespace scdonor {

namespace {

double max_abs_weight(const ScFit& sc) {
  return sc.fit.coefficients.size() > 0 ? sc.fit.coefficients.cwiseAbs().maxCoeff()
                                        : 0.0;
}

double pre_post_shift(const Panel& panel, Eigen::Index donor) {
  const Eigen::Index t = panel.intervention_time;
  const double pre = panel.donors.col(donor).head(t).mean();
  const double post = panel.donors.col(donor).tail(panel.n_times() - t).mean();
  return std::abs(pre - post);
}

double max_shift(const Panel& panel, const std::vector<std::string>& ids) {
  double m = 0.0;
  for (const auto& id : ids) {
    m = std::max(m, pre_post_shift(panel, panel.donor_index(id)));
  }
  return m;
}

}  // namespace

double ov_bias_bound(const Panel& panel, const ScFit& sc) {
  panel.validate();
  const double n = static_cast<double>(sc.donor_ids.size());
  return n * max_abs_weight(sc) * max_shift(panel, sc.donor_ids);
}

double fp_bias_bound(const Panel& panel, const ScFit& sc,
                     const std::vector<std::string>& excluded_ids) {
  panel.validate();
  if (excluded_ids.empty()) return 0.0;
  const double n = static_cast<double>(sc.donor_ids.size());
  return n * max_abs_weight(sc) * max_shift(panel, excluded_ids);
}

FnCurve fn_bias_curve(const ScFit& sc, double tau_hat,
                      const std::vector<double>& tau_spill_grid) {
  if (tau_spill_grid.empty()) throw_validation("fn_bias_curve: empty grid");
  for (double v : tau_spill_grid) {
    if (v < 0.0) throw_validation("fn_bias_curve: grid values must be >= 0");
  }
  const double n = static_cast<double>(sc.donor_ids.size());
  const double w = max_abs_weight(sc);

  FnCurve curve;
  curve.tau_spill_grid = tau_spill_grid;
  curve.bounds.reserve(tau_spill_grid.size());
  for (double v : tau_spill_grid) curve.bounds.push_back(n * w * v);
  curve.sign_flip_tau_spill =
      n * w > 0.0 ? std::abs(tau_hat) / (n * w)
                  : std::numeric_limits<double>::infinity();
  return curve;
}

SensitivityReport analyze_sensitivity(const Panel& panel, const ScFit& sc,
                                      double tau_hat,
                                      const std::vector<std::string>& excluded_ids,
                                      const std::vector<double>& tau_spill_grid) {
  SensitivityReport report;
  report.n_used = static_cast<int>(sc.donor_ids.size());
  report.max_abs_weight = max_abs_weight(sc);
  report.max_selected_shift = max_shift(panel, sc.donor_ids);
  report.max_excluded_shift = excluded_ids.empty() ? 0.0 : max_shift(panel, excluded_ids);
  report.ov_bound = ov_bias_bound(panel, sc);
  report.fp_bound = fp_bias_bound(panel, sc, excluded_ids);
  FnCurve curve = fn_bias_curve(sc, tau_hat, tau_spill_grid);
  report.tau_spill_grid = std::move(curve.tau_spill_grid);
  report.fn_bounds = std::move(curve.bounds);
  report.sign_flip_tau_spill = curve.sign_flip_tau_spill;
  return report;
}

}  // namespace scdonor
