#pragma once

#include <string>
#include <vector>

#include "scdonor/estimate.hpp"
#include "scdonor/panel.hpp"

namespace scdonor {

// Bias bounds for a fitted SC, all of the form
// N * max_i |beta_i| * (scenario-specific shift factor), with N the number
// of selected donors. Shifts are pre/post mean gaps on raw donor values.
struct SensitivityReport {
  double ov_bound = 0.0;
  double fp_bound = 0.0;
  int n_used = 0;
  double max_abs_weight = 0.0;
  double max_selected_shift = 0.0;
  double max_excluded_shift = 0.0;
  std::vector<double> tau_spill_grid;
  std::vector<double> fn_bounds;
  double sign_flip_tau_spill = 0.0;  // infinity when max weight is zero
};

// Bound on omitted-variable bias from unobserved donors, valid when the
// selected donors dominate the unobserved ones in weight and shift.
double ov_bias_bound(const Panel& panel, const ScFit& sc);

// Same form over the excluded donors' shifts; zero for an empty excluded set.
double fp_bias_bound(const Panel& panel, const ScFit& sc,
                     const std::vector<std::string>& excluded_ids);

struct FnCurve {
  std::vector<double> tau_spill_grid;
  std::vector<double> bounds;
  double sign_flip_tau_spill = 0.0;
};

// Bias from selected-but-invalid donors as a function of the (unknown)
// spillover magnitude, plus the magnitude at which the bound first covers
// the estimate itself.
FnCurve fn_bias_curve(const ScFit& sc, double tau_hat,
                      const std::vector<double>& tau_spill_grid);

SensitivityReport analyze_sensitivity(const Panel& panel, const ScFit& sc,
                                      double tau_hat,
                                      const std::vector<std::string>& excluded_ids,
                                      const std::vector<double>& tau_spill_grid);

}  // namespace scdonor
