#pragma once

#include <string>
#include <vector>

#include "scdonor/estimate.hpp"
#include "scdonor/panel.hpp"
#include "scdonor/regression.hpp"

namespace scdonor {

struct ProximalFit {
  RegressionFit sc_fit;  // debiased weights over the selected donors
  Eigen::VectorXd stage1_r2;
  std::vector<std::string> selected_ids;
  std::vector<std::string> excluded_ids;   // instruments actually used
  std::vector<std::string> dropped_instrument_ids;  // degenerate, removed
  bool weak_instrument_flag = false;
};

// Two-stage fit on pre-intervention rows: the excluded donors instrument the
// selected ones, correcting attenuation when donors are noisy proxies.
// Post-intervention values of excluded donors are never read. Stage 1 runs
// unpenalized so identical instrument and donor sets reduce exactly to the
// plain SC fit.
ProximalFit fit_proximal_sc(const Panel& panel,
                            const std::vector<std::string>& selected_ids,
                            const std::vector<std::string>& excluded_ids);

// Convenience: debiased weights wrapped for estimate_effect.
ScFit to_sc_fit(const ProximalFit& fit);

}  // namespace scdonor
