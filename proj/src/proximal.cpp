#include "scdonor/proximal.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scdonor/error.hpp"

namespace scdonor {

ProximalFit fit_proximal_sc(const Panel& panel,
                            const std::vector<std::string>& selected_ids,
                            const std::vector<std::string>& excluded_ids) {
  panel.validate();
  if (selected_ids.empty()) {
    throw_validation("proximal: selected donor list is empty");
  }
  if (excluded_ids.empty()) {
    throw_validation(
        "proximal: excluded donor set is empty; fall back to the plain SC fit");
  }
  if (panel.n_pre() < 2) {
    throw_validation("proximal: need at least 2 pre-intervention points");
  }
  {
    std::set<std::string> sel(selected_ids.begin(), selected_ids.end());
    for (const auto& id : excluded_ids) {
      if (sel.count(id)) {
        throw_validation("proximal: donor '" + id +
                         "' appears in both the selected and excluded sets");
      }
    }
  }

  const Eigen::Index n_pre = panel.n_pre();
  Eigen::MatrixXd x(n_pre, static_cast<Eigen::Index>(selected_ids.size()));
  for (std::size_t j = 0; j < selected_ids.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) =
        panel.donors.col(panel.donor_index(selected_ids[j])).head(n_pre);
  }

  // Degenerate instruments (constant over the pre period) destabilize the
  // stage-1 projection; drop them and record the ids.
  ProximalFit out;
  std::vector<Eigen::Index> z_cols;
  for (const auto& id : excluded_ids) {
    const Eigen::Index c = panel.donor_index(id);
    const auto pre = panel.donors.col(c).head(n_pre);
    const double sd = std::sqrt((pre.array() - pre.mean()).square().sum() /
                                static_cast<double>(n_pre - 1));
    if (sd > 0.0 && std::isfinite(sd)) {
      z_cols.push_back(c);
      out.excluded_ids.push_back(id);
    } else {
      out.dropped_instrument_ids.push_back(id);
    }
  }
  if (z_cols.empty()) {
    throw_validation(
        "proximal: every excluded donor is degenerate over the pre period");
  }

  Eigen::MatrixXd z(n_pre, static_cast<Eigen::Index>(z_cols.size()));
  for (std::size_t j = 0; j < z_cols.size(); ++j) {
    z.col(static_cast<Eigen::Index>(j)) = panel.donors.col(z_cols[j]).head(n_pre);
  }
  Eigen::VectorXd y = panel.target.head(n_pre);

  TwoStageFit ts = fit_two_stage(y, x, z, /*lambda1=*/0.0,
                                 /*lambda2=*/kDefaultScLambda);
  out.sc_fit = std::move(ts.fit);
  out.stage1_r2 = std::move(ts.stage1_r2);
  out.selected_ids = selected_ids;
  out.weak_instrument_flag = ts.weak_instruments;
  return out;
}

ScFit to_sc_fit(const ProximalFit& fit) {
  ScFit sc;
  sc.fit = fit.sc_fit;
  sc.donor_ids = fit.selected_ids;
  sc.sparse = false;
  return sc;
}

}  // namespace scdonor
