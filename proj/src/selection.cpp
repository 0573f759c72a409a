#include "scdonor/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scdonor/error.hpp"
#include "scdonor/mathutil.hpp"
#include "scdonor/rng.hpp"

namespace scdonor {

namespace {

// Lagged training slices for the one-step forecast at the intervention:
// features are donor rows 0..t*-2, labels rows 1..t*-1, the test row is
// t*-1 and the test label row is t*.
struct LaggedDesign {
  Eigen::MatrixXd features;  // (t*-1) x N
  Eigen::MatrixXd labels;    // (t*-1) x N
  Eigen::VectorXd test_row;  // N
  Eigen::VectorXd actuals;   // N
};

LaggedDesign build_lagged(const Panel& panel) {
  const Eigen::Index t = panel.intervention_time;
  if (t < 3) {
    throw_validation(
        "selection: need at least 3 pre-intervention points for lagged "
        "training pairs");
  }
  LaggedDesign d;
  d.features = panel.donors.topRows(t - 1);
  d.labels = panel.donors.middleRows(1, t - 1);
  d.test_row = panel.donors.row(t - 1).transpose();
  d.actuals = panel.donors.row(t).transpose();
  return d;
}

}  // namespace

void SelectionConfig::validate() const {
  if (!(ppi_level > 0.0 && ppi_level < 1.0)) {
    throw_validation("selection config: ppi_level must lie in (0, 1)");
  }
  if (s1_count < 1) throw_validation("selection config: s1_count must be >= 1");
  if (time_average_bucket && *time_average_bucket < 1) {
    throw_validation("selection config: time_average_bucket must be >= 1");
  }
  if (ridge_lambda && !(*ridge_lambda > 0.0)) {
    throw_validation("selection config: ridge_lambda must be > 0");
  }
}

DonorForecastResult forecast_donor(const Panel& normalized_panel,
                                   Eigen::Index donor_index,
                                   const SelectionConfig& config) {
  config.validate();
  normalized_panel.validate();
  if (donor_index < 0 || donor_index >= normalized_panel.n_donors()) {
    throw_validation("forecast_donor: donor index out of range");
  }
  const LaggedDesign d = build_lagged(normalized_panel);

  double lambda = config.ridge_lambda
                      ? *config.ridge_lambda
                      : choose_ridge_lambda(d.features, d.labels,
                                            default_lambda_grid());
  RidgeBasis basis(d.features, lambda);
  RegressionFit fit = basis.fit(d.labels.col(donor_index));

  DonorForecastResult out;
  out.interval = predict_interval(fit, d.test_row, config.ppi_level);
  out.predicted = out.interval.center;
  out.actual = d.actuals(donor_index);
  return out;
}

ForecastTable compute_forecasts(const Panel& panel, const SelectionConfig& config) {
  config.validate();
  Panel working = config.time_average_bucket
                      ? time_average(panel, *config.time_average_bucket)
                      : panel;
  auto [normalized, params] = normalize(working);
  (void)params;

  const LaggedDesign d = build_lagged(normalized);
  const Eigen::Index n = d.features.rows();
  const Eigen::Index N = normalized.n_donors();

  double lambda = config.ridge_lambda
                      ? *config.ridge_lambda
                      : choose_ridge_lambda(d.features, d.labels,
                                            default_lambda_grid());
  RidgeBasis basis(d.features, lambda);

  // Shared geometry: the test-point leverage and the hat trace do not depend
  // on which donor is being forecast.
  const double lev = 1.0 / static_cast<double>(n) + basis.leverage_quad(d.test_row);
  const double edof = basis.hat_trace() + 1.0;
  const double z = normal_quantile(0.5 * (1.0 + config.ppi_level));

  Eigen::MatrixXd fitted_c = basis.fitted_centered(d.labels);
  Eigen::RowVectorXd label_means = d.labels.colwise().mean();
  Eigen::MatrixXd resid = (d.labels.rowwise() - label_means) - fitted_c;
  Eigen::VectorXd preds = basis.predict_columns(d.labels, d.test_row);

  ForecastTable table;
  table.ridge_lambda = lambda;
  table.ppi_level = config.ppi_level;
  table.donors.resize(static_cast<std::size_t>(N));

  for (Eigen::Index i = 0; i < N; ++i) {
    auto& f = table.donors[static_cast<std::size_t>(i)];
    f.id = normalized.donor_ids[static_cast<std::size_t>(i)];
    f.predicted = preds(i);
    f.actual = d.actuals(i);
    f.abs_error = std::abs(f.actual - f.predicted);
    const double rss = resid.col(i).squaredNorm();
    const double rv = rss / std::max(1.0, static_cast<double>(n) - edof);
    const double half = z * std::sqrt(rv * (1.0 + lev));
    f.lower = f.predicted - half;
    f.upper = f.predicted + half;
    f.flagged = (f.actual < f.lower) || (f.actual > f.upper);
  }
  return table;
}

SelectionReport apply_selection_rule(const ForecastTable& table,
                                     const SelectionConfig& config) {
  SelectionReport report;
  report.donors = table.donors;
  report.procedure = config.procedure;
  report.ppi_level = table.ppi_level;
  report.ridge_lambda = table.ridge_lambda;

  const std::size_t N = table.donors.size();
  std::vector<bool> keep(N, false);
  if (config.procedure == SelectionProcedure::S1) {
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return table.donors[a].abs_error < table.donors[b].abs_error;
    });
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.s1_count), N);
    for (std::size_t j = 0; j < k; ++j) keep[order[j]] = true;
  } else {
    for (std::size_t i = 0; i < N; ++i) keep[i] = !table.donors[i].flagged;
  }

  for (std::size_t i = 0; i < N; ++i) {
    if (keep[i]) {
      report.pvd_ids.push_back(table.donors[i].id);
    } else {
      report.excluded_ids.push_back(table.donors[i].id);
    }
  }
  report.empty_selection = report.pvd_ids.empty();
  return report;
}

SelectionReport select_donors(const Panel& panel, const SelectionConfig& config) {
  return apply_selection_rule(compute_forecasts(panel, config), config);
}

std::vector<std::string> sample_pvds(const SelectionReport& report, int k,
                                     std::uint64_t seed) {
  if (k < 1) throw_validation("sample_pvds: k must be >= 1");
  if (report.pvd_ids.empty()) {
    throw_validation("sample_pvds: the PVD set is empty");
  }
  if (static_cast<std::size_t>(k) >= report.pvd_ids.size()) {
    return report.pvd_ids;
  }
  std::vector<std::string> pool = report.pvd_ids;
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

}  // namespace scdonor
