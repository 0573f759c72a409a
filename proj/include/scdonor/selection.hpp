#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scdonor/panel.hpp"
#include "scdonor/regression.hpp"

namespace scdonor {

enum class SelectionProcedure { S1, S2 };

struct SelectionConfig {
  SelectionProcedure procedure = SelectionProcedure::S2;
  double ppi_level = 0.8;  // phi
  int s1_count = 10;
  std::optional<int> time_average_bucket;
  std::optional<double> ridge_lambda;  // otherwise pooled LOO-CV
  std::uint64_t seed = 0;

  void validate() const;
};

struct DonorForecast {
  std::string id;
  double predicted = 0.0;
  double actual = 0.0;
  double abs_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool flagged = false;  // actual outside the phi-level interval
};

// One-step-ahead forecasts of every donor at the intervention time, computed
// on normalized (and optionally time-averaged) data. Shared by S1 and S2.
struct ForecastTable {
  std::vector<DonorForecast> donors;
  double ridge_lambda = 0.0;  // resolved value actually used
  double ppi_level = 0.8;
};

struct SelectionReport {
  std::vector<DonorForecast> donors;
  std::vector<std::string> pvd_ids;
  std::vector<std::string> excluded_ids;
  SelectionProcedure procedure = SelectionProcedure::S2;
  double ppi_level = 0.8;
  double ridge_lambda = 0.0;
  bool empty_selection = false;  // S2 kept nothing; first-class outcome
};

struct DonorForecastResult {
  double predicted = 0.0;
  PredictionInterval interval;
  double actual = 0.0;
};

// Single-donor spillover test on an already normalized panel: regress
// x_i^{t'} on all donors at t'-1 over pre-intervention rows, predict at the
// last pre row, compare with the first post value.
DonorForecastResult forecast_donor(const Panel& normalized_panel,
                                   Eigen::Index donor_index,
                                   const SelectionConfig& config);

// All donors at once against the shared lagged design (one factorization,
// one pooled LOO lambda). Applies time averaging first when configured,
// then normalizes.
ForecastTable compute_forecasts(const Panel& panel, const SelectionConfig& config);

// S1 keeps the s1_count donors with smallest absolute error (ties broken by
// panel order); S2 keeps every unflagged donor.
SelectionReport apply_selection_rule(const ForecastTable& table,
                                     const SelectionConfig& config);

SelectionReport select_donors(const Panel& panel, const SelectionConfig& config);

// Uniform sample without replacement of min(k, |pvd|) ids; identity when the
// PVD set has at most k members. Deterministic in seed.
std::vector<std::string> sample_pvds(const SelectionReport& report, int k,
                                     std::uint64_t seed);

}  // namespace scdonor
