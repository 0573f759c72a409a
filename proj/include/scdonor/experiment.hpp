#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scdonor/panel.hpp"
#include "scdonor/selection.hpp"
#include "scdonor/simulator.hpp"

namespace scdonor {

// Donor-set construction strategies compared by the bias studies. All and
// Valid bypass spillover detection (Valid uses the simulator's ground truth).
enum class Procedure { All, Valid, S1, S2 };

std::string procedure_name(Procedure p);
Procedure procedure_from_name(const std::string& name);

struct ExperimentConfig {
  SimConfig sim;
  int replicates = 200;
  std::vector<Procedure> procedures{Procedure::All, Procedure::Valid,
                                    Procedure::S1, Procedure::S2};
  int k_donors = 10;
  SelectionConfig selection;
  bool debias = false;
  std::optional<SparsePriorConfig> sparse;
  std::uint64_t master_seed = 0;
  int jobs = 0;             // 0: hardware concurrency
  int instrument_cap = 50;  // max excluded donors used as instruments

  void validate() const;
};

struct ProcedureSummary {
  double mean_bias = 0.0;
  std::pair<double, double> mc_ci95{0.0, 0.0};
  std::vector<double> replicate_biases;
  int failure_count = 0;  // empty PVD / degenerate fit, excluded from the mean
};

struct BiasSummary {
  std::vector<std::pair<Procedure, ProcedureSummary>> per_procedure;

  const ProcedureSummary& find(Procedure p) const;
};

// Per replicate: simulate with a derived seed, build each procedure's donor
// set (sampling k donors from the PVDs, or handing the full set to the
// sparse-prior fit), optionally debias with the procedure's excluded donors,
// and record tau_hat - tau. Replicates run in parallel; output is identical
// for any worker count.
BiasSummary run_experiment(const ExperimentConfig& config);

// Reruns the experiment with the latent-shift scenario at each offset.
std::vector<std::pair<int, BiasSummary>> run_latent_shift_study(
    const ExperimentConfig& config, double shift_mean,
    const std::vector<int>& offsets);

struct SemiSyntheticRun {
  std::uint64_t seed = 0;
  std::string injected_id;
  int naive_abs_weight_rank = 0;  // 1 = largest |beta| in the naive fit
  bool injected_flagged = false;
  bool injected_excluded = false;  // not among the PVDs
  double tau_naive = 0.0;
  double tau_selected = 0.0;
};

struct SemiSyntheticReport {
  std::vector<SemiSyntheticRun> runs;
  double flag_rate = 0.0;         // fraction of seeds with the donor excluded
  double attenuation_rate = 0.0;  // fraction with |tau_naive| < |tau_selected|
};

// Injects a noisy proxy of the target, fits the SC with and without the
// selection step, and aggregates how often the proxy is caught and how often
// the naive estimate is attenuated toward zero.
SemiSyntheticReport run_semi_synthetic(const Panel& panel, double sigma,
                                       const SelectionConfig& selection,
                                       const std::vector<std::uint64_t>& seeds);

}  // namespace scdonor
