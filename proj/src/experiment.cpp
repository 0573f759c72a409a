#include "scdonor/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include "scdonor/error.hpp"
#include "scdonor/estimate.hpp"
#include "scdonor/proximal.hpp"
#include "scdonor/rng.hpp"

namespace scdonor {

namespace {

// Seed-stream tags so every random decision in a replicate draws from its
// own derived stream, independent of scheduling.
constexpr std::uint64_t kStreamSim = 1;
constexpr std::uint64_t kStreamSample = 2;
constexpr std::uint64_t kStreamInstruments = 3;

std::vector<std::string> sample_ids(const std::vector<std::string>& pool, int k,
                                    std::uint64_t seed) {
  if (static_cast<std::size_t>(k) >= pool.size()) return pool;
  std::vector<std::string> ids = pool;
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(ids.size()) - 1);
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(k));
  return ids;
}

struct ReplicateResult {
  // One entry per configured procedure; NaN marks a failed replicate.
  std::vector<double> biases;
};

}  // namespace

std::string procedure_name(Procedure p) {
  switch (p) {
    case Procedure::All: return "All";
    case Procedure::Valid: return "Valid";
    case Procedure::S1: return "S1";
    case Procedure::S2: return "S2";
  }
  return "?";
}

Procedure procedure_from_name(const std::string& name) {
  if (name == "All") return Procedure::All;
  if (name == "Valid") return Procedure::Valid;
  if (name == "S1") return Procedure::S1;
  if (name == "S2") return Procedure::S2;
  throw_validation("unknown procedure '" + name + "'");
}

void ExperimentConfig::validate() const {
  sim.validate();
  selection.validate();
  if (replicates < 1) throw_validation("experiment: replicates must be >= 1");
  if (k_donors < 1) throw_validation("experiment: k_donors must be >= 1");
  if (procedures.empty()) throw_validation("experiment: no procedures given");
  if (instrument_cap < 1) throw_validation("experiment: instrument_cap must be >= 1");
  if (jobs < 0) throw_validation("experiment: jobs must be >= 0");
  if (sparse && debias) {
    throw_validation("experiment: sparse and debias cannot be combined");
  }
  if (sparse) sparse->validate();
}

const ProcedureSummary& BiasSummary::find(Procedure p) const {
  for (const auto& [proc, summary] : per_procedure) {
    if (proc == p) return summary;
  }
  throw_validation("procedure '" + procedure_name(p) + "' not in summary");
}

namespace {

ReplicateResult run_replicate(const ExperimentConfig& config, int r) {
  ReplicateResult result;
  result.biases.assign(config.procedures.size(),
                       std::numeric_limits<double>::quiet_NaN());

  SimConfig sim = config.sim;
  sim.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(r),
                         kStreamSim);
  SimTrace trace = simulate(sim);
  const Panel& panel = trace.panel;

  const bool needs_selection = std::any_of(
      config.procedures.begin(), config.procedures.end(),
      [](Procedure p) { return p == Procedure::S1 || p == Procedure::S2; });

  ForecastTable table;
  if (needs_selection) {
    table = compute_forecasts(panel, config.selection);
  }

  std::vector<std::string> valid_ids;
  for (std::size_t i = 0; i < trace.invalid_mask.size(); ++i) {
    if (!trace.invalid_mask[i]) valid_ids.push_back(panel.donor_ids[i]);
  }

  for (std::size_t pi = 0; pi < config.procedures.size(); ++pi) {
    const Procedure proc = config.procedures[pi];
    const std::uint64_t proc_tag = static_cast<std::uint64_t>(proc) + 1;
    const std::uint64_t sample_seed =
        derive_seed(config.master_seed, static_cast<std::uint64_t>(r),
                    kStreamSample * 1000 + proc_tag);
    try {
      std::vector<std::string> pool;       // donor set before sampling
      std::vector<std::string> excluded;   // instruments for debiasing
      switch (proc) {
        case Procedure::All:
          pool = panel.donor_ids;
          break;
        case Procedure::Valid:
          pool = valid_ids;
          break;
        case Procedure::S1:
        case Procedure::S2: {
          SelectionConfig rule_cfg = config.selection;
          rule_cfg.procedure = proc == Procedure::S1 ? SelectionProcedure::S1
                                                     : SelectionProcedure::S2;
          SelectionReport report = apply_selection_rule(table, rule_cfg);
          if (report.empty_selection) {
            throw Error(ErrorKind::numerical, "empty PVD set");
          }
          pool = report.pvd_ids;
          excluded = report.excluded_ids;
          break;
        }
      }
      if (pool.empty()) throw Error(ErrorKind::numerical, "empty donor pool");

      std::vector<std::string> ids;
      ScFit fit;
      if (config.sparse) {
        ids = pool;  // regularization replaces the sampling step
        fit = fit_sc(panel, ids, config.sparse);
      } else {
        ids = sample_ids(pool, config.k_donors, sample_seed);
        fit = fit_sc(panel, ids);
      }

      if (config.debias) {
        if (excluded.empty()) {
          // All/Valid have no selection step; instrument with the unselected
          // remainder of their pools.
          std::set<std::string> chosen(ids.begin(), ids.end());
          for (const auto& id : pool) {
            if (!chosen.count(id)) excluded.push_back(id);
          }
        }
        const std::uint64_t z_seed =
            derive_seed(config.master_seed, static_cast<std::uint64_t>(r),
                        kStreamInstruments * 1000 + proc_tag);
        std::vector<std::string> instruments =
            sample_ids(excluded, config.instrument_cap, z_seed);
        ProximalFit prox = fit_proximal_sc(panel, ids, instruments);
        fit = to_sc_fit(prox);
      }

      EffectEstimate est = estimate_effect(panel, fit);
      result.biases[pi] = est.tau_hat - trace.true_tau;
    } catch (const std::exception&) {
      // counted as a failure for this procedure, replicate continues
    }
  }
  return result;
}

}  // namespace

BiasSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int R = config.replicates;

  std::vector<ReplicateResult> results(static_cast<std::size_t>(R));
  int jobs = config.jobs > 0
                 ? config.jobs
                 : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, R));

  if (jobs == 1) {
    for (int r = 0; r < R; ++r) {
      results[static_cast<std::size_t>(r)] = run_replicate(config, r);
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int r = next.fetch_add(1); r < R; r = next.fetch_add(1)) {
        results[static_cast<std::size_t>(r)] = run_replicate(config, r);
      }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // Deterministic reduction in replicate order.
  BiasSummary summary;
  for (std::size_t pi = 0; pi < config.procedures.size(); ++pi) {
    ProcedureSummary ps;
    for (int r = 0; r < R; ++r) {
      const double b = results[static_cast<std::size_t>(r)].biases[pi];
      if (std::isnan(b)) {
        ++ps.failure_count;
      } else {
        ps.replicate_biases.push_back(b);
      }
    }
    const auto n = static_cast<double>(ps.replicate_biases.size());
    if (n > 0) {
      double sum = 0.0;
      for (double b : ps.replicate_biases) sum += b;
      ps.mean_bias = sum / n;
      double ss = 0.0;
      for (double b : ps.replicate_biases) {
        ss += (b - ps.mean_bias) * (b - ps.mean_bias);
      }
      const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      const double half = 1.96 * sd / std::sqrt(n);
      ps.mc_ci95 = {ps.mean_bias - half, ps.mean_bias + half};
    }
    summary.per_procedure.emplace_back(config.procedures[pi], std::move(ps));
  }
  return summary;
}

std::vector<std::pair<int, BiasSummary>> run_latent_shift_study(
    const ExperimentConfig& config, double shift_mean,
    const std::vector<int>& offsets) {
  if (offsets.empty()) throw_validation("latent shift study: no offsets given");
  std::vector<std::pair<int, BiasSummary>> out;
  for (int offset : offsets) {
    if (offset < 0) throw_validation("latent shift study: offsets must be >= 0");
    ExperimentConfig cfg = config;
    cfg.sim.latent_shift = LatentShift{1, shift_mean, offset};
    out.emplace_back(offset, run_experiment(cfg));
  }
  return out;
}

SemiSyntheticReport run_semi_synthetic(const Panel& panel, double sigma,
                                       const SelectionConfig& selection,
                                       const std::vector<std::uint64_t>& seeds) {
  panel.validate();
  if (seeds.empty()) throw_validation("semi-synthetic: no seeds given");

  SemiSyntheticReport report;
  int n_flagged = 0;
  int n_attenuated = 0;
  int n_compared = 0;
  for (std::uint64_t seed : seeds) {
    auto [augmented, injected_id] = inject_synthetic_donor(panel, sigma, seed);

    SemiSyntheticRun run;
    run.seed = seed;
    run.injected_id = injected_id;

    ScFit naive = fit_sc(augmented, augmented.donor_ids);
    const Eigen::Index inj = augmented.donor_index(injected_id);
    const double w = std::abs(naive.fit.coefficients(inj));
    run.naive_abs_weight_rank = 1;
    for (Eigen::Index j = 0; j < naive.fit.coefficients.size(); ++j) {
      if (j != inj && std::abs(naive.fit.coefficients(j)) > w) {
        ++run.naive_abs_weight_rank;
      }
    }
    run.tau_naive = estimate_effect(augmented, naive).tau_hat;

    SelectionReport sel = select_donors(augmented, selection);
    run.injected_flagged = sel.donors[static_cast<std::size_t>(inj)].flagged;
    run.injected_excluded =
        std::find(sel.pvd_ids.begin(), sel.pvd_ids.end(), injected_id) ==
        sel.pvd_ids.end();
    if (run.injected_excluded) ++n_flagged;

    if (!sel.empty_selection) {
      ScFit chosen = fit_sc(augmented, sel.pvd_ids);
      run.tau_selected = estimate_effect(augmented, chosen).tau_hat;
      ++n_compared;
      if (std::abs(run.tau_naive) < std::abs(run.tau_selected)) ++n_attenuated;
    } else {
      run.tau_selected = std::numeric_limits<double>::quiet_NaN();
    }
    report.runs.push_back(std::move(run));
  }
  report.flag_rate =
      static_cast<double>(n_flagged) / static_cast<double>(seeds.size());
  report.attenuation_rate =
      n_compared > 0 ? static_cast<double>(n_attenuated) / n_compared : 0.0;
  return report;
}

}  // namespace scdonor
