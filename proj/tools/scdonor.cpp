// Command-line front-end: simulation, donor selection, effect estimation,
// debiasing, sensitivity bounds, and Monte Carlo studies over CSV panels and
// JSON configs. Every run writes a manifest with the fully resolved
// configuration so it can be reproduced from the manifest alone.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "scdonor/error.hpp"
#include "scdonor/estimate.hpp"
#include "scdonor/experiment.hpp"
#include "scdonor/json_io.hpp"
#include "scdonor/proximal.hpp"
#include "scdonor/selection.hpp"
#include "scdonor/sensitivity.hpp"
#include "scdonor/simulator.hpp"
#include "scdonor/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scdonor;

namespace {

struct GlobalOpts {
  std::string output_dir = ".";
  std::string format = "json";  // stdout summary format
};

void add_global(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--output-dir", g.output_dir, "Directory for output files");
  cmd->add_option("--format", g.format, "Stdout summary format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

fs::path out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.output_dir);
  return fs::path(g.output_dir) / name;
}

void write_manifest(const GlobalOpts& g, const std::string& command,
                    const json& config, const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "scdonor";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  m["outputs"] = outputs;
  write_text_file(out_path(g, "manifest.json").string(), m.dump(2));
}

struct PanelArgs {
  std::string path;
  std::string target = "target";
  std::int64_t intervention = 0;
};

void add_panel_args(CLI::App* cmd, PanelArgs& a) {
  cmd->add_option("--panel", a.path, "Panel CSV file")->required();
  cmd->add_option("--target", a.target, "Target column name");
  cmd->add_option("--intervention", a.intervention,
                  "First post-intervention time value")
      ->required();
}

double pre_target_sd(const Panel& panel) {
  const auto pre = panel.target.head(panel.n_pre());
  return std::sqrt((pre.array() - pre.mean()).square().sum() /
                   static_cast<double>(panel.n_pre() - 1));
}

std::vector<double> tau_grid(double grid_max, int grid_points) {
  if (grid_points < 2 || grid_max <= 0) {
    throw_validation("sensitivity grid needs grid_max > 0 and grid_points >= 2");
  }
  std::vector<double> grid;
  for (int i = 0; i < grid_points; ++i) {
    grid.push_back(grid_max * static_cast<double>(i) / (grid_points - 1));
  }
  return grid;
}

// Shared body of estimate / debias / sensitivity.
struct EstimateFlags {
  PanelArgs panel;
  std::string selection_path;
  int k = 0;  // 0: fit on the full PVD set
  bool debias = false;
  bool sparse = false;
  double sparse_eta = 0.99;
  double sparse_narrow = 0.001;
  double sparse_wide = 1.0;
  int sparse_iters = 200;
  double sparse_tol = 1e-8;
  int instrument_cap = 50;
  std::uint64_t seed = 0;
  double grid_max = 4.0;
  int grid_points = 41;
};

void add_estimate_common(CLI::App* cmd, EstimateFlags& f) {
  add_panel_args(cmd, f.panel);
  cmd->add_option("--selection", f.selection_path, "Selection report JSON")
      ->required();
  cmd->add_option("--k", f.k, "Sample k donors from the PVDs (0 = all)");
  cmd->add_option("--seed", f.seed, "Sampling seed");
  cmd->add_option("--grid-max", f.grid_max, "Max spillover on the fn grid");
  cmd->add_option("--grid-points", f.grid_points, "Grid resolution");
}

int run_estimate(const GlobalOpts& g, const EstimateFlags& f,
                 const std::string& command, bool effects_out) {
  Panel panel = ingest_csv(f.panel.path, f.panel.target, f.panel.intervention);
  SelectionReport report =
      selection_report_from_json(read_text_file(f.selection_path));
  if (report.pvd_ids.empty()) {
    throw_validation("selection report has an empty PVD set; nothing to fit");
  }

  std::vector<std::string> ids = report.pvd_ids;
  if (f.k > 0 && !f.sparse) ids = sample_pvds(report, f.k, f.seed);

  ScFit fit;
  if (f.sparse) {
    SparsePriorConfig prior{f.sparse_eta, f.sparse_narrow, f.sparse_wide,
                            f.sparse_iters, f.sparse_tol};
    ids = report.pvd_ids;
    fit = fit_sc(panel, ids, prior);
  } else if (f.debias) {
    std::vector<std::string> instruments = report.excluded_ids;
    if (static_cast<int>(instruments.size()) > f.instrument_cap) {
      SelectionReport pool;
      pool.pvd_ids = instruments;
      instruments = sample_pvds(pool, f.instrument_cap, f.seed + 1);
    }
    ProximalFit prox = fit_proximal_sc(panel, ids, instruments);
    fit = to_sc_fit(prox);
    if (prox.weak_instrument_flag) {
      std::cerr << "warning: weak instruments in the first stage (min R^2 "
                << prox.stage1_r2.minCoeff() << ")\n";
    }
  } else {
    fit = fit_sc(panel, ids);
  }

  EffectEstimate est = estimate_effect(panel, fit);
  SensitivityReport sens =
      analyze_sensitivity(panel, fit, est.tau_hat, report.excluded_ids,
                          tau_grid(f.grid_max, f.grid_points));

  std::vector<std::string> outputs;
  if (effects_out) {
    write_text_file(out_path(g, "effect.json").string(), effect_to_json(est));
    write_text_file(out_path(g, "effect.csv").string(), effect_to_csv(est));
    outputs.push_back("effect.json");
    outputs.push_back("effect.csv");
  }
  write_text_file(out_path(g, "sensitivity.json").string(), sensitivity_to_json(sens));
  write_text_file(out_path(g, "fn_curve.csv").string(), fn_curve_to_csv(sens));
  outputs.push_back("sensitivity.json");
  outputs.push_back("fn_curve.csv");

  json cfg;
  cfg["panel"] = f.panel.path;
  cfg["target"] = f.panel.target;
  cfg["intervention"] = f.panel.intervention;
  cfg["selection_report"] = f.selection_path;
  cfg["k"] = f.k;
  cfg["debias"] = f.debias;
  cfg["sparse"] = f.sparse;
  if (f.sparse) {
    cfg["sparse_prior"] = {{"eta", f.sparse_eta},
                           {"sigma_narrow", f.sparse_narrow},
                           {"sigma_wide", f.sparse_wide},
                           {"max_iters", f.sparse_iters},
                           {"tol", f.sparse_tol}};
  }
  cfg["instrument_cap"] = f.instrument_cap;
  cfg["seed"] = f.seed;
  cfg["grid_max"] = f.grid_max;
  cfg["grid_points"] = f.grid_points;
  cfg["donor_ids_used"] = ids;
  write_manifest(g, command, cfg, outputs);

  if (g.format == "csv") {
    std::cout << "tau_hat,lower,upper\n"
              << est.tau_hat << ',' << est.interval_95.first << ','
              << est.interval_95.second << '\n';
  } else {
    json s;
    s["tau_hat"] = est.tau_hat;
    s["interval_95"] = {est.interval_95.first, est.interval_95.second};
    s["ov_bound"] = sens.ov_bound;
    s["fp_bound"] = sens.fp_bound;
    s["sign_flip_tau_spill"] = std::isfinite(sens.sign_flip_tau_spill)
                                   ? json(sens.sign_flip_tau_spill)
                                   : json("infinity");
    std::cout << s.dump(2) << '\n';
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Donor selection and effect estimation for synthetic controls"};
  app.require_subcommand(1);

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic panel");
  GlobalOpts sim_g;
  std::string sim_config_path;
  std::int64_t sim_seed = -1;
  add_global(sim_cmd, sim_g);
  sim_cmd->add_option("--config", sim_config_path, "SimConfig JSON file");
  sim_cmd->add_option("--seed", sim_seed, "Override the config seed");

  auto* sel_cmd = app.add_subcommand("select", "Run spillover detection");
  GlobalOpts sel_g;
  PanelArgs sel_panel;
  std::string sel_proc = "S2";
  double sel_phi = 0.8;
  int sel_k = 10;
  int sel_bucket = 0;
  double sel_lambda = 0.0;
  std::uint64_t sel_seed = 0;
  add_global(sel_cmd, sel_g);
  add_panel_args(sel_cmd, sel_panel);
  sel_cmd->add_option("--procedure", sel_proc, "S1 or S2")
      ->check(CLI::IsMember({"S1", "S2"}));
  sel_cmd->add_option("--phi", sel_phi, "Prediction-interval level");
  sel_cmd->add_option("--k", sel_k, "S1 selection count");
  sel_cmd->add_option("--bucket", sel_bucket,
                      "Time-average bucket; partial leading and trailing "
                      "buckets are dropped");
  sel_cmd->add_option("--lambda", sel_lambda, "Fixed ridge lambda (default LOO-CV)");
  sel_cmd->add_option("--seed", sel_seed, "Seed recorded for downstream sampling");

  EstimateFlags est_f;
  GlobalOpts est_g;
  auto* est_cmd = app.add_subcommand("estimate", "Fit the SC and estimate the effect");
  add_global(est_cmd, est_g);
  add_estimate_common(est_cmd, est_f);
  est_cmd->add_flag("--debias", est_f.debias, "Two-stage debias with excluded donors");
  est_cmd->add_flag("--sparse", est_f.sparse, "Mixture-prior fit over the full PVD set");
  est_cmd->add_option("--sparse-eta", est_f.sparse_eta, "Near-zero component weight");
  est_cmd->add_option("--sparse-narrow", est_f.sparse_narrow, "Narrow prior std");
  est_cmd->add_option("--sparse-wide", est_f.sparse_wide, "Wide prior std");
  est_cmd->add_option("--sparse-iters", est_f.sparse_iters, "EM iteration cap");
  est_cmd->add_option("--sparse-tol", est_f.sparse_tol, "EM convergence tolerance");
  est_cmd->add_option("--instrument-cap", est_f.instrument_cap,
                      "Max excluded donors used as instruments");

  EstimateFlags deb_f;
  GlobalOpts deb_g;
  auto* deb_cmd = app.add_subcommand("debias", "Alias of estimate --debias");
  add_global(deb_cmd, deb_g);
  add_estimate_common(deb_cmd, deb_f);
  deb_cmd->add_option("--instrument-cap", deb_f.instrument_cap,
                      "Max excluded donors used as instruments");

  EstimateFlags sen_f;
  GlobalOpts sen_g;
  auto* sen_cmd = app.add_subcommand("sensitivity", "Bias bounds for a fitted SC");
  add_global(sen_cmd, sen_g);
  add_estimate_common(sen_cmd, sen_f);

  auto* exp_cmd = app.add_subcommand("experiment", "Replicated Monte Carlo study");
  GlobalOpts exp_g;
  std::string exp_config_path;
  int exp_jobs = -1;
  add_global(exp_cmd, exp_g);
  exp_cmd->add_option("--config", exp_config_path, "Experiment JSON file")->required();
  exp_cmd->add_option("--jobs", exp_jobs, "Worker threads (0 = hardware)");

  auto* inj_cmd = app.add_subcommand("inject", "Append a noisy proxy of the target");
  GlobalOpts inj_g;
  PanelArgs inj_panel;
  double inj_sigma = -1.0;
  double inj_scale = -1.0;
  std::uint64_t inj_seed = 0;
  std::string inj_out = "panel_injected.csv";
  add_global(inj_cmd, inj_g);
  add_panel_args(inj_cmd, inj_panel);
  inj_cmd->add_option("--sigma", inj_sigma, "Absolute noise std");
  inj_cmd->add_option("--sigma-scale", inj_scale,
                      "Noise std as a multiple of the pre-intervention target std");
  inj_cmd->add_option("--seed", inj_seed, "Noise seed");
  inj_cmd->add_option("--out", inj_out, "Output CSV name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // bad flags are usage errors; --help and --version exit cleanly
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (sim_cmd->parsed()) {
    SimConfig cfg;
    if (!sim_config_path.empty()) {
      cfg = sim_config_from_json(read_text_file(sim_config_path));
    }
    if (sim_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sim_seed);
    cfg.validate();
    SimTrace trace = simulate(cfg);
    emit_csv(trace.panel, out_path(sim_g, "panel.csv").string());
    write_text_file(out_path(sim_g, "truth.json").string(), sim_truth_to_json(trace));
    write_manifest(sim_g, "simulate", json::parse(sim_config_to_json(cfg)),
                   {"panel.csv", "truth.json"});
    std::cout << "panel: " << trace.panel.n_times() << " times, "
              << trace.panel.n_donors() << " donors\n";
    return 0;
  }

  if (sel_cmd->parsed()) {
    Panel panel = ingest_csv(sel_panel.path, sel_panel.target, sel_panel.intervention);
    SelectionConfig sel;
    sel.procedure = sel_proc == "S1" ? SelectionProcedure::S1 : SelectionProcedure::S2;
    sel.ppi_level = sel_phi;
    sel.s1_count = sel_k;
    if (sel_bucket > 0) sel.time_average_bucket = sel_bucket;
    if (sel_lambda > 0) sel.ridge_lambda = sel_lambda;
    sel.seed = sel_seed;
    sel.validate();

    SelectionReport report = select_donors(panel, sel);
    write_text_file(out_path(sel_g, "selection.json").string(),
                    selection_report_to_json(report));
    json cfg = json::parse(selection_config_to_json(sel));
    cfg["panel"] = sel_panel.path;
    cfg["target"] = sel_panel.target;
    cfg["intervention"] = sel_panel.intervention;
    write_manifest(sel_g, "select", cfg, {"selection.json"});
    std::cout << "pvd: " << report.pvd_ids.size() << " of "
              << report.donors.size() << " donors"
              << (report.empty_selection ? " (empty selection)" : "") << '\n';
    return 0;
  }

  if (est_cmd->parsed()) return run_estimate(est_g, est_f, "estimate", true);
  if (deb_cmd->parsed()) {
    deb_f.debias = true;
    return run_estimate(deb_g, deb_f, "debias", true);
  }
  if (sen_cmd->parsed()) return run_estimate(sen_g, sen_f, "sensitivity", false);

  if (exp_cmd->parsed()) {
    json wrapper = json::parse(read_text_file(exp_config_path));
    std::string kind = wrapper.value("kind", "bias");
    if (!wrapper.contains("experiment")) {
      throw_validation("experiment config: missing 'experiment' object");
    }
    ExperimentConfig cfg =
        experiment_config_from_json(wrapper.at("experiment").dump());
    if (exp_jobs >= 0) cfg.jobs = exp_jobs;

    std::vector<std::string> outputs;
    if (kind == "bias") {
      BiasSummary summary = run_experiment(cfg);
      write_text_file(out_path(exp_g, "bias_summary.json").string(),
                      bias_summary_to_json(summary));
      write_text_file(out_path(exp_g, "bias_summary.csv").string(),
                      bias_summary_to_csv(summary));
      outputs = {"bias_summary.json", "bias_summary.csv"};
      std::cout << bias_summary_to_csv(summary);
    } else if (kind == "latent_shift") {
      if (!wrapper.contains("latent_shift")) {
        throw_validation("experiment config: missing 'latent_shift' object");
      }
      const json& ls = wrapper.at("latent_shift");
      double shift_mean = ls.value("shift_mean", 0.5);
      std::vector<int> offsets = ls.value("offsets", std::vector<int>{0, 3});
      auto studies = run_latent_shift_study(cfg, shift_mean, offsets);
      for (const auto& [offset, summary] : studies) {
        std::string base = "bias_summary_offset" + std::to_string(offset);
        write_text_file(out_path(exp_g, base + ".json").string(),
                        bias_summary_to_json(summary));
        write_text_file(out_path(exp_g, base + ".csv").string(),
                        bias_summary_to_csv(summary));
        outputs.push_back(base + ".json");
        outputs.push_back(base + ".csv");
      }
    } else if (kind == "semi_synthetic") {
      if (!wrapper.contains("semi_synthetic")) {
        throw_validation("experiment config: missing 'semi_synthetic' object");
      }
      const json& ss = wrapper.at("semi_synthetic");
      if (!ss.contains("panel") || !ss.contains("intervention")) {
        throw_validation("semi_synthetic config needs 'panel' and 'intervention'");
      }
      Panel panel = ingest_csv(ss.at("panel").get<std::string>(),
                               ss.value("target", std::string("target")),
                               ss.at("intervention").get<std::int64_t>());
      double sigma = 0.0;
      if (ss.contains("sigma")) {
        sigma = ss.at("sigma").get<double>();
      } else if (ss.contains("sigma_scale")) {
        sigma = ss.at("sigma_scale").get<double>() * pre_target_sd(panel);
      } else {
        throw_validation("semi_synthetic config needs 'sigma' or 'sigma_scale'");
      }
      std::vector<std::uint64_t> seeds;
      if (ss.contains("seeds")) {
        seeds = ss.at("seeds").get<std::vector<std::uint64_t>>();
      } else {
        int n = ss.value("n_seeds", 50);
        for (int i = 0; i < n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
      }
      SemiSyntheticReport report =
          run_semi_synthetic(panel, sigma, cfg.selection, seeds);
      write_text_file(out_path(exp_g, "semi_synthetic.json").string(),
                      semi_synthetic_to_json(report));
      outputs = {"semi_synthetic.json"};
      std::cout << "flag_rate " << report.flag_rate << " attenuation_rate "
                << report.attenuation_rate << '\n';
    } else {
      throw_validation("experiment config: unknown kind '" + kind + "'");
    }
    json manifest_cfg = wrapper;
    manifest_cfg["experiment"] = json::parse(experiment_config_to_json(cfg));
    write_manifest(exp_g, "experiment", manifest_cfg, outputs);
    return 0;
  }

  if (inj_cmd->parsed()) {
    Panel panel = ingest_csv(inj_panel.path, inj_panel.target, inj_panel.intervention);
    double sigma = inj_sigma;
    if (sigma < 0 && inj_scale >= 0) sigma = inj_scale * pre_target_sd(panel);
    if (sigma < 0) throw_validation("inject: give --sigma or --sigma-scale");
    auto [augmented, id] = inject_synthetic_donor(panel, sigma, inj_seed);
    emit_csv(augmented, out_path(inj_g, inj_out).string());
    json cfg;
    cfg["panel"] = inj_panel.path;
    cfg["target"] = inj_panel.target;
    cfg["intervention"] = inj_panel.intervention;
    cfg["sigma"] = sigma;
    cfg["seed"] = inj_seed;
    cfg["injected_id"] = id;
    write_manifest(inj_g, "inject", cfg, {inj_out});
    std::cout << "injected donor id: " << id << '\n';
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::validation ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
