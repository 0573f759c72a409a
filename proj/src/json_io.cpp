#include "scdonor/json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scdonor/error.hpp"

namespace scdonor {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw_validation(std::string("invalid JSON: ") + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw_validation(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw_validation(where + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    throw_validation(std::string("field '") + name + "' has the wrong type");
  }
}

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string sim_config_to_json(const SimConfig& c) {
  json j;
  j["n_latents"] = c.n_latents;
  j["n_donors"] = c.n_donors;
  j["t_pre"] = c.t_pre;
  j["t_post"] = c.t_post;
  j["tau"] = c.tau;
  j["tau_spill"] = c.tau_spill;
  j["invalid_fraction"] = c.invalid_fraction;
  j["sigma_u"] = c.sigma_u;
  j["sigma_delta"] = c.sigma_delta;
  j["sigma_y"] = c.sigma_y;
  j["sigma_x"] = c.sigma_x;
  j["slope_mean"] = c.slope_mean;
  j["slope_sd"] = c.slope_sd;
  if (c.alpha) {
    j["alpha"] = std::vector<double>(c.alpha->data(), c.alpha->data() + c.alpha->size());
  }
  if (c.beta) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < c.beta->rows(); ++i) {
      rows.emplace_back(c.beta->row(i).begin(), c.beta->row(i).end());
    }
    j["beta"] = rows;
  }
  if (c.latent_shift) {
    j["latent_shift"] = {{"latent_index", c.latent_shift->latent_index},
                         {"shift_mean", c.latent_shift->shift_mean},
                         {"shift_time_offset", c.latent_shift->shift_time_offset}};
  }
  j["zero_first_loading_fraction"] = c.zero_first_loading_fraction;
  j["seed"] = c.seed;
  return j.dump(2);
}

namespace {

SimConfig sim_config_from_json_obj(const json& j) {
  reject_unknown_keys(
      j,
      {"n_latents", "n_donors", "t_pre", "t_post", "tau", "tau_spill",
       "invalid_fraction", "sigma_u", "sigma_delta", "sigma_y", "sigma_x",
       "slope_mean", "slope_sd", "alpha", "beta", "latent_shift",
       "zero_first_loading_fraction", "seed"},
      "sim config");
  SimConfig c;
  read_field(j, "n_latents", c.n_latents);
  read_field(j, "n_donors", c.n_donors);
  read_field(j, "t_pre", c.t_pre);
  read_field(j, "t_post", c.t_post);
  read_field(j, "tau", c.tau);
  read_field(j, "tau_spill", c.tau_spill);
  read_field(j, "invalid_fraction", c.invalid_fraction);
  read_field(j, "sigma_u", c.sigma_u);
  read_field(j, "sigma_delta", c.sigma_delta);
  read_field(j, "sigma_y", c.sigma_y);
  read_field(j, "sigma_x", c.sigma_x);
  read_field(j, "slope_mean", c.slope_mean);
  read_field(j, "slope_sd", c.slope_sd);
  read_field(j, "zero_first_loading_fraction", c.zero_first_loading_fraction);
  read_field(j, "seed", c.seed);
  if (j.contains("alpha")) {
    std::vector<double> a;
    read_field(j, "alpha", a);
    c.alpha = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  }
  if (j.contains("beta")) {
    std::vector<std::vector<double>> rows;
    read_field(j, "beta", rows);
    if (rows.empty()) throw_validation("sim config: beta is empty");
    Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) {
        throw_validation("sim config: beta rows have unequal lengths");
      }
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
    c.beta = std::move(b);
  }
  if (j.contains("latent_shift")) {
    const json& s = j.at("latent_shift");
    reject_unknown_keys(s, {"latent_index", "shift_mean", "shift_time_offset"},
                        "latent_shift");
    LatentShift shift;
    read_field(s, "latent_index", shift.latent_index);
    read_field(s, "shift_mean", shift.shift_mean);
    read_field(s, "shift_time_offset", shift.shift_time_offset);
    c.latent_shift = shift;
  }
  c.validate();
  return c;
}

SelectionConfig selection_config_from_json_obj(const json& j) {
  reject_unknown_keys(j,
                      {"procedure", "ppi_level", "s1_count",
                       "time_average_bucket", "ridge_lambda", "seed"},
                      "selection config");
  SelectionConfig c;
  if (j.contains("procedure")) {
    std::string p;
    read_field(j, "procedure", p);
    if (p == "S1") {
      c.procedure = SelectionProcedure::S1;
    } else if (p == "S2") {
      c.procedure = SelectionProcedure::S2;
    } else {
      throw_validation("selection config: procedure must be 'S1' or 'S2'");
    }
  }
  read_field(j, "ppi_level", c.ppi_level);
  read_field(j, "s1_count", c.s1_count);
  if (j.contains("time_average_bucket")) {
    int b = 0;
    read_field(j, "time_average_bucket", b);
    c.time_average_bucket = b;
  }
  if (j.contains("ridge_lambda")) {
    double l = 0.0;
    read_field(j, "ridge_lambda", l);
    c.ridge_lambda = l;
  }
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

json selection_config_to_json_obj(const SelectionConfig& c) {
  json j;
  j["procedure"] = c.procedure == SelectionProcedure::S1 ? "S1" : "S2";
  j["ppi_level"] = c.ppi_level;
  j["s1_count"] = c.s1_count;
  if (c.time_average_bucket) j["time_average_bucket"] = *c.time_average_bucket;
  if (c.ridge_lambda) j["ridge_lambda"] = *c.ridge_lambda;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  return sim_config_from_json_obj(parse(text));
}

std::string selection_config_to_json(const SelectionConfig& config) {
  return selection_config_to_json_obj(config).dump(2);
}

SelectionConfig selection_config_from_json(const std::string& text) {
  return selection_config_from_json_obj(parse(text));
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["sim"] = json::parse(sim_config_to_json(c.sim));
  j["replicates"] = c.replicates;
  std::vector<std::string> procs;
  for (Procedure p : c.procedures) procs.push_back(procedure_name(p));
  j["procedures"] = procs;
  j["k_donors"] = c.k_donors;
  j["selection"] = selection_config_to_json_obj(c.selection);
  j["debias"] = c.debias;
  if (c.sparse) {
    j["sparse"] = {{"eta", c.sparse->eta},
                   {"sigma_narrow", c.sparse->sigma_narrow},
                   {"sigma_wide", c.sparse->sigma_wide},
                   {"max_iters", c.sparse->max_iters},
                   {"tol", c.sparse->tol}};
  }
  j["master_seed"] = c.master_seed;
  j["jobs"] = c.jobs;
  j["instrument_cap"] = c.instrument_cap;
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j = parse(text);
  reject_unknown_keys(j,
                      {"sim", "replicates", "procedures", "k_donors",
                       "selection", "debias", "sparse", "master_seed", "jobs",
                       "instrument_cap"},
                      "experiment config");
  ExperimentConfig c;
  if (j.contains("sim")) c.sim = sim_config_from_json_obj(j.at("sim"));
  read_field(j, "replicates", c.replicates);
  if (j.contains("procedures")) {
    std::vector<std::string> names;
    read_field(j, "procedures", names);
    c.procedures.clear();
    for (const auto& n : names) c.procedures.push_back(procedure_from_name(n));
  }
  read_field(j, "k_donors", c.k_donors);
  if (j.contains("selection")) {
    c.selection = selection_config_from_json_obj(j.at("selection"));
  }
  read_field(j, "debias", c.debias);
  if (j.contains("sparse")) {
    const json& s = j.at("sparse");
    reject_unknown_keys(s, {"eta", "sigma_narrow", "sigma_wide", "max_iters", "tol"},
                        "sparse prior");
    SparsePriorConfig sp;
    read_field(s, "eta", sp.eta);
    read_field(s, "sigma_narrow", sp.sigma_narrow);
    read_field(s, "sigma_wide", sp.sigma_wide);
    read_field(s, "max_iters", sp.max_iters);
    read_field(s, "tol", sp.tol);
    c.sparse = sp;
  }
  read_field(j, "master_seed", c.master_seed);
  read_field(j, "jobs", c.jobs);
  read_field(j, "instrument_cap", c.instrument_cap);
  c.validate();
  return c;
}

std::string selection_report_to_json(const SelectionReport& r) {
  json j;
  j["procedure"] = r.procedure == SelectionProcedure::S1 ? "S1" : "S2";
  j["ppi_level"] = r.ppi_level;
  j["ridge_lambda"] = r.ridge_lambda;
  j["empty_selection"] = r.empty_selection;
  json donors = json::array();
  for (const auto& d : r.donors) {
    donors.push_back({{"id", d.id},
                      {"predicted", d.predicted},
                      {"actual", d.actual},
                      {"abs_error", d.abs_error},
                      {"lower", d.lower},
                      {"upper", d.upper},
                      {"flagged", d.flagged}});
  }
  j["donors"] = donors;
  j["pvd_ids"] = r.pvd_ids;
  j["excluded_ids"] = r.excluded_ids;
  return j.dump(2);
}

SelectionReport selection_report_from_json(const std::string& text) {
  json j = parse(text);
  reject_unknown_keys(j,
                      {"procedure", "ppi_level", "ridge_lambda",
                       "empty_selection", "donors", "pvd_ids", "excluded_ids"},
                      "selection report");
  SelectionReport r;
  std::string p = "S2";
  read_field(j, "procedure", p);
  r.procedure = p == "S1" ? SelectionProcedure::S1 : SelectionProcedure::S2;
  read_field(j, "ppi_level", r.ppi_level);
  read_field(j, "ridge_lambda", r.ridge_lambda);
  read_field(j, "empty_selection", r.empty_selection);
  if (j.contains("donors")) {
    for (const auto& d : j.at("donors")) {
      DonorForecast f;
      read_field(d, "id", f.id);
      read_field(d, "predicted", f.predicted);
      read_field(d, "actual", f.actual);
      read_field(d, "abs_error", f.abs_error);
      read_field(d, "lower", f.lower);
      read_field(d, "upper", f.upper);
      read_field(d, "flagged", f.flagged);
      r.donors.push_back(std::move(f));
    }
  }
  read_field(j, "pvd_ids", r.pvd_ids);
  read_field(j, "excluded_ids", r.excluded_ids);
  return r;
}

std::string effect_to_json(const EffectEstimate& e) {
  json j;
  j["tau_hat"] = e.tau_hat;
  j["interval_95"] = {e.interval_95.first, e.interval_95.second};
  j["post_times"] = e.post_times;
  j["per_time_effects"] =
      std::vector<double>(e.per_time_effects.begin(), e.per_time_effects.end());
  j["counterfactual"] =
      std::vector<double>(e.counterfactual.begin(), e.counterfactual.end());
  j["observed"] = std::vector<double>(e.observed.begin(), e.observed.end());
  j["effect_lower"] =
      std::vector<double>(e.effect_lower.begin(), e.effect_lower.end());
  j["effect_upper"] =
      std::vector<double>(e.effect_upper.begin(), e.effect_upper.end());
  return j.dump(2);
}

std::string effect_to_csv(const EffectEstimate& e) {
  std::ostringstream out;
  out << "time,observed,counterfactual,effect,lower,upper\n";
  for (Eigen::Index k = 0; k < e.per_time_effects.size(); ++k) {
    out << e.post_times[static_cast<std::size_t>(k)] << ','
        << csv_num(e.observed(k)) << ',' << csv_num(e.counterfactual(k)) << ','
        << csv_num(e.per_time_effects(k)) << ',' << csv_num(e.effect_lower(k))
        << ',' << csv_num(e.effect_upper(k)) << '\n';
  }
  return out.str();
}

std::string sensitivity_to_json(const SensitivityReport& r) {
  json j;
  j["ov_bound"] = r.ov_bound;
  j["fp_bound"] = r.fp_bound;
  j["n_used"] = r.n_used;
  j["max_abs_weight"] = r.max_abs_weight;
  j["max_selected_shift"] = r.max_selected_shift;
  j["max_excluded_shift"] = r.max_excluded_shift;
  j["tau_spill_grid"] = r.tau_spill_grid;
  j["fn_bounds"] = r.fn_bounds;
  if (std::isfinite(r.sign_flip_tau_spill)) {
    j["sign_flip_tau_spill"] = r.sign_flip_tau_spill;
  } else {
    j["sign_flip_tau_spill"] = "infinity";
  }
  return j.dump(2);
}

std::string fn_curve_to_csv(const SensitivityReport& r) {
  std::ostringstream out;
  out << "tau_spill,bound\n";
  for (std::size_t i = 0; i < r.tau_spill_grid.size(); ++i) {
    out << csv_num(r.tau_spill_grid[i]) << ',' << csv_num(r.fn_bounds[i]) << '\n';
  }
  return out.str();
}

std::string bias_summary_to_json(const BiasSummary& s) {
  json j = json::array();
  for (const auto& [proc, ps] : s.per_procedure) {
    json e;
    e["procedure"] = procedure_name(proc);
    e["mean_bias"] = ps.mean_bias;
    e["ci_lo"] = ps.mc_ci95.first;
    e["ci_hi"] = ps.mc_ci95.second;
    e["failure_count"] = ps.failure_count;
    e["replicate_biases"] = ps.replicate_biases;
    j.push_back(std::move(e));
  }
  return j.dump(2);
}

std::string bias_summary_to_csv(const BiasSummary& s) {
  std::ostringstream out;
  out << "procedure,mean_bias,ci_lo,ci_hi\n";
  for (const auto& [proc, ps] : s.per_procedure) {
    out << procedure_name(proc) << ',' << csv_num(ps.mean_bias) << ','
        << csv_num(ps.mc_ci95.first) << ',' << csv_num(ps.mc_ci95.second) << '\n';
  }
  return out.str();
}

std::string semi_synthetic_to_json(const SemiSyntheticReport& r) {
  json j;
  j["flag_rate"] = r.flag_rate;
  j["attenuation_rate"] = r.attenuation_rate;
  json runs = json::array();
  for (const auto& run : r.runs) {
    json e;
    e["seed"] = run.seed;
    e["injected_id"] = run.injected_id;
    e["naive_abs_weight_rank"] = run.naive_abs_weight_rank;
    e["injected_flagged"] = run.injected_flagged;
    e["injected_excluded"] = run.injected_excluded;
    e["tau_naive"] = run.tau_naive;
    if (std::isfinite(run.tau_selected)) {
      e["tau_selected"] = run.tau_selected;
    } else {
      e["tau_selected"] = nullptr;
    }
    runs.push_back(std::move(e));
  }
  j["runs"] = runs;
  return j.dump(2);
}

std::string sim_truth_to_json(const SimTrace& trace) {
  json j;
  j["true_tau"] = trace.true_tau;
  std::vector<std::string> invalid_ids;
  for (std::size_t i = 0; i < trace.invalid_mask.size(); ++i) {
    if (trace.invalid_mask[i]) invalid_ids.push_back(trace.panel.donor_ids[i]);
  }
  j["invalid_ids"] = invalid_ids;
  j["intervention_time"] =
      trace.panel.times[static_cast<std::size_t>(trace.panel.intervention_time)];
  j["true_counterfactual"] = std::vector<double>(
      trace.true_counterfactual.begin(), trace.true_counterfactual.end());
  return j.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw_validation("cannot write file '" + path + "'");
  out << content;
}

}  // namespace scdonor
