#include "scdonor/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scdonor/error.hpp"
#include "scdonor/rng.hpp"

namespace scdonor {

namespace {

// Seeded sample of `k` distinct indices from 0..n-1 (partial Fisher-Yates).
std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

std::string donor_id(int i, int n) {
  int width = 1;
  for (int v = n; v >= 10; v /= 10) ++width;
  std::string num = std::to_string(i + 1);
  return "d" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
}

}  // namespace

void SimConfig::validate() const {
  if (n_latents < 1) throw_validation("sim config: n_latents must be >= 1");
  if (n_donors < 1) throw_validation("sim config: n_donors must be >= 1");
  if (t_pre < 2) throw_validation("sim config: t_pre must be >= 2");
  if (t_post < 1) throw_validation("sim config: t_post must be >= 1");
  if (!(invalid_fraction >= 0.0 && invalid_fraction <= 1.0)) {
    throw_validation("sim config: invalid_fraction must be in [0,1]");
  }
  if (!(sigma_u > 0.0 && sigma_delta > 0.0 && sigma_y > 0.0 && sigma_x > 0.0)) {
    throw_validation("sim config: all sigmas must be > 0");
  }
  if (slope_sd < 0.0) throw_validation("sim config: slope_sd must be >= 0");
  if (!(zero_first_loading_fraction >= 0.0 && zero_first_loading_fraction <= 1.0)) {
    throw_validation("sim config: zero_first_loading_fraction must be in [0,1]");
  }
  if (alpha && alpha->size() != n_latents) {
    throw_validation("sim config: alpha length != n_latents");
  }
  if (beta && (beta->rows() != n_donors || beta->cols() != n_latents)) {
    throw_validation("sim config: beta must be n_donors x n_latents");
  }
  if (latent_shift) {
    if (latent_shift->latent_index < 1 || latent_shift->latent_index > n_latents) {
      throw_validation("sim config: latent_shift.latent_index out of range");
    }
    if (latent_shift->shift_time_offset < 0) {
      throw_validation("sim config: latent_shift.shift_time_offset must be >= 0");
    }
  }
}

SimTrace simulate(const SimConfig& config) {
  config.validate();
  const int M = config.n_latents;
  const int N = config.n_donors;
  const int T = config.t_pre + config.t_post;
  const int t_star = config.t_pre;  // first post index

  Rng rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Per-latent long-term slope and mean-reversion rate.
  Eigen::VectorXd S(M), rho(M);
  for (int i = 0; i < M; ++i) S(i) = config.slope_mean + config.slope_sd * gauss(rng);
  for (int i = 0; i < M; ++i) rho(i) = unif(rng);

  // Spillover assignment.
  const int n_invalid =
      static_cast<int>(std::llround(config.invalid_fraction * N));
  std::vector<bool> invalid(static_cast<std::size_t>(N), false);
  for (int i : sample_without_replacement(N, n_invalid, rng)) {
    invalid[static_cast<std::size_t>(i)] = true;
  }

  // Loadings.
  Eigen::VectorXd alpha = config.alpha ? *config.alpha : Eigen::VectorXd::Ones(M);
  Eigen::MatrixXd beta = config.beta ? *config.beta : Eigen::MatrixXd::Ones(N, M);
  if (config.zero_first_loading_fraction > 0.0) {
    std::vector<int> valid_idx;
    for (int i = 0; i < N; ++i) {
      if (!invalid[static_cast<std::size_t>(i)]) valid_idx.push_back(i);
    }
    const int n_zero = static_cast<int>(std::llround(
        config.zero_first_loading_fraction * static_cast<double>(valid_idx.size())));
    for (int j : sample_without_replacement(static_cast<int>(valid_idx.size()),
                                            n_zero, rng)) {
      beta(valid_idx[static_cast<std::size_t>(j)], 0) = 0.0;
    }
  }

  const int shift_latent =
      config.latent_shift ? config.latent_shift->latent_index - 1 : -1;
  const int shift_from =
      config.latent_shift ? t_star + config.latent_shift->shift_time_offset : T;

  // Latent trajectories: u starts at zero, slope starts at its long-term value.
  Eigen::MatrixXd u(T, M), delta(T, M);
  u.row(0).setZero();
  delta.row(0) = S.transpose();
  for (int t = 1; t < T; ++t) {
    for (int i = 0; i < M; ++i) {
      delta(t, i) = S(i) + rho(i) * (delta(t - 1, i) - S(i)) +
                    config.sigma_delta * gauss(rng);
    }
    for (int i = 0; i < M; ++i) {
      double shift =
          (i == shift_latent && t >= shift_from && config.latent_shift)
              ? config.latent_shift->shift_mean
              : 0.0;
      u(t, i) = u(t - 1, i) + delta(t - 1, i) + shift + config.sigma_u * gauss(rng);
    }
  }

  // Target with shared-noise counterfactual: y = base + tau * I.
  Eigen::VectorXd y(T), y_cf(T);
  for (int t = 0; t < T; ++t) {
    const double base = alpha.dot(u.row(t)) + config.sigma_y * gauss(rng);
    y_cf(t) = base;
    y(t) = base + (t >= t_star ? config.tau : 0.0);
  }

  // Donors.
  Eigen::MatrixXd x(T, N);
  for (int i = 0; i < N; ++i) {
    const double spill = invalid[static_cast<std::size_t>(i)] ? config.tau_spill : 0.0;
    for (int t = 0; t < T; ++t) {
      x(t, i) = beta.row(i).dot(u.row(t)) + (t >= t_star ? spill : 0.0) +
                config.sigma_x * gauss(rng);
    }
  }

  SimTrace trace;
  trace.panel.times.resize(static_cast<std::size_t>(T));
  std::iota(trace.panel.times.begin(), trace.panel.times.end(), 0);
  trace.panel.target = std::move(y);
  trace.panel.donors = std::move(x);
  trace.panel.donor_ids.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) trace.panel.donor_ids.push_back(donor_id(i, N));
  trace.panel.intervention_time = t_star;
  trace.latents = std::move(u);
  trace.slopes = std::move(delta);
  trace.invalid_mask = std::move(invalid);
  trace.true_tau = config.tau;
  trace.true_counterfactual = std::move(y_cf);
  return trace;
}

std::pair<Panel, std::string> inject_synthetic_donor(const Panel& panel,
                                                     double sigma,
                                                     std::uint64_t seed) {
  panel.validate();
  if (sigma < 0.0) throw_validation("inject: sigma must be >= 0");

  std::string id = "syn";
  int suffix = 1;
  while (std::find(panel.donor_ids.begin(), panel.donor_ids.end(), id) !=
         panel.donor_ids.end()) {
    id = "syn_" + std::to_string(++suffix);
  }

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index T = panel.n_times();

  Panel out = panel;
  out.donors.conservativeResize(T, panel.n_donors() + 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    out.donors(t, panel.n_donors()) = panel.target(t) + sigma * gauss(rng);
  }
  out.donor_ids.push_back(id);
  return {std::move(out), std::move(id)};
}

}  // namespace scdonor
