#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scdonor/panel.hpp"

namespace scdonor {

// Mean shift applied to one latent's innovation term from
// t >= intervention + shift_time_offset onward. latent_index is 1-based.
struct LatentShift {
  int latent_index = 1;
  double shift_mean = 0.0;
  int shift_time_offset = 0;
};

// Latent local-linear-trend panel generator. Latents follow a random walk
// with AR(1) slope around a per-latent long-term drift; the target and
// donors are noisy linear readouts of the latents. A seeded random subset
// of donors receives the spillover shift tau_spill post-intervention.
struct SimConfig {
  int n_latents = 10;
  int n_donors = 1000;
  int t_pre = 100;
  int t_post = 30;
  double tau = 2.0;
  double tau_spill = -2.0;
  double invalid_fraction = 0.8;
  double sigma_u = 0.02;
  double sigma_delta = 0.005;
  double sigma_y = 0.1;
  double sigma_x = 0.1;
  double slope_mean = 0.1;
  double slope_sd = 0.1;
  std::optional<Eigen::VectorXd> alpha;  // target loadings, default all ones
  std::optional<Eigen::MatrixXd> beta;   // donor loadings N x M, default all ones
  std::optional<LatentShift> latent_shift;
  double zero_first_loading_fraction = 0.0;  // applied to valid donors
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimTrace {
  Panel panel;
  Eigen::MatrixXd latents;  // T x M
  Eigen::MatrixXd slopes;   // T x M
  std::vector<bool> invalid_mask;
  double true_tau = 0.0;
  Eigen::VectorXd true_counterfactual;  // target under do(I = 0), shared noise
};

// Fully deterministic in config.seed. The counterfactual reuses the same
// noise draws with the intervention forced off, so
// panel.target - true_counterfactual == tau exactly on post points.
SimTrace simulate(const SimConfig& config);

// Appends one donor drawn N(y_t, sigma) at every time point; returns the new
// panel and the id of the injected column.
std::pair<Panel, std::string> inject_synthetic_donor(const Panel& panel,
                                                     double sigma,
                                                     std::uint64_t seed);

}  // namespace scdonor
