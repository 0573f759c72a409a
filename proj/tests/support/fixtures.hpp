#pragma once

// Deterministic demonstration panels shaped like the two classic country /
// state case studies: same year grids, donor counts, intervention years, and
// trend structure, with a planted post-intervention effect on the target.
// The target loads on a factor the donors cannot span (an own-path
// component), so a noisy proxy of the target is genuinely informative for a
// naive fit. Committed CSVs under data/ are generated from these builders.

#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scdonor/panel.hpp"

namespace scdonor::fixtures {

namespace detail {

// Smooth own-path wiggle: cumulative Gaussian steps, then a short moving
// average so the series has year-over-year persistence.
inline std::vector<double> smooth_walk(int n, double step_sd, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, step_sd);
  std::vector<double> raw(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int t = 0; t < n; ++t) {
    acc += gauss(rng);
    raw[static_cast<std::size_t>(t)] = acc;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    int c = 0;
    for (int k = t - 2; k <= t + 2; ++k) {
      if (k >= 0 && k < n) {
        s += raw[static_cast<std::size_t>(k)];
        ++c;
      }
    }
    out[static_cast<std::size_t>(t)] = s / c;
  }
  return out;
}

}  // namespace detail

// 1960-2003 per-capita output panel, intervention 1990, 16 donors.
inline Panel gdp_panel() {
  const int y0 = 1960, y1 = 2003;
  const int T = y1 - y0 + 1;
  const std::int64_t intervention = 1990;
  const int n_donors = 16;

  std::mt19937_64 rng(90210);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> load1(0.6, 1.3);
  std::uniform_real_distribution<double> load2(-1.0, 1.0);
  std::uniform_real_distribution<double> level(-2000.0, 2000.0);

  Panel p;
  p.times.resize(static_cast<std::size_t>(T));
  std::iota(p.times.begin(), p.times.end(), y0);

  // shared growth factor and business-cycle factor
  std::vector<double> f1(static_cast<std::size_t>(T)), f2(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    f1[static_cast<std::size_t>(t)] = 3000.0 * std::exp(0.045 * t);
    f2[static_cast<std::size_t>(t)] = 800.0 * std::sin(2.0 * M_PI * t / 9.0);
  }
  // target-specific path the donors cannot jointly span
  std::vector<double> own = detail::smooth_walk(T, 85.0, 777);

  p.donors.resize(T, n_donors);
  for (int i = 0; i < n_donors; ++i) {
    p.donor_ids.push_back("country_" + std::string(1, static_cast<char>('a' + i)));
    const double b1 = load1(rng), b2 = load2(rng), a = level(rng);
    std::vector<double> walk =
        detail::smooth_walk(T, 25.0, 1000u + static_cast<unsigned>(i));
    for (int t = 0; t < T; ++t) {
      p.donors(t, i) = a + b1 * f1[static_cast<std::size_t>(t)] +
                       b2 * f2[static_cast<std::size_t>(t)] +
                       walk[static_cast<std::size_t>(t)] + 40.0 * gauss(rng);
    }
  }

  p.target.resize(T);
  const int t_star = static_cast<int>(intervention - y0);
  for (int t = 0; t < T; ++t) {
    double v = f1[static_cast<std::size_t>(t)] + 0.5 * f2[static_cast<std::size_t>(t)] +
               own[static_cast<std::size_t>(t)] + 40.0 * gauss(rng);
    if (t >= t_star) v -= 1500.0 + 100.0 * (t - t_star);
    p.target(t) = v;
  }
  p.intervention_time = t_star;
  return p;
}

// 1970-2000 per-capita pack-sales panel, intervention 1989, 38 donors.
inline Panel tobacco_panel() {
  const int y0 = 1970, y1 = 2000;
  const int T = y1 - y0 + 1;
  const std::int64_t intervention = 1989;
  const int n_donors = 38;

  std::mt19937_64 rng(1988);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> load1(0.75, 1.25);
  std::uniform_real_distribution<double> load2(-1.0, 1.0);
  std::uniform_real_distribution<double> level(-15.0, 25.0);

  Panel p;
  p.times.resize(static_cast<std::size_t>(T));
  std::iota(p.times.begin(), p.times.end(), y0);

  std::vector<double> f1(static_cast<std::size_t>(T)), f2(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    f1[static_cast<std::size_t>(t)] = 130.0 - 2.1 * t;
    f2[static_cast<std::size_t>(t)] = 6.0 * std::sin(2.0 * M_PI * t / 7.0);
  }
  std::vector<double> own = detail::smooth_walk(T, 1.1, 555);

  p.donors.resize(T, n_donors);
  for (int i = 0; i < n_donors; ++i) {
    p.donor_ids.push_back("state_" + std::to_string(i + 1));
    const double b1 = load1(rng), b2 = load2(rng), a = level(rng);
    std::vector<double> walk =
        detail::smooth_walk(T, 0.35, 2000u + static_cast<unsigned>(i));
    for (int t = 0; t < T; ++t) {
      p.donors(t, i) = a + b1 * f1[static_cast<std::size_t>(t)] +
                       b2 * f2[static_cast<std::size_t>(t)] +
                       walk[static_cast<std::size_t>(t)] + 0.55 * gauss(rng);
    }
  }

  p.target.resize(T);
  const int t_star = static_cast<int>(intervention - y0);
  for (int t = 0; t < T; ++t) {
    double v = f1[static_cast<std::size_t>(t)] + 0.5 * f2[static_cast<std::size_t>(t)] +
               own[static_cast<std::size_t>(t)] + 0.55 * gauss(rng);
    if (t >= t_star) v -= 14.0 + 1.6 * (t - t_star);
    p.target(t) = v;
  }
  p.intervention_time = t_star;
  return p;
}

inline double pre_target_sd(const Panel& p) {
  const auto pre = p.target.head(p.n_pre());
  const double m = pre.mean();
  return std::sqrt((pre.array() - m).square().sum() /
                   static_cast<double>(p.n_pre() - 1));
}

}  // namespace scdonor::fixtures
