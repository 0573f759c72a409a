#include <doctest.h>

#include <numeric>
#include <random>

#include "scdonor/error.hpp"
#include "scdonor/estimate.hpp"
#include "scdonor/simulator.hpp"

using namespace scdonor;

namespace {

Panel linear_panel() {
  // y = 2 x1 + 3 exactly pre-intervention; post y carries a planted +2
  // on top of the same linear rule.
  const int T = 230, t_star = 200;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Panel p;
  p.times.resize(T);
  std::iota(p.times.begin(), p.times.end(), 0);
  p.donors.resize(T, 2);
  p.target.resize(T);
  p.donor_ids = {"a", "b"};
  p.intervention_time = t_star;
  for (int t = 0; t < T; ++t) {
    p.donors(t, 0) = gauss(rng);
    p.donors(t, 1) = gauss(rng);
    p.target(t) = 2.0 * p.donors(t, 0) + 3.0 + (t >= t_star ? 2.0 : 0.0);
  }
  return p;
}

}  // namespace

TEST_CASE("fit_sc recovers an exact linear relation") {
  Panel p = linear_panel();
  ScFit sc = fit_sc(p, {"a"});
  CHECK(sc.fit.intercept == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sc.fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-8));

  EffectEstimate est = estimate_effect(p, sc);
  CHECK(est.tau_hat == doctest::Approx(2.0).epsilon(1e-8));
  for (Eigen::Index k = 0; k < est.per_time_effects.size(); ++k) {
    CHECK(est.per_time_effects(k) == doctest::Approx(2.0).epsilon(1e-7));
  }
  CHECK(est.interval_95.first <= est.tau_hat);
  CHECK(est.interval_95.second >= est.tau_hat);
  // tau_hat is the mean of the pointwise gaps
  CHECK(est.tau_hat == doctest::Approx(est.per_time_effects.mean()));
}

TEST_CASE("fit_sc rejects duplicated donors at lambda 0 and unknown ids") {
  Panel p = linear_panel();
  Panel q = p;
  q.donors.col(1) = q.donors.col(0);
  CHECK_THROWS_AS(fit_sc(q, {"a", "b"}, std::nullopt, 0.0), Error);
  CHECK_NOTHROW(fit_sc(q, {"a", "b"}));  // default tiny ridge
  CHECK_THROWS_AS(fit_sc(p, {"nope"}), Error);
  CHECK_THROWS_AS(fit_sc(p, {}), Error);
}

TEST_CASE("shift equivariance: adding c to post targets adds c to tau_hat") {
  SimConfig cfg;
  cfg.n_latents = 3;
  cfg.n_donors = 20;
  cfg.t_pre = 50;
  cfg.t_post = 12;
  cfg.seed = 9;
  Panel p = simulate(cfg).panel;

  std::vector<std::string> ids = {p.donor_ids[0], p.donor_ids[3], p.donor_ids[7]};
  ScFit sc = fit_sc(p, ids);
  double tau0 = estimate_effect(p, sc).tau_hat;

  Panel shifted = p;
  shifted.target.tail(p.n_post()).array() += 5.25;
  ScFit sc2 = fit_sc(shifted, ids);
  double tau1 = estimate_effect(shifted, sc2).tau_hat;
  CHECK(tau1 - tau0 == doctest::Approx(5.25).epsilon(1e-12));
}

TEST_CASE("donor order does not change the estimate") {
  SimConfig cfg;
  cfg.n_latents = 3;
  cfg.n_donors = 15;
  cfg.t_pre = 40;
  cfg.t_post = 10;
  cfg.seed = 13;
  Panel p = simulate(cfg).panel;

  std::vector<std::string> ids = {p.donor_ids[2], p.donor_ids[5], p.donor_ids[11]};
  std::vector<std::string> rev(ids.rbegin(), ids.rend());
  ScFit a = fit_sc(p, ids);
  ScFit b = fit_sc(p, rev);
  CHECK(a.fit.coefficients(0) == doctest::Approx(b.fit.coefficients(2)).epsilon(1e-10));
  CHECK(a.fit.coefficients(2) == doctest::Approx(b.fit.coefficients(0)).epsilon(1e-10));
  CHECK(estimate_effect(p, a).tau_hat ==
        doctest::Approx(estimate_effect(p, b).tau_hat).epsilon(1e-10));
}

TEST_CASE("sparse SC concentrates weight on the truly loading donors") {
  const int T = 120, t_star = 100, N = 200;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Panel p;
  p.times.resize(T);
  std::iota(p.times.begin(), p.times.end(), 0);
  p.donors.resize(T, N);
  p.donor_ids.reserve(N);
  for (int i = 0; i < N; ++i) p.donor_ids.push_back("d" + std::to_string(i));
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < N; ++i) p.donors(t, i) = gauss(rng);
  }
  p.intervention_time = t_star;

  std::vector<int> loading = {3, 17, 42, 63, 88, 101, 137, 150, 176, 199};
  p.target.setZero(T);
  for (int t = 0; t < T; ++t) {
    for (int i : loading) p.target(t) += p.donors(t, i);
    p.target(t) += 0.05 * gauss(rng);
  }

  SparsePriorConfig prior;
  prior.eta = 0.95;
  prior.sigma_narrow = 0.005;
  prior.sigma_wide = 1.0;
  prior.max_iters = 300;
  ScFit sc = fit_sc(p, p.donor_ids, prior);
  CHECK(sc.sparse);

  const double max_w = sc.fit.coefficients.cwiseAbs().maxCoeff();
  int strong = 0;
  for (int i : loading) {
    if (std::abs(sc.fit.coefficients(i)) > 0.1 * max_w) ++strong;
  }
  CHECK(strong >= 9);
  for (int i = 0; i < N; ++i) {
    if (std::find(loading.begin(), loading.end(), i) == loading.end()) {
      CHECK(std::abs(sc.fit.coefficients(i)) < 0.1 * max_w);
    }
  }
}

TEST_CASE("effect CSV band is consistent with the per-time effects") {
  Panel p = linear_panel();
  ScFit sc = fit_sc(p, {"a", "b"});
  EffectEstimate est = estimate_effect(p, sc);
  REQUIRE(est.effect_lower.size() == est.per_time_effects.size());
  for (Eigen::Index k = 0; k < est.per_time_effects.size(); ++k) {
    CHECK(est.effect_lower(k) <= est.per_time_effects(k));
    CHECK(est.effect_upper(k) >= est.per_time_effects(k));
  }
  CHECK(est.post_times.size() == static_cast<std::size_t>(p.n_post()));
}
