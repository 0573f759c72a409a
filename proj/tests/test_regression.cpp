#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "scdonor/error.hpp"
#include "scdonor/mathutil.hpp"
#include "scdonor/regression.hpp"

using namespace scdonor;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

// Normal-equations oracle on the intercept-augmented design, solved by
// fully-pivoted LU. Independent of the SVD path in fit_ridge.
Eigen::VectorXd ols_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::VectorXd aty = a.transpose() * y;
  return ata.fullPivLu().solve(aty);
}

}  // namespace

TEST_CASE("normal quantile frozen values") {
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(normal_quantile(0.1) == doctest::Approx(-normal_quantile(0.9)));
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
  CHECK_THROWS_AS(normal_quantile(1.0), Error);
}

TEST_CASE("fit_ridge recovers an exact line") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXd y(3);
  y << 2, 4, 6;
  RegressionFit fit = fit_ridge(x, y, 0.0);
  CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.residual_variance == doctest::Approx(0.0).scale(1.0).epsilon(1e-18));
}

TEST_CASE("fit_ridge limiting cases") {
  Eigen::MatrixXd x = random_matrix(40, 3, 7);
  Eigen::VectorXd y = random_matrix(40, 1, 8).col(0);
  RegressionFit fit = fit_ridge(x, y, 1e12);
  CHECK(fit.coefficients.norm() < 1e-6);
  CHECK(fit.intercept == doctest::Approx(y.mean()).epsilon(1e-6));
}

TEST_CASE("fit_ridge matches the normal-equations oracle at lambda 0") {
  Eigen::MatrixXd x = random_matrix(50, 5, 21);
  Eigen::VectorXd beta_true(5);
  beta_true << 1.5, -2.0, 0.3, 0.0, 4.0;
  Eigen::VectorXd y = x * beta_true + 0.1 * random_matrix(50, 1, 22).col(0);

  RegressionFit fit = fit_ridge(x, y, 0.0);
  Eigen::VectorXd oracle = ols_oracle(x, y);
  CHECK(std::abs(fit.intercept - oracle(0)) < 1e-8);
  for (Eigen::Index j = 0; j < 5; ++j) {
    CHECK(std::abs(fit.coefficients(j) - oracle(j + 1)) < 1e-8);
  }
}

TEST_CASE("fit_ridge is invariant to row permutation") {
  Eigen::MatrixXd x = random_matrix(30, 4, 31);
  Eigen::VectorXd y = random_matrix(30, 1, 32).col(0);
  RegressionFit a = fit_ridge(x, y, 0.5);

  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(33);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd xp(30, 4);
  Eigen::VectorXd yp(30);
  for (int i = 0; i < 30; ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    yp(i) = y(perm[static_cast<std::size_t>(i)]);
  }
  RegressionFit b = fit_ridge(xp, yp, 0.5);
  CHECK(std::abs(a.intercept - b.intercept) < 1e-10);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.residual_variance == doctest::Approx(b.residual_variance).epsilon(1e-10));
}

TEST_CASE("fit_ridge rejects rank-deficient designs at lambda 0") {
  Eigen::MatrixXd x = random_matrix(20, 2, 41);
  Eigen::MatrixXd dup(20, 3);
  dup << x, x.col(0);
  Eigen::VectorXd y = random_matrix(20, 1, 42).col(0);
  CHECK_THROWS_AS(fit_ridge(dup, y, 0.0), Error);
  CHECK_NOTHROW(fit_ridge(dup, y, 1e-6));
}

TEST_CASE("predict_interval basics") {
  RegressionFit fit;
  fit.intercept = 1.0;
  fit.coefficients = Eigen::VectorXd::Constant(1, 2.0);
  fit.design_dim = 1;
  fit.n_train = 1'000'000'000'000LL;
  fit.residual_variance = 1.0;

  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 3.0);
  PredictionInterval pi = predict_interval(fit, x0, 0.8);
  CHECK(pi.center == doctest::Approx(7.0));
  // z_{0.9} with negligible leverage
  CHECK(pi.upper - pi.center == doctest::Approx(1.2815515655446004).epsilon(1e-9));

  fit.residual_variance = 0.0;
  pi = predict_interval(fit, x0, 0.8);
  CHECK(pi.lower == pi.center);
  CHECK(pi.upper == pi.center);

  fit.residual_variance = 1.0;
  CHECK_THROWS_AS(predict_interval(fit, x0, 0.0), Error);
  CHECK_THROWS_AS(predict_interval(fit, x0, 1.0), Error);
}

TEST_CASE("interval width grows with level and residual variance") {
  Eigen::MatrixXd x = random_matrix(60, 2, 51);
  Eigen::VectorXd y = x.col(0) - x.col(1) + 0.5 * random_matrix(60, 1, 52).col(0);
  RegressionFit fit = fit_ridge(x, y, 1e-3);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);

  double w80 = predict_interval(fit, x0, 0.8).upper - predict_interval(fit, x0, 0.8).lower;
  double w95 = predict_interval(fit, x0, 0.95).upper - predict_interval(fit, x0, 0.95).lower;
  CHECK(w95 > w80);

  RegressionFit wider = fit;
  wider.residual_variance *= 4.0;
  double w80b = predict_interval(wider, x0, 0.8).upper - predict_interval(wider, x0, 0.8).lower;
  CHECK(w80b > w80);
}

TEST_CASE("prediction interval coverage is calibrated") {
  // Marginal coverage of the 80% interval over fresh draws from a
  // well-specified Gaussian linear model.
  std::mt19937_64 rng(61);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int covered = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd x = random_matrix(200, 3, 1000 + static_cast<std::uint64_t>(rep));
    Eigen::VectorXd beta(3);
    beta << 1.0, -0.5, 2.0;
    Eigen::VectorXd y = x * beta;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += gauss(rng);
    RegressionFit fit = fit_ridge(x, y, 1e-8);
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd xt(3);
      for (int j = 0; j < 3; ++j) xt(j) = gauss(rng);
      double yt = xt.dot(beta) + gauss(rng);
      PredictionInterval pi = predict_interval(fit, xt, 0.8);
      if (yt >= pi.lower && yt <= pi.upper) ++covered;
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  CHECK(coverage >= 0.78);
  CHECK(coverage <= 0.82);
}

TEST_CASE("pooled LOO matches brute-force leave-one-out refits") {
  const Eigen::Index n = 24;
  Eigen::MatrixXd x = random_matrix(n, 3, 71);
  Eigen::MatrixXd y(n, 2);
  y.col(0) = x.col(0) - 0.5 * x.col(2) + 0.2 * random_matrix(n, 1, 72).col(0);
  y.col(1) = 0.1 * random_matrix(n, 1, 73).col(0);

  std::vector<double> grid = {1e-3, 1e-1, 1e1, 1e3};
  // Brute force: refit with each row removed, score squared errors.
  std::vector<double> brute(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::MatrixXd xi(n - 1, 3);
      Eigen::MatrixXd yi(n - 1, 2);
      Eigen::Index r = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        xi.row(r) = x.row(k);
        yi.row(r) = y.row(k);
        ++r;
      }
      for (int c = 0; c < 2; ++c) {
        RegressionFit fit = fit_ridge(xi, yi.col(c), grid[g]);
        double pred = fit.predict(x.row(i).transpose());
        brute[g] += (y(i, c) - pred) * (y(i, c) - pred);
      }
    }
  }
  std::size_t brute_best =
      std::min_element(brute.begin(), brute.end()) - brute.begin();

  double chosen = choose_ridge_lambda(x, y, grid);
  CHECK(chosen == doctest::Approx(grid[brute_best]));
}

TEST_CASE("sparse MAP recovers a planted sparse signal") {
  const Eigen::Index n = 120, p = 20;
  Eigen::MatrixXd x = random_matrix(n, p, 81);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(3) = 1.0;
  beta(11) = 1.0;
  Eigen::VectorXd y = x * beta + 0.01 * random_matrix(n, 1, 82).col(0);

  SparsePriorConfig prior;
  prior.eta = 0.9;
  prior.sigma_narrow = 0.01;
  prior.sigma_wide = 1.0;
  RegressionFit fit = fit_sparse_map(x, y, prior);
  CHECK(fit.converged);
  CHECK(fit.coefficients(3) >= 0.8);
  CHECK(fit.coefficients(11) >= 0.8);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (j != 3 && j != 11) CHECK(std::abs(fit.coefficients(j)) <= 0.05);
  }
}

TEST_CASE("sparse MAP with a vanishing narrow weight reduces to ridge") {
  const Eigen::Index n = 60, p = 4;
  Eigen::MatrixXd x = random_matrix(n, p, 91);
  Eigen::VectorXd y =
      x.col(0) - 2.0 * x.col(2) + 0.3 * random_matrix(n, 1, 92).col(0);

  SparsePriorConfig prior;
  prior.eta = 1e-12;
  prior.sigma_narrow = 0.01;
  prior.sigma_wide = 2.0;
  prior.max_iters = 500;
  prior.tol = 1e-12;
  RegressionFit fit = fit_sparse_map(x, y, prior);

  // At the EM fixed point the solution solves a plain ridge problem whose
  // penalty is the converged noise level over the wide prior variance.
  Eigen::VectorXd resid =
      y - Eigen::VectorXd::Constant(n, fit.intercept) - x * fit.coefficients;
  double lambda_eq =
      (resid.squaredNorm() / static_cast<double>(n)) / (2.0 * 2.0);
  RegressionFit ridge = fit_ridge(x, y, lambda_eq);
  CHECK((fit.coefficients - ridge.coefficients).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(fit.intercept - ridge.intercept) < 1e-6);
}

TEST_CASE("sparse MAP on all-zero response returns the null fit") {
  Eigen::MatrixXd x = random_matrix(30, 5, 101);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(30);
  SparsePriorConfig prior;
  RegressionFit fit = fit_sparse_map(x, y, prior);
  CHECK(fit.coefficients.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(fit.intercept) < 1e-12);
}

TEST_CASE("sparse MAP log posterior is non-decreasing across iterations") {
  Eigen::MatrixXd x = random_matrix(80, 10, 111);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
  beta(0) = 2.0;
  beta(7) = -1.0;
  Eigen::VectorXd y = x * beta + 0.2 * random_matrix(80, 1, 112).col(0);

  SparsePriorConfig prior;
  std::vector<double> trace;
  fit_sparse_map(x, y, prior, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-8 * (1.0 + std::abs(trace[i - 1])));
  }
}

TEST_CASE("two-stage with instruments carrying full signal equals OLS") {
  const Eigen::Index n = 100;
  Eigen::MatrixXd z = random_matrix(n, 3, 121);
  Eigen::MatrixXd gamma = random_matrix(3, 2, 122);
  Eigen::MatrixXd x = z * gamma;  // X exactly predicted by Z
  Eigen::VectorXd y =
      x.col(0) + 0.5 * x.col(1) + 0.1 * random_matrix(n, 1, 123).col(0);

  TwoStageFit ts = fit_two_stage(y, x, z);
  RegressionFit ols = fit_ridge(x, y, 0.0);
  CHECK(std::abs(ts.fit.intercept - ols.intercept) < 1e-8);
  CHECK((ts.fit.coefficients - ols.coefficients).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_FALSE(ts.weak_instruments);
}

TEST_CASE("two-stage removes errors-in-variables attenuation") {
  const Eigen::Index n = 10000;
  std::mt19937_64 rng(131);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(n);
  Eigen::MatrixXd x(n, 1), z(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    u(i) = gauss(rng);
    x(i, 0) = u(i) + 0.5 * gauss(rng);
    z(i, 0) = u(i) + 0.5 * gauss(rng);
  }
  Eigen::VectorXd y = u;

  // attenuation factor sigma_u^2 / (sigma_u^2 + sigma_eps^2) = 0.8
  RegressionFit naive = fit_ridge(x, y, 0.0);
  CHECK(naive.coefficients(0) == doctest::Approx(0.8).epsilon(0.03));

  TwoStageFit ts = fit_two_stage(y, x, z);
  CHECK(ts.fit.coefficients(0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK_FALSE(ts.weak_instruments);
}

TEST_CASE("two-stage flags weak instruments") {
  const Eigen::Index n = 500;
  Eigen::MatrixXd x = random_matrix(n, 2, 141);
  Eigen::MatrixXd z = random_matrix(n, 2, 142);  // independent of X
  Eigen::VectorXd y = x.col(0) + 0.1 * random_matrix(n, 1, 143).col(0);
  TwoStageFit ts = fit_two_stage(y, x, z);
  CHECK(ts.weak_instruments);
  CHECK(ts.stage1_r2.maxCoeff() < 0.05);
}

TEST_CASE("two-stage with Z equal to X is single-stage OLS") {
  Eigen::MatrixXd x = random_matrix(50, 3, 151);
  Eigen::VectorXd y =
      x.col(0) - x.col(1) + 0.2 * random_matrix(50, 1, 152).col(0);
  TwoStageFit ts = fit_two_stage(y, x, x);
  RegressionFit ols = fit_ridge(x, y, 0.0);
  CHECK(std::abs(ts.fit.intercept - ols.intercept) < 1e-10);
  CHECK((ts.fit.coefficients - ols.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("two-stage rejects degenerate stage-1 designs") {
  Eigen::MatrixXd x = random_matrix(30, 2, 161);
  Eigen::MatrixXd z = Eigen::MatrixXd::Constant(30, 1, 3.0);
  Eigen::VectorXd y = x.col(0);
  CHECK_THROWS_AS(fit_two_stage(y, x, z), Error);
}
