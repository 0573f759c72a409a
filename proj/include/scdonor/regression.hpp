#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

namespace scdonor {

// Geometry needed to compute prediction leverage for a fitted model:
// the quadratic form xc' (Gram + penalty)^-1 xc on centered inputs.
class LeverageKernel {
 public:
  virtual ~LeverageKernel() = default;
  virtual double quad(const Eigen::VectorXd& x_centered) const = 0;
};

struct RegressionFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double residual_variance = 0.0;
  double ridge_lambda = 0.0;
  Eigen::Index n_train = 0;
  Eigen::Index design_dim = 0;
  bool converged = true;  // false when an iterative fit hit its cap
  Eigen::VectorXd x_mean;
  std::shared_ptr<const LeverageKernel> kernel;

  double predict(const Eigen::VectorXd& x) const {
    return intercept + coefficients.dot(x);
  }
  // 1/n intercept term plus the kernel quadratic form.
  double leverage(const Eigen::VectorXd& x) const;
};

struct PredictionInterval {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

struct SparsePriorConfig {
  double eta = 0.9;           // expected fraction of near-zero weights
  double sigma_narrow = 0.01; // std of the near-zero component
  double sigma_wide = 1.0;    // std of the active component
  int max_iters = 200;
  double tol = 1e-8;
  void validate() const;
};

// Shared SVD factorization of one centered design, reusable across many
// response vectors (the donor-forecast step fits N regressions against the
// same lagged design). Intercepts are unpenalized via centering.
class RidgeBasis {
 public:
  RidgeBasis(const Eigen::MatrixXd& X, double lambda);

  RegressionFit fit(const Eigen::VectorXd& y) const;

  double predict(const RegressionFit& fit, const Eigen::VectorXd& x) const {
    return fit.predict(x);
  }

  // xc' (Xc'Xc + lambda I)^-1 xc for a raw input x.
  double leverage_quad(const Eigen::VectorXd& x) const;

  // trace of the ridge hat matrix (without the intercept's +1).
  double hat_trace() const;

  Eigen::Index n() const { return n_; }
  const Eigen::VectorXd& x_mean() const { return mean_; }
  double lambda() const { return lambda_; }

  // Diagonal of the hat matrix including the 1/n intercept term, as used by
  // the closed-form leave-one-out identity.
  Eigen::VectorXd hat_diagonal() const;

  // Per-column fits of a response matrix: centered fitted values, residuals.
  // Used by the pooled LOO objective and the batched donor forecasts.
  Eigen::MatrixXd fitted_centered(const Eigen::MatrixXd& Y) const;

  // Predictions at x_new of the per-column fits of Y, without materializing
  // any coefficient vectors.
  Eigen::VectorXd predict_columns(const Eigen::MatrixXd& Y,
                                  const Eigen::VectorXd& x_new) const;

  std::shared_ptr<const LeverageKernel> kernel() const;

 private:
  friend class SvdKernel;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd u_;   // n x r
  Eigen::VectorXd sv_;  // r
  Eigen::MatrixXd v_;   // p x r
  double lambda_ = 0.0;
  Eigen::Index n_ = 0;
  Eigen::Index p_ = 0;
  Eigen::Index rank_ = 0;  // numerical rank of the centered design
  std::shared_ptr<const LeverageKernel> kernel_;
};

// Minimizes ||y - a - X b||^2 + lambda ||b||^2 with unpenalized intercept.
// residual_variance = RSS / max(1, n - (hat trace + 1)). lambda = 0 requires
// a full-column-rank centered design.
RegressionFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        double lambda);

// Gaussian interval: center +/- z_{(1+level)/2} sqrt(rv (1 + leverage)).
PredictionInterval predict_interval(const RegressionFit& fit,
                                    const Eigen::VectorXd& x_new, double level);

// Pooled leave-one-out lambda selection: one lambda minimizing the summed
// closed-form LOO error across all columns of Y on the shared design X.
double choose_ridge_lambda(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const std::vector<double>& grid);

// Default grid: log-spaced 1e-3 .. 1e3.
std::vector<double> default_lambda_grid();

// MAP fit under the two-component normal mixture prior on each coefficient,
// by expectation-maximization: E-step assigns each coefficient a
// responsibility for the narrow component, M-step solves the induced
// per-coefficient-weighted ridge and refreshes the noise variance.
// Non-convergence sets fit.converged = false. `log_posterior_trace`, when
// given, receives the log posterior after every iteration.
RegressionFit fit_sparse_map(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const SparsePriorConfig& prior,
                             std::vector<double>* log_posterior_trace = nullptr);

struct TwoStageFit {
  RegressionFit fit;           // stage-2 coefficients: debiased weights
  Eigen::VectorXd stage1_r2;   // in-sample R^2 of each X column on Z
  bool weak_instruments = false;  // any stage-1 R^2 < 0.05
};

// Stage 1 regresses each column of X on Z (with intercept); stage 2 regresses
// y on the fitted X-hat. With Z == X and lambda1 = 0 this reduces to the
// single-stage fit of y on X.
TwoStageFit fit_two_stage(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& Z, double lambda1 = 0.0,
                          double lambda2 = 0.0);

}  // namespace scdonor
