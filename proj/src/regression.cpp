#include "scdonor/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scdonor/error.hpp"
#include "scdonor/mathutil.hpp"

namespace scdonor {

namespace {

void check_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw_validation("design rows != response length");
  if (X.rows() < 2) throw_validation("need at least 2 training rows");
  if (!X.allFinite() || !y.allFinite()) {
    throw_validation("non-finite values in regression input");
  }
}

class SvdKernel : public LeverageKernel {
 public:
  SvdKernel(Eigen::VectorXd mean, Eigen::MatrixXd v, Eigen::VectorXd sv,
            double lambda)
      : mean_(std::move(mean)), v_(std::move(v)), sv_(std::move(sv)),
        lambda_(lambda) {}

  double quad(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd xc = x - mean_;
    Eigen::VectorXd t = v_.transpose() * xc;
    double q = (t.array().square() / (sv_.array().square() + lambda_)).sum();
    if (lambda_ > 0.0) {
      // Component of xc orthogonal to the row space sees only the penalty.
      double resid = xc.squaredNorm() - t.squaredNorm();
      q += std::max(0.0, resid) / lambda_;
    }
    return q;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd sv_;
  double lambda_;
};

// Leverage for a per-coefficient-weighted ridge via the push-through
// identity: xc'(X'X + L)^-1 xc = xc'L^-1 xc - v'(I + X L^-1 X')^-1 v with
// v = X L^-1 xc. Keeps everything at n x n.
class WoodburyKernel : public LeverageKernel {
 public:
  WoodburyKernel(Eigen::VectorXd mean, Eigen::MatrixXd xc,
                 Eigen::VectorXd penalty)
      : mean_(std::move(mean)), xc_(std::move(xc)), penalty_(std::move(penalty)) {
    Eigen::MatrixXd k = xc_ * penalty_.cwiseInverse().asDiagonal() * xc_.transpose();
    k.diagonal().array() += 1.0;
    ldlt_.compute(k);
  }

  double quad(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd xc = x - mean_;
    Eigen::VectorXd w = xc.cwiseQuotient(penalty_);
    Eigen::VectorXd v = xc_ * w;
    double q = xc.dot(w) - v.dot(ldlt_.solve(v));
    return std::max(0.0, q);
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd xc_;
  Eigen::VectorXd penalty_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

double log_normal_pdf(double x, double sd) {
  return -0.5 * std::log(2.0 * M_PI) - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

}  // namespace

double RegressionFit::leverage(const Eigen::VectorXd& x) const {
  double q = kernel ? kernel->quad(x) : 0.0;
  return 1.0 / static_cast<double>(n_train) + q;
}

void SparsePriorConfig::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw_validation("sparse prior: eta must be in (0,1)");
  if (!(sigma_narrow > 0.0)) throw_validation("sparse prior: sigma_narrow must be > 0");
  if (!(sigma_narrow < sigma_wide)) {
    throw_validation("sparse prior: sigma_narrow must be < sigma_wide");
  }
  if (max_iters < 1) throw_validation("sparse prior: max_iters must be >= 1");
  if (!(tol > 0.0)) throw_validation("sparse prior: tol must be > 0");
}

RidgeBasis::RidgeBasis(const Eigen::MatrixXd& X, double lambda) {
  if (X.rows() < 2) throw_validation("ridge: need at least 2 training rows");
  if (!X.allFinite()) throw_validation("ridge: non-finite design entries");
  if (lambda < 0.0) throw_validation("ridge: lambda must be >= 0");

  n_ = X.rows();
  p_ = X.cols();
  lambda_ = lambda;
  mean_ = X.colwise().mean();
  Eigen::MatrixXd xc = X.rowwise() - mean_.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  sv_ = svd.singularValues();

  const double tol = sv_.size() > 0
                         ? sv_(0) * std::max(n_, p_) *
                               std::numeric_limits<double>::epsilon()
                         : 0.0;
  rank_ = 0;
  for (Eigen::Index i = 0; i < sv_.size(); ++i) {
    if (sv_(i) > tol) ++rank_;
  }
  if (lambda_ == 0.0 && rank_ < p_) {
    throw_numerical("ridge: rank-deficient centered design at lambda = 0");
  }

  kernel_ = std::make_shared<SvdKernel>(mean_, v_, sv_, lambda_);
}

RegressionFit RidgeBasis::fit(const Eigen::VectorXd& y) const {
  if (y.size() != n_) throw_validation("ridge: response length != design rows");
  if (!y.allFinite()) throw_validation("ridge: non-finite response entries");

  const double y_mean = y.mean();
  Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::VectorXd b = u_.transpose() * yc;

  Eigen::VectorXd shrink(sv_.size());
  Eigen::VectorXd hat(sv_.size());
  for (Eigen::Index j = 0; j < sv_.size(); ++j) {
    const double s2 = sv_(j) * sv_(j);
    const double denom = s2 + lambda_;
    shrink(j) = denom > 0.0 ? sv_(j) / denom : 0.0;
    hat(j) = denom > 0.0 ? s2 / denom : 0.0;
  }

  RegressionFit fit;
  fit.coefficients = v_ * shrink.cwiseProduct(b);
  fit.intercept = y_mean - mean_.dot(fit.coefficients);
  fit.ridge_lambda = lambda_;
  fit.n_train = n_;
  fit.design_dim = p_;
  fit.x_mean = mean_;
  fit.kernel = kernel_;

  Eigen::VectorXd fitted_c = u_ * hat.cwiseProduct(b);
  const double rss = (yc - fitted_c).squaredNorm();
  const double edof = hat.sum() + 1.0;  // +1 for the intercept
  fit.residual_variance = rss / std::max(1.0, static_cast<double>(n_) - edof);
  return fit;
}

double RidgeBasis::leverage_quad(const Eigen::VectorXd& x) const {
  return kernel_->quad(x);
}

double RidgeBasis::hat_trace() const {
  double t = 0.0;
  for (Eigen::Index j = 0; j < sv_.size(); ++j) {
    const double s2 = sv_(j) * sv_(j);
    if (s2 + lambda_ > 0.0) t += s2 / (s2 + lambda_);
  }
  return t;
}

Eigen::VectorXd RidgeBasis::hat_diagonal() const {
  Eigen::VectorXd w(sv_.size());
  for (Eigen::Index j = 0; j < sv_.size(); ++j) {
    const double s2 = sv_(j) * sv_(j);
    w(j) = s2 + lambda_ > 0.0 ? s2 / (s2 + lambda_) : 0.0;
  }
  Eigen::VectorXd h = u_.array().square().matrix() * w;
  h.array() += 1.0 / static_cast<double>(n_);
  return h;
}

Eigen::MatrixXd RidgeBasis::fitted_centered(const Eigen::MatrixXd& Y) const {
  if (Y.rows() != n_) throw_validation("ridge: response rows != design rows");
  Eigen::RowVectorXd means = Y.colwise().mean();
  Eigen::MatrixXd yc = Y.rowwise() - means;
  Eigen::VectorXd w(sv_.size());
  for (Eigen::Index j = 0; j < sv_.size(); ++j) {
    const double s2 = sv_(j) * sv_(j);
    w(j) = s2 + lambda_ > 0.0 ? s2 / (s2 + lambda_) : 0.0;
  }
  return u_ * (w.asDiagonal() * (u_.transpose() * yc));
}

Eigen::VectorXd RidgeBasis::predict_columns(const Eigen::MatrixXd& Y,
                                            const Eigen::VectorXd& x_new) const {
  if (Y.rows() != n_) throw_validation("ridge: response rows != design rows");
  if (x_new.size() != p_) throw_validation("ridge: input dimension mismatch");
  Eigen::RowVectorXd means = Y.colwise().mean();
  Eigen::MatrixXd yc = Y.rowwise() - means;
  Eigen::VectorXd g = v_.transpose() * (x_new - mean_);
  for (Eigen::Index j = 0; j < sv_.size(); ++j) {
    const double denom = sv_(j) * sv_(j) + lambda_;
    g(j) = denom > 0.0 ? g(j) * sv_(j) / denom : 0.0;
  }
  return means.transpose() + (u_.transpose() * yc).transpose() * g;
}

std::shared_ptr<const LeverageKernel> RidgeBasis::kernel() const { return kernel_; }

RegressionFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        double lambda) {
  check_design(X, y);
  RidgeBasis basis(X, lambda);
  return basis.fit(y);
}

PredictionInterval predict_interval(const RegressionFit& fit,
                                    const Eigen::VectorXd& x_new, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw_validation("predict_interval: level must lie in (0, 1)");
  }
  if (x_new.size() != fit.design_dim) {
    throw_validation("predict_interval: input dimension mismatch");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half =
      z * std::sqrt(fit.residual_variance * (1.0 + fit.leverage(x_new)));
  PredictionInterval pi;
  pi.center = fit.predict(x_new);
  pi.lower = pi.center - half;
  pi.upper = pi.center + half;
  pi.level = level;
  return pi;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(10.0, -3.0 + 0.5 * k));
  return grid;
}

double choose_ridge_lambda(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const std::vector<double>& grid) {
  if (grid.empty()) throw_validation("lambda grid is empty");
  if (X.rows() != Y.rows()) throw_validation("design rows != response rows");
  const Eigen::Index n = X.rows();

  Eigen::RowVectorXd x_mean = X.colwise().mean();
  Eigen::MatrixXd xc = X.rowwise() - x_mean;
  Eigen::RowVectorXd y_mean = Y.colwise().mean();
  Eigen::MatrixXd yc = Y.rowwise() - y_mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU);
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::MatrixXd b = u.transpose() * yc;           // r x m
  Eigen::MatrixXd u2 = u.array().square().matrix(); // n x r

  double best_lambda = grid.back();  // most regularized fallback
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    if (!(lambda > 0.0)) throw_validation("LOO lambda grid entries must be > 0");
    Eigen::VectorXd w(sv.size());
    for (Eigen::Index j = 0; j < sv.size(); ++j) {
      const double s2 = sv(j) * sv(j);
      w(j) = s2 / (s2 + lambda);
    }
    Eigen::VectorXd h = u2 * w;
    h.array() += 1.0 / static_cast<double>(n);
    // Where the smoother interpolates a row (h -> 1) the closed-form LOO
    // residual is 0/0 and floating point returns nonsense zeros; such a
    // lambda cannot be scored.
    if ((1.0 - h.array()).minCoeff() < 1e-8) continue;
    Eigen::MatrixXd resid = yc - u * (w.asDiagonal() * b);
    Eigen::ArrayXd denom = 1.0 - h.array();
    double score = (resid.array().colwise() / denom).square().sum();
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

RegressionFit fit_sparse_map(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const SparsePriorConfig& prior,
                             std::vector<double>* log_posterior_trace) {
  check_design(X, y);
  prior.validate();

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const double s2sq = prior.sigma_wide * prior.sigma_wide;

  Eigen::RowVectorXd x_mean = X.colwise().mean();
  Eigen::MatrixXd xc = X.rowwise() - x_mean;
  const double y_mean = y.mean();
  Eigen::VectorXd yc = y.array() - y_mean;

  auto solve_weighted = [&](const Eigen::VectorXd& penalty,
                            Eigen::LDLT<Eigen::MatrixXd>* ldlt_out) {
    Eigen::MatrixXd k =
        xc * penalty.cwiseInverse().asDiagonal() * xc.transpose();
    k.diagonal().array() += 1.0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    Eigen::VectorXd s = ldlt.solve(yc);
    if (ldlt_out) *ldlt_out = std::move(ldlt);
    return Eigen::VectorXd(penalty.cwiseInverse().asDiagonal() *
                           (xc.transpose() * s));
  };

  // Start from the all-wide solution so the narrow component cannot trap
  // every coefficient at zero on the first E-step.
  double sigma2 = std::max((yc.squaredNorm() / std::max<Eigen::Index>(1, n - 1)),
                           1e-30);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, sigma2 / s2sq);
  Eigen::VectorXd beta = solve_weighted(penalty, nullptr);
  sigma2 = std::max((yc - xc * beta).squaredNorm() / static_cast<double>(n), 1e-30);

  const double log_eta = std::log(prior.eta);
  const double log_1m_eta = std::log1p(-prior.eta);

  // The narrow width is annealed from sigma_wide/4 down to its target so the
  // E-step can separate active from inactive coefficients before the spike
  // tightens; a cold start at a tight spike sticks in a dense mode when the
  // design is wider than it is tall. Convergence and the posterior trace are
  // reported for the final (target-width) phase.
  std::vector<double> ladder;
  for (double s = prior.sigma_wide / 4.0; s > prior.sigma_narrow * 1.5 &&
                                          ladder.size() < 8;
       s *= 0.25) {
    ladder.push_back(s);
  }
  ladder.push_back(prior.sigma_narrow);

  Eigen::VectorXd resp(p);
  bool converged = false;
  Eigen::LDLT<Eigen::MatrixXd> last_ldlt;
  for (std::size_t phase = 0; phase < ladder.size(); ++phase) {
    const double sn = ladder[phase];
    const double sn_sq = sn * sn;
    const bool final_phase = phase + 1 == ladder.size();
    converged = false;
    for (int iter = 0; iter < prior.max_iters; ++iter) {
      // E-step: responsibility of the narrow component per coefficient.
      for (Eigen::Index j = 0; j < p; ++j) {
        const double l1 = log_eta + log_normal_pdf(beta(j), sn);
        const double l2 = log_1m_eta + log_normal_pdf(beta(j), prior.sigma_wide);
        resp(j) = 1.0 / (1.0 + std::exp(l2 - l1));
      }
      // M-step: weighted ridge at the current noise level, then noise update.
      for (Eigen::Index j = 0; j < p; ++j) {
        penalty(j) = sigma2 * (resp(j) / sn_sq + (1.0 - resp(j)) / s2sq);
      }
      Eigen::VectorXd beta_new = solve_weighted(penalty, &last_ldlt);
      const double rss = (yc - xc * beta_new).squaredNorm();
      sigma2 = std::max(rss / static_cast<double>(n), 1e-30);

      const double delta = (beta_new - beta).cwiseAbs().maxCoeff();
      beta = std::move(beta_new);

      if (final_phase && log_posterior_trace) {
        double lp = -0.5 * static_cast<double>(n) * std::log(2.0 * M_PI * sigma2) -
                    rss / (2.0 * sigma2);
        for (Eigen::Index j = 0; j < p; ++j) {
          const double l1 = log_eta + log_normal_pdf(beta(j), prior.sigma_narrow);
          const double l2 = log_1m_eta + log_normal_pdf(beta(j), prior.sigma_wide);
          const double m = std::max(l1, l2);
          lp += m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
        }
        log_posterior_trace->push_back(lp);
      }

      if (delta < prior.tol) {
        converged = true;
        break;
      }
    }
  }

  RegressionFit fit;
  fit.coefficients = beta;
  fit.intercept = y_mean - x_mean.dot(beta);
  fit.ridge_lambda = 0.0;
  fit.n_train = n;
  fit.design_dim = p;
  fit.x_mean = x_mean.transpose();
  fit.converged = converged;

  const double rss = (yc - xc * beta).squaredNorm();
  // Effective dof of the final weighted smoother: n - trace((I + K)^-1).
  Eigen::MatrixXd inv = last_ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  const double hat_trace = static_cast<double>(n) - inv.trace();
  fit.residual_variance =
      rss / std::max(1.0, static_cast<double>(n) - (hat_trace + 1.0));
  fit.kernel = std::make_shared<WoodburyKernel>(fit.x_mean, xc, penalty);
  return fit;
}

TwoStageFit fit_two_stage(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& Z, double lambda1,
                          double lambda2) {
  check_design(X, y);
  if (Z.rows() != X.rows()) throw_validation("two-stage: Z rows != X rows");
  if (Z.cols() < 1) throw_validation("two-stage: need at least one instrument");
  if (!Z.allFinite()) throw_validation("two-stage: non-finite instrument entries");

  std::unique_ptr<RidgeBasis> basis;
  try {
    basis = std::make_unique<RidgeBasis>(Z, lambda1);
  } catch (const Error& e) {
    throw_numerical(std::string("two-stage: degenerate stage-1 design: ") +
                    e.what());
  }

  Eigen::MatrixXd fitted_c = basis->fitted_centered(X);
  Eigen::RowVectorXd x_means = X.colwise().mean();
  Eigen::MatrixXd xhat = fitted_c.rowwise() + x_means;

  Eigen::VectorXd r2(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::VectorXd xcj = X.col(j).array() - x_means(j);
    const double tss = xcj.squaredNorm();
    const double rss = (xcj - fitted_c.col(j)).squaredNorm();
    r2(j) = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 0.0;
  }

  TwoStageFit out;
  out.fit = fit_ridge(xhat, y, lambda2);
  out.stage1_r2 = r2;
  out.weak_instruments = (r2.array() < 0.05).any();
  return out;
}

}  // namespace scdonor
