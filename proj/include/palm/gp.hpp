#pragma once

#include "palm/kernel.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace palm {

/// Raised when a correlation matrix is not numerically positive definite.
class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Amplitude estimates below this are replaced by it.
inline constexpr double kTau2Floor = 1e-12;

struct MomentPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// A zero-mean GP conditioned on a small design: hyperparameters, the
/// Cholesky factor of K = C + eta*I, and alpha = K^{-1} y. Immutable.
class GpFit {
public:
  GpFit(Design design, Eigen::VectorXd responses, Lengthscales theta,
        double tau2, Nugget eta);

  /// Same design and lengthscales with a new amplitude and nugget; the
  /// factorization is recomputed.
  GpFit with_amplitude(double tau2, Nugget eta) const;

  MomentPrediction predict(Point x) const;
  /// k(x)^T K^{-1} k(x)
  double predictive_kernel(Point x) const;
  /// Posterior mean at the design points treated as new inputs,
  /// C K^{-1} y = y - eta * alpha.
  Eigen::VectorXd smoothed_fit() const;

  const Design &design() const { return design_; }
  const Eigen::VectorXd &responses() const { return responses_; }
  const Lengthscales &theta() const { return theta_; }
  double tau2() const { return tau2_; }
  const Nugget &nugget() const { return eta_; }
  const Eigen::LLT<Eigen::MatrixXd> &chol() const { return chol_; }
  Eigen::MatrixXd chol_factor() const { return chol_.matrixL(); }
  const Eigen::VectorXd &alpha() const { return alpha_; }
  Eigen::Index size() const { return design_.rows(); }
  Eigen::Index dim() const { return design_.cols(); }

private:
  Design design_;
  Eigen::VectorXd responses_;
  Lengthscales theta_;
  double tau2_;
  Nugget eta_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

GpFit fit_gp(const Design &X, const Eigen::VectorXd &y,
             const Lengthscales &theta, double tau2, Nugget eta);

MomentPrediction gp_predict(const GpFit &fit, Point x);

/// y^T K^{-1} y / n, floored at kTau2Floor.
double profile_tau2(const Design &X, const Eigen::VectorXd &y,
                    const Lengthscales &theta, double eta);

/// Gaussian log density of y with the amplitude profiled out.
double log_likelihood(const Design &X, const Eigen::VectorXd &y,
                      const Lengthscales &theta, double eta);

struct LikelihoodGradient {
  double value = 0.0;
  /// d/d theta_l. A single entry when `isotropic` was requested.
  Eigen::VectorXd d_theta;
  double d_eta = 0.0;
};

/// Profile log likelihood and its analytic gradient. With `isotropic`, all
/// lengthscales are tied and the gradient is taken with respect to the
/// shared value.
LikelihoodGradient log_likelihood_gradient(const Design &X,
                                           const Eigen::VectorXd &y,
                                           const Lengthscales &theta,
                                           double eta, bool isotropic = false);

struct MleOptions {
  double theta_min = 1e-3;
  bool isotropic = false;
  bool estimate_nugget = false;
  double eta_min = 1e-6;
  double eta_max = 1.0;
  int max_iter = 100;
  double grad_tol = 1e-6;
};

struct MleResult {
  Lengthscales theta;
  Nugget eta;
  double log_likelihood = 0.0;
  int iterations = 0;
  /// False when the iteration limit or a line-search failure stopped the
  /// search; theta is then the best iterate found.
  bool converged = false;
};

/// Maximizes the profile likelihood over log-lengthscales (and the log
/// nugget when `estimate_nugget`), clamped to [theta_min, theta_max].
MleResult mle_lengthscale(const Design &X, const Eigen::VectorXd &y, Nugget eta,
                          const Lengthscales &theta_max,
                          const MleOptions &options = {},
                          std::optional<Lengthscales> start = std::nullopt);

/// Ten-percent quantile of squared pairwise distances over (a sample of) the
/// rows of X: a data-scaled starting lengthscale.
double initial_lengthscale(const Design &X, std::uint64_t seed,
                           Eigen::Index max_rows = 1000);

struct CapOptions {
  int num_subsets = 5;
  int subset_size = 200;
  /// Upper search bound for the subset fits, per dimension.
  double theta_upper = 0.0; // 0 means "d", the squared unit-cube diagonal
  Nugget eta = Nugget::jitter();
  bool estimate_nugget = false;
  std::uint64_t seed = 0;
};

/// Component-wise largest separable MLE lengthscale over GPs fit to uniform
/// random subsets of the data.
Lengthscales lengthscale_cap(const Design &X, const Eigen::VectorXd &y,
                             const CapOptions &options);

} // namespace palm
