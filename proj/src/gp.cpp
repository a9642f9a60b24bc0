#include "palm/gp.hpp"
#include "palm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace palm {

namespace {

Eigen::LLT<Eigen::MatrixXd> factorize(const Design &X,
                                      const Lengthscales &theta, double eta) {
  Eigen::LLT<Eigen::MatrixXd> llt(corr_matrix(X, theta, eta));
  if (llt.info() != Eigen::Success ||
      !llt.matrixLLT().diagonal().allFinite())
    throw FactorizationError(
        "correlation matrix is not positive definite; increase the nugget");
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd> &llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void check_xy(const Design &X, const Eigen::VectorXd &y,
              const Lengthscales &theta) {
  if (X.rows() < 1)
    throw std::invalid_argument("gp: empty design");
  if (X.rows() != y.size())
    throw std::invalid_argument("gp: design and response sizes differ");
  if (X.cols() != theta.dim())
    throw std::invalid_argument("gp: lengthscale dimension mismatch");
}

} // namespace

GpFit::GpFit(Design design, Eigen::VectorXd responses, Lengthscales theta,
             double tau2, Nugget eta)
    : design_(std::move(design)), responses_(std::move(responses)),
      theta_(std::move(theta)), tau2_(tau2), eta_(eta) {
  check_xy(design_, responses_, theta_);
  if (!(tau2_ > 0.0) || !std::isfinite(tau2_))
    throw std::invalid_argument("GpFit: tau2 must be positive");
  chol_ = factorize(design_, theta_, eta_.eta);
  alpha_ = chol_.solve(responses_);
}

GpFit GpFit::with_amplitude(double tau2, Nugget eta) const {
  return GpFit(design_, responses_, theta_, tau2, eta);
}

MomentPrediction GpFit::predict(Point x) const {
  if (static_cast<Eigen::Index>(x.size()) != dim())
    throw std::invalid_argument("gp_predict: dimension mismatch");
  const Eigen::VectorXd k = cross_corr_vec(design_, x, theta_);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  MomentPrediction p;
  p.mean = k.dot(alpha_);
  p.variance = std::max(0.0, tau2_ * (1.0 + eta_.eta - v.squaredNorm()));
  return p;
}

double GpFit::predictive_kernel(Point x) const {
  if (static_cast<Eigen::Index>(x.size()) != dim())
    throw std::invalid_argument("predictive_kernel: dimension mismatch");
  const Eigen::VectorXd k = cross_corr_vec(design_, x, theta_);
  return chol_.matrixL().solve(k).squaredNorm();
}

Eigen::VectorXd GpFit::smoothed_fit() const {
  return responses_ - eta_.eta * alpha_;
}

GpFit fit_gp(const Design &X, const Eigen::VectorXd &y,
             const Lengthscales &theta, double tau2, Nugget eta) {
  return GpFit(X, y, theta, tau2, eta);
}

MomentPrediction gp_predict(const GpFit &fit, Point x) {
  return fit.predict(x);
}

double profile_tau2(const Design &X, const Eigen::VectorXd &y,
                    const Lengthscales &theta, double eta) {
  check_xy(X, y, theta);
  const auto llt = factorize(X, theta, eta);
  const double q = y.dot(llt.solve(y));
  return std::max(q / static_cast<double>(y.size()), kTau2Floor);
}

double log_likelihood(const Design &X, const Eigen::VectorXd &y,
                      const Lengthscales &theta, double eta) {
  check_xy(X, y, theta);
  const auto llt = factorize(X, theta, eta);
  const double n = static_cast<double>(y.size());
  const double q = y.dot(llt.solve(y));
  const double tau2 = std::max(q / n, kTau2Floor);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * n * std::log(tau2) -
         0.5 * log_det(llt) - 0.5 * q / tau2;
}

LikelihoodGradient log_likelihood_gradient(const Design &X,
                                           const Eigen::VectorXd &y,
                                           const Lengthscales &theta,
                                           double eta, bool isotropic) {
  check_xy(X, y, theta);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const auto llt = factorize(X, theta, eta);
  const Eigen::VectorXd alpha = llt.solve(y);
  const double q = y.dot(alpha);
  const double nn = static_cast<double>(n);
  const double tau2 = std::max(q / nn, kTau2Floor);

  LikelihoodGradient out;
  out.value = -0.5 * nn * std::log(2.0 * std::numbers::pi) -
              0.5 * nn * std::log(tau2) - 0.5 * log_det(llt) - 0.5 * q / tau2;

  // dl/dp = -1/2 tr(A dK/dp) with A = K^{-1} - alpha alpha^T / tau2
  Eigen::MatrixXd A = llt.solve(Eigen::MatrixXd::Identity(n, n));
  A.noalias() -= (alpha * alpha.transpose()) / tau2;

  Eigen::VectorXd per_dim = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = sq_exp_corr(row_span(X, i), row_span(X, j), theta);
      const double w = A(i, j) * c; // counted twice by symmetry
      for (Eigen::Index l = 0; l < d; ++l) {
        const double diff = X(i, l) - X(j, l);
        per_dim[l] += w * diff * diff / (theta[l] * theta[l]);
      }
    }
  }
  per_dim *= -1.0; // -1/2 * 2 from the symmetric pair
  out.d_eta = -0.5 * A.trace();
  if (isotropic) {
    out.d_theta = Eigen::VectorXd::Constant(1, per_dim.sum());
  } else {
    out.d_theta = per_dim;
  }
  return out;
}

double initial_lengthscale(const Design &X, std::uint64_t seed,
                           Eigen::Index max_rows) {
  const Eigen::Index N = X.rows();
  if (N < 2)
    return 0.1;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(N));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (N > max_rows) {
    std::vector<Eigen::Index> sampled;
    std::mt19937_64 rng(seed);
    std::sample(rows.begin(), rows.end(), std::back_inserter(sampled),
                max_rows, rng);
    rows = std::move(sampled);
  }
  std::vector<double> d2;
  d2.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double s = (X.row(rows[i]) - X.row(rows[j])).squaredNorm();
      if (s > 0.0)
        d2.push_back(s);
    }
  if (d2.empty())
    return 0.1;
  const auto k = static_cast<std::ptrdiff_t>(0.1 * static_cast<double>(d2.size()));
  std::nth_element(d2.begin(), d2.begin() + k, d2.end());
  return d2[static_cast<std::size_t>(k)];
}

MleResult mle_lengthscale(const Design &X, const Eigen::VectorXd &y, Nugget eta,
                          const Lengthscales &theta_max,
                          const MleOptions &options,
                          std::optional<Lengthscales> start) {
  check_xy(X, y, theta_max);
  const Eigen::Index d = X.cols();
  const Eigen::Index nt = options.isotropic ? 1 : d;
  const Eigen::Index np = nt + (options.estimate_nugget ? 1 : 0);

  BoxBounds bounds{Eigen::VectorXd(np), Eigen::VectorXd(np)};
  for (Eigen::Index l = 0; l < nt; ++l) {
    const double hi =
        options.isotropic ? theta_max.values().maxCoeff() : theta_max[l];
    bounds.hi[l] = std::log(hi);
    bounds.lo[l] = std::log(std::min(options.theta_min, hi));
  }
  if (options.estimate_nugget) {
    bounds.lo[nt] = std::log(options.eta_min);
    bounds.hi[nt] = std::log(options.eta_max);
  }

  Eigen::VectorXd x0(np);
  if (start) {
    for (Eigen::Index l = 0; l < nt; ++l)
      x0[l] = std::log(options.isotropic ? start->values().mean() : (*start)[l]);
  } else {
    x0.head(nt).setConstant(std::log(initial_lengthscale(X, 0)));
  }
  if (options.estimate_nugget)
    x0[nt] = std::log(std::max(eta.eta, options.eta_min));

  auto unpack = [&](const Eigen::VectorXd &p) {
    Eigen::VectorXd th(d);
    for (Eigen::Index l = 0; l < d; ++l)
      th[l] = std::exp(p[options.isotropic ? 0 : l]);
    const double e = options.estimate_nugget ? std::exp(p[nt]) : eta.eta;
    return std::pair{Lengthscales(std::move(th)), e};
  };

  auto objective = [&](const Eigen::VectorXd &p, Eigen::VectorXd *grad) {
    auto [th, e] = unpack(p);
    try {
      const auto lg = log_likelihood_gradient(X, y, th, e, options.isotropic);
      if (grad) {
        grad->resize(np);
        for (Eigen::Index l = 0; l < nt; ++l)
          (*grad)[l] = -lg.d_theta[l] * std::exp(p[l]);
        if (options.estimate_nugget)
          (*grad)[nt] = -lg.d_eta * e;
      }
      return -lg.value;
    } catch (const FactorizationError &) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const OptimResult opt = minimize_projected_bfgs(
      objective, x0, bounds, options.max_iter, options.grad_tol);
  if (!std::isfinite(opt.value))
    throw FactorizationError(
        "mle_lengthscale: likelihood undefined at the starting point");

  auto [th, e] = unpack(opt.x);
  MleResult res{std::move(th),
                options.estimate_nugget ? Nugget::value(e) : eta, -opt.value,
                opt.iterations, opt.converged};
  return res;
}

Lengthscales lengthscale_cap(const Design &X, const Eigen::VectorXd &y,
                             const CapOptions &options) {
  const Eigen::Index N = X.rows();
  const Eigen::Index d = X.cols();
  if (options.num_subsets < 1)
    throw std::invalid_argument("lengthscale_cap: need at least one subset");
  if (options.subset_size < 1 || options.subset_size > N)
    throw std::invalid_argument("lengthscale_cap: subset_size must be in [1, N]");

  const double upper =
      options.theta_upper > 0.0 ? options.theta_upper : static_cast<double>(d);
  const Lengthscales upper_theta = Lengthscales::isotropic(upper, d);
  MleOptions mle;
  mle.estimate_nugget = options.estimate_nugget;

  std::mt19937_64 rng(options.seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), Eigen::Index{0});

  Eigen::VectorXd cap = Eigen::VectorXd::Zero(d);
  for (int s = 0; s < options.num_subsets; ++s) {
    for (int attempt = 0;; ++attempt) {
      std::vector<Eigen::Index> idx;
      std::sample(all.begin(), all.end(), std::back_inserter(idx),
                  options.subset_size, rng);
      Design Xs(static_cast<Eigen::Index>(idx.size()), d);
      Eigen::VectorXd ys(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        Xs.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
        ys[static_cast<Eigen::Index>(i)] = y[idx[i]];
      }
      try {
        const MleResult r = mle_lengthscale(Xs, ys, options.eta, upper_theta, mle);
        cap = cap.cwiseMax(r.theta.values());
        break;
      } catch (const FactorizationError &) {
        if (attempt >= 1)
          throw FactorizationError(
              "lengthscale_cap: degenerate subset after resampling");
      }
    }
  }
  return Lengthscales(cap);
}

} // namespace palm
