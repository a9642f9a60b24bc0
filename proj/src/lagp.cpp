#include "palm/lagp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace palm {

namespace {

// Conditional variances at or below this make a candidate a duplicate.
constexpr double kDegenerateVariance = 1e-14;

double squared_distance(Point a, Point b) {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double diff = a[l] - b[l];
    s += diff * diff;
  }
  return s;
}

Design gather_rows(const Design &X, const std::vector<Eigen::Index> &idx) {
  Design out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd &y,
                       const std::vector<Eigen::Index> &idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = y[idx[i]];
  return out;
}

} // namespace

std::vector<Eigen::Index> nearest_neighbors(const Design &X, Point x,
                                            Eigen::Index m) {
  const Eigen::Index N = X.rows();
  if (m < 0 || m > N)
    throw std::invalid_argument("nearest_neighbors: m must be in [0, N]");
  if (static_cast<Eigen::Index>(x.size()) != X.cols())
    throw std::invalid_argument("nearest_neighbors: dimension mismatch");

  std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    d[static_cast<std::size_t>(i)] = {squared_distance(row_span(X, i), x), i};
  const auto mid = d.begin() + m;
  if (m < N)
    std::nth_element(d.begin(), mid, d.end());
  std::sort(d.begin(), mid);

  std::vector<Eigen::Index> out(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    out[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  return out;
}

AlcResult alc_reduction(const GpFit &fit, Point candidate, Point ref) {
  const auto &theta = fit.theta();
  const auto L = fit.chol().matrixL();
  const Eigen::VectorXd zc =
      L.solve(cross_corr_vec(fit.design(), candidate, theta));
  const Eigen::VectorXd zr = L.solve(cross_corr_vec(fit.design(), ref, theta));
  const double v = 1.0 + fit.nugget().eta - zc.squaredNorm();
  if (v <= kDegenerateVariance)
    return {0.0, true};
  const double cov = sq_exp_corr(ref, candidate, theta) - zr.dot(zc);
  return {fit.tau2() * cov * cov / v, false};
}

double default_growth_theta(const CodedData &data, const Lengthscales &theta_max,
                            const LocalConfig &cfg) {
  const double start = initial_lengthscale(data.X, 0);
  return std::clamp(start, std::min(cfg.mle.theta_min, theta_max.values().minCoeff()),
                    theta_max.values().maxCoeff());
}

LocalExpert build_local_expert(const CodedData &data, Point center,
                               const LocalConfig &cfg,
                               const Lengthscales &theta_max,
                               LocalBuildTrace *trace) {
  const Eigen::Index N = data.size();
  const Eigen::Index d = data.dim();
  const Eigen::Index n = cfg.n;
  const Eigen::Index n0 = cfg.n0;
  if (n < 1 || n0 < 1 || n0 > n)
    throw std::invalid_argument("build_local_expert: need 1 <= n0 <= n");
  if (N < n)
    throw std::invalid_argument(
        "build_local_expert: training set smaller than the local design size");
  if (static_cast<Eigen::Index>(center.size()) != d)
    throw std::invalid_argument("build_local_expert: dimension mismatch");
  if (theta_max.dim() != d)
    throw std::invalid_argument("build_local_expert: theta_max dimension");

  const double growth_theta = cfg.growth_theta > 0.0
                                  ? cfg.growth_theta
                                  : default_growth_theta(data, theta_max, cfg);
  const bool estimate = cfg.nugget_mode == NuggetMode::estimate;
  const double growth_eta = estimate ? cfg.nugget_start : kJitter;
  const Lengthscales gtheta = Lengthscales::isotropic(growth_theta, d);

  std::vector<Eigen::Index> design;
  design.reserve(static_cast<std::size_t>(n));

  if (N == n) {
    design = nearest_neighbors(data.X, center, N);
  } else {
    const Eigen::Index m = std::min<Eigen::Index>(cfg.n_cand, N - n0);
    const auto nn = nearest_neighbors(data.X, center, n0 + m);
    design.assign(nn.begin(), nn.begin() + n0);
    const std::vector<Eigen::Index> cand(nn.begin() + n0, nn.end());
    if (trace)
      trace->pool = cand;

    const Design Xs = gather_rows(data.X, design);
    const Design Xc = gather_rows(data.X, cand);
    Eigen::LLT<Eigen::MatrixXd> llt(corr_matrix(Xs, gtheta, growth_eta));
    if (llt.info() != Eigen::Success)
      throw FactorizationError(
          "build_local_expert: seed design is singular; increase the nugget");

    // Row c of W holds L^{-1} k(X_design, x_c); it gains one column per pick.
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, n);
    W.leftCols(n0) =
        llt.matrixL().solve(cross_corr_matrix(Xs, Xc, gtheta)).transpose();
    Eigen::VectorXd wr = Eigen::VectorXd::Zero(n);
    wr.head(n0) = llt.matrixL().solve(cross_corr_vec(Xs, center, gtheta));

    Eigen::VectorXd s = W.leftCols(n0).rowwise().squaredNorm();
    Eigen::VectorXd t = W.leftCols(n0) * wr.head(n0);
    Eigen::VectorXd k_ref = cross_corr_vec(Xc, center, gtheta);
    std::vector<bool> used(static_cast<std::size_t>(m), false);

    if (trace)
      trace->center_variance.push_back(1.0 + growth_eta - wr.head(n0).squaredNorm());

    for (Eigen::Index cur = n0; cur < n; ++cur) {
      Eigen::Index best = -1;
      double best_val = -std::numeric_limits<double>::infinity();
      Eigen::Index first_unused = -1;
      for (Eigen::Index c = 0; c < m; ++c) {
        if (used[static_cast<std::size_t>(c)])
          continue;
        if (first_unused < 0)
          first_unused = c;
        const double v = 1.0 + growth_eta - s[c];
        if (v <= kDegenerateVariance)
          continue;
        const double cov = k_ref[c] - t[c];
        const double r = cov * cov / v;
        if (r > best_val) {
          best_val = r;
          best = c;
        }
      }
      if (best < 0)
        best = first_unused;

      const Eigen::VectorXd l = W.row(best).head(cur).transpose();
      const double diag =
          std::sqrt(std::max(1.0 + growth_eta - s[best], kDegenerateVariance));
      used[static_cast<std::size_t>(best)] = true;
      design.push_back(cand[static_cast<std::size_t>(best)]);

      const double wr_new = (k_ref[best] - wr.head(cur).dot(l)) / diag;
      wr[cur] = wr_new;
      const Point xb = row_span(Xc, best);
      for (Eigen::Index c = 0; c < m; ++c) {
        if (used[static_cast<std::size_t>(c)])
          continue;
        const double kc = sq_exp_corr(row_span(Xc, c), xb, gtheta);
        const double w = (kc - W.row(c).head(cur).dot(l)) / diag;
        W(c, cur) = w;
        s[c] += w * w;
        t[c] += w * wr_new;
      }
      if (trace)
        trace->center_variance.push_back(1.0 + growth_eta -
                                         wr.head(cur + 1).squaredNorm());
    }
  }

  const Design Xd = gather_rows(data.X, design);
  const Eigen::VectorXd yd = gather(data.y, design);

  MleOptions mle = cfg.mle;
  mle.isotropic = !cfg.separable;
  mle.estimate_nugget = estimate;
  const Nugget start_eta = estimate ? Nugget::value(growth_eta) : Nugget::jitter();
  const MleResult fit = mle_lengthscale(Xd, yd, start_eta, theta_max, mle, gtheta);
  const Nugget eta = estimate ? fit.eta : Nugget::jitter();
  const double tau2 = profile_tau2(Xd, yd, fit.theta, eta.eta);

  LocalExpert e{Eigen::Map<const Eigen::VectorXd>(center.data(), d),
                std::move(design),
                GpFit(Xd, yd, fit.theta, tau2, eta),
                0.0,
                fit.converged};
  e.mse = (e.fit.responses() - e.fit.smoothed_fit()).squaredNorm() /
          static_cast<double>(e.fit.size());
  return e;
}

MomentPrediction expert_predict(const LocalExpert &e, Point x) {
  return e.fit.predict(x);
}

} // namespace palm
