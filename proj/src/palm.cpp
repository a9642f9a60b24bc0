#include "palm/palm.hpp"
#include "palm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace palm {

Eigen::VectorXd weights(const Eigen::VectorXd &sigma2s, double p) {
  const Eigen::Index K = sigma2s.size();
  if (K < 1)
    throw std::invalid_argument("weights: empty variance vector");
  for (Eigen::Index k = 0; k < K; ++k)
    if (!(sigma2s[k] > 0.0) || !std::isfinite(sigma2s[k]))
      throw std::invalid_argument("weights: variances must be positive");

  if ((sigma2s.array() == sigma2s[0]).all())
    return Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));

  if (p == 1.0) {
    const Eigen::VectorXd phi = sigma2s.cwiseInverse();
    const double total = phi.sum();
    if (std::isfinite(total))
      return phi / total;
  }

  // log phi^p = -p log sigma2
  Eigen::VectorXd a = -p * sigma2s.array().log();
  a.array() -= a.maxCoeff();
  Eigen::VectorXd w = a.array().exp();
  return w / w.sum();
}

double default_power(Eigen::Index d, Eigen::Index K) {
  if (d < 1 || K < 1)
    throw std::invalid_argument("default_power: need d >= 1 and K >= 1");
  const double base = d == 1 ? 2.0 : static_cast<double>(d);
  return std::log(static_cast<double>(K)) / std::log(base);
}

double predictive_kernel(const LocalExpert &e, Point x) {
  return e.fit.predictive_kernel(x);
}

double estimate_rho(const LocalExpert &ek, const LocalExpert &ej) {
  double best = 0.0;
  const Design &Xj = ej.fit.design();
  for (Eigen::Index l = 0; l < Xj.rows(); ++l)
    best = std::max(best, predictive_kernel(ek, row_span(Xj, l)));
  const Design &Xk = ek.fit.design();
  for (Eigen::Index l = 0; l < Xk.rows(); ++l)
    best = std::max(best, predictive_kernel(ej, row_span(Xk, l)));
  return std::clamp(best, 0.0, 1.0);
}

Eigen::MatrixXd estimate_rho_matrix(const std::vector<LocalExpert> &experts) {
  const auto K = static_cast<Eigen::Index>(experts.size());
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(K, K);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < k; ++j)
      pairs.emplace_back(k, j);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [k, j] = pairs[i];
    values[i] = estimate_rho(experts[static_cast<std::size_t>(k)],
                             experts[static_cast<std::size_t>(j)]);
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [k, j] = pairs[i];
    rho(k, j) = values[i];
    rho(j, k) = values[i];
  }
  return rho;
}

double calibrate_tau2(double s2, const Eigen::MatrixXd &rho) {
  const double total = rho.sum();
  if (!(total > 0.0))
    throw std::invalid_argument("calibrate_tau2: correlation sum must be positive");
  const auto K = static_cast<double>(rho.rows());
  return s2 * K * K / total;
}

double empirical_s2(const Eigen::VectorXd &y) {
  if (y.size() < 2)
    throw std::invalid_argument("empirical_s2: need at least two responses");
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

Nugget pooled_nugget(const std::vector<LocalExpert> &experts, double tau2,
                     MseNormalization norm) {
  if (!(tau2 > 0.0))
    throw std::invalid_argument("pooled_nugget: tau2 must be positive");
  if (experts.empty())
    throw std::invalid_argument("pooled_nugget: no experts");
  double mse = 0.0;
  for (const auto &e : experts) {
    mse += norm == MseNormalization::per_design_size
               ? e.mse / static_cast<double>(e.fit.size())
               : e.mse;
  }
  if (norm == MseNormalization::mean_over_experts)
    mse /= static_cast<double>(experts.size());
  return Nugget::floored(mse / tau2);
}

MomentPrediction aggregate(const std::vector<MomentPrediction> &preds,
                           const Eigen::VectorXd &w, const Eigen::MatrixXd &rho) {
  const auto K = static_cast<Eigen::Index>(preds.size());
  if (w.size() != K || rho.rows() != K || rho.cols() != K)
    throw std::invalid_argument("aggregate: size mismatch");
  Eigen::VectorXd ws(K);
  MomentPrediction out;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto &p = preds[static_cast<std::size_t>(k)];
    out.mean += w[k] * p.mean;
    ws[k] = w[k] * std::sqrt(p.variance);
  }
  out.variance = std::max(0.0, ws.dot(rho * ws));
  return out;
}

PalmModel::PalmModel(std::vector<LocalExpert> experts, Eigen::MatrixXd rho,
                     double tau2, Nugget eta, double power, double s2,
                     CodingMap coding)
    : experts_(std::move(experts)), rho_(std::move(rho)), tau2_(tau2),
      eta_(eta), power_(power), s2_(s2), coding_(std::move(coding)) {
  const auto K = static_cast<Eigen::Index>(experts_.size());
  if (K < 1)
    throw std::invalid_argument("PalmModel: no experts");
  if (rho_.rows() != K || rho_.cols() != K)
    throw std::invalid_argument("PalmModel: rho must be K x K");
  if (!(tau2_ > 0.0))
    throw std::invalid_argument("PalmModel: tau2 must be positive");
  for (const auto &e : experts_)
    if (e.fit.dim() != coding_.dim())
      throw std::invalid_argument("PalmModel: expert dimension mismatch");
}

PalmPrediction PalmModel::predict(Point x) const {
  const Eigen::VectorXd u = coding_.code(x);
  return predict_coded(as_point(u));
}

PalmPrediction PalmModel::predict_coded(Point u) const {
  const auto K = size();
  std::vector<MomentPrediction> preds(static_cast<std::size_t>(K));
  Eigen::VectorXd sigma2(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    auto &p = preds[static_cast<std::size_t>(k)];
    p = expert_predict(experts_[static_cast<std::size_t>(k)], u);
    p.variance = std::max(p.variance, std::numeric_limits<double>::min());
    sigma2[k] = p.variance;
  }
  PalmPrediction out;
  out.weights = weights(sigma2, power_);
  const MomentPrediction agg = aggregate(preds, out.weights, rho_);
  out.mean = agg.mean;
  out.variance = agg.variance;
  return out;
}

Design PalmModel::centers() const {
  Design C(size(), dim());
  for (Eigen::Index k = 0; k < size(); ++k)
    C.row(k) = experts_[static_cast<std::size_t>(k)].center.transpose();
  return C;
}

Eigen::Index PalmModel::distinct_design_points() const {
  std::set<Eigen::Index> used;
  for (const auto &e : experts_)
    used.insert(e.design_indices.begin(), e.design_indices.end());
  return static_cast<Eigen::Index>(used.size());
}

PalmContext prepare_palm(const TrainingSet &data, const PalmConfig &cfg) {
  CodedData coded = data.coded();
  const bool estimate = cfg.local.nugget_mode == NuggetMode::estimate;

  std::optional<Lengthscales> cap = cfg.theta_max;
  if (!cap) {
    CapOptions co = cfg.cap;
    co.subset_size = static_cast<int>(
        std::min<Eigen::Index>(co.subset_size, coded.size()));
    co.estimate_nugget = estimate;
    co.eta = estimate ? Nugget::value(cfg.local.nugget_start) : Nugget::jitter();
    cap = lengthscale_cap(coded.X, coded.y, co);
  }

  LocalConfig local = cfg.local;
  if (!(local.growth_theta > 0.0))
    local.growth_theta = default_growth_theta(coded, *cap, local);

  const double s2 = std::max(empirical_s2(coded.y), kS2Floor);
  return PalmContext{std::move(coded), data.coding(), std::move(*cap), local, s2};
}

std::vector<LocalExpert> build_experts(const PalmContext &ctx,
                                       const Design &centers) {
  if (centers.cols() != ctx.data.dim())
    throw std::invalid_argument("build_experts: center dimension mismatch");
  std::vector<std::optional<LocalExpert>> slots(
      static_cast<std::size_t>(centers.rows()));
  parallel_for(slots.size(), [&](std::size_t k) {
    slots[k] = build_local_expert(ctx.data,
                                  row_span(centers, static_cast<Eigen::Index>(k)),
                                  ctx.local, ctx.theta_max);
  });
  std::vector<LocalExpert> out;
  out.reserve(slots.size());
  for (auto &s : slots)
    out.push_back(std::move(*s));
  return out;
}

PalmModel assemble_palm(const std::vector<LocalExpert> &provisional,
                        const PalmContext &ctx, const PalmConfig &cfg) {
  if (provisional.empty())
    throw std::invalid_argument("assemble_palm: need at least one expert");
  const auto K = static_cast<Eigen::Index>(provisional.size());
  Eigen::MatrixXd rho = estimate_rho_matrix(provisional);
  const double tau2 = calibrate_tau2(ctx.s2, rho);
  const Nugget eta = pooled_nugget(provisional, tau2, cfg.mse_normalization);

  std::vector<std::optional<LocalExpert>> slots(provisional.size());
  parallel_for(slots.size(), [&](std::size_t k) {
    LocalExpert e = provisional[k];
    e.fit = e.fit.with_amplitude(tau2, eta);
    slots[k] = std::move(e);
  });
  std::vector<LocalExpert> experts;
  experts.reserve(slots.size());
  for (auto &s : slots)
    experts.push_back(std::move(*s));

  const double p = cfg.power ? *cfg.power : default_power(ctx.data.dim(), K);
  return PalmModel(std::move(experts), std::move(rho), tau2, eta, p, ctx.s2,
                   ctx.coding);
}

PalmModel fit_palm(const TrainingSet &data, const Design &centers,
                   const PalmConfig &cfg) {
  if (centers.rows() < 1)
    throw std::invalid_argument("fit_palm: need at least one center");
  if (data.size() < cfg.local.n)
    throw std::invalid_argument("fit_palm: corpus smaller than local design");
  const PalmContext ctx = prepare_palm(data, cfg);
  return assemble_palm(build_experts(ctx, centers), ctx, cfg);
}

GlobalPlusPalm::GlobalPlusPalm(GpFit global,
                               std::vector<Eigen::Index> global_indices,
                               PalmModel residual, GlobalVariance variance)
    : global_(std::move(global)), global_indices_(std::move(global_indices)),
      residual_(std::move(residual)), variance_(variance) {}

MomentPrediction GlobalPlusPalm::predict(Point x) const {
  const Eigen::VectorXd u = residual_.coding().code(x);
  return predict_coded(as_point(u));
}

MomentPrediction GlobalPlusPalm::predict_coded(Point u) const {
  const MomentPrediction g = global_.predict(u);
  const PalmPrediction r = residual_.predict_coded(u);
  MomentPrediction out{g.mean + r.mean, r.variance};
  if (variance_ == GlobalVariance::additive)
    out.variance += g.variance;
  return out;
}

Eigen::VectorXd global_residuals(const GpFit &global, const CodedData &data) {
  Eigen::VectorXd r(data.size());
  parallel_for(static_cast<std::size_t>(data.size()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    r[ii] = data.y[ii] - global.predict(row_span(data.X, ii)).mean;
  });
  return r;
}

GpFit fit_global_stage(const CodedData &data,
                       const std::vector<Eigen::Index> &indices,
                       const PalmConfig &cfg) {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Design Xs(m, data.dim());
  Eigen::VectorXd ys(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Xs.row(i) = data.X.row(indices[static_cast<std::size_t>(i)]);
    ys[i] = data.y[indices[static_cast<std::size_t>(i)]];
  }
  const bool estimate = cfg.local.nugget_mode == NuggetMode::estimate;
  MleOptions mle = cfg.local.mle;
  mle.isotropic = false;
  mle.estimate_nugget = estimate;
  const Nugget start = estimate ? Nugget::value(cfg.local.nugget_start)
                                : Nugget::jitter();
  const auto upper =
      Lengthscales::isotropic(static_cast<double>(data.dim()), data.dim());
  const MleResult r = mle_lengthscale(Xs, ys, start, upper, mle);
  const Nugget eta = estimate ? r.eta : Nugget::jitter();
  const double tau2 = profile_tau2(Xs, ys, r.theta, eta.eta);
  return GpFit(std::move(Xs), std::move(ys), r.theta, tau2, eta);
}

GlobalPlusPalm fit_global_plus_palm(const TrainingSet &data,
                                    const Design &centers,
                                    const GlobalPlusPalmConfig &cfg) {
  const Eigen::Index N = data.size();
  if (cfg.m_global < 1 || cfg.m_global > N)
    throw std::invalid_argument("fit_global_plus_palm: m_global must be in [1, N]");
  std::vector<Eigen::Index> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<Eigen::Index> idx;
  std::mt19937_64 rng(cfg.seed);
  std::sample(all.begin(), all.end(), std::back_inserter(idx), cfg.m_global, rng);

  const CodedData coded = data.coded();
  GpFit global = fit_global_stage(coded, idx, cfg.palm);
  const Eigen::VectorXd resid = global_residuals(global, coded);
  PalmModel palm = fit_palm(data.with_responses(resid), centers, cfg.palm);
  return GlobalPlusPalm(std::move(global), std::move(idx), std::move(palm),
                        cfg.variance);
}

} // namespace palm
