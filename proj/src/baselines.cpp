#include "palm/parallel.hpp"
#include "palm/random.hpp"
#include "palm/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace palm {

namespace {

Eigen::Index model_dim(const PalmModel &m) { return m.dim(); }
Eigen::Index model_dim(const GlobalPlusPalm &m) { return m.residual_model().dim(); }

template <class Model>
Predictions predict_rows(const Model &model, const Design &X) {
  if (X.cols() != model_dim(model))
    throw std::invalid_argument("predict_batch: dimension mismatch");
  Predictions out{Eigen::VectorXd(X.rows()), Eigen::VectorXd(X.rows())};
  parallel_for(static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto p = model.predict(row_span(X, ii));
    out.mean[ii] = p.mean;
    out.variance[ii] = p.variance;
  });
  return out;
}

// A GP on a subset of coded rows with the same hyperparameter treatment as
// a local expert.
GpFit fit_subset(const PalmContext &ctx, const std::vector<Eigen::Index> &idx) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Design X(m, ctx.data.dim());
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X.row(i) = ctx.data.X.row(idx[static_cast<std::size_t>(i)]);
    y[i] = ctx.data.y[idx[static_cast<std::size_t>(i)]];
  }
  const bool estimate = ctx.local.nugget_mode == NuggetMode::estimate;
  MleOptions mle = ctx.local.mle;
  mle.isotropic = !ctx.local.separable;
  mle.estimate_nugget = estimate;
  const Nugget start_eta =
      estimate ? Nugget::value(ctx.local.nugget_start) : Nugget::jitter();
  const MleResult r =
      mle_lengthscale(X, y, start_eta, ctx.theta_max, mle,
                      Lengthscales::isotropic(ctx.local.growth_theta, ctx.data.dim()));
  const Nugget eta = estimate ? r.eta : Nugget::jitter();
  const double tau2 = profile_tau2(X, y, r.theta, eta.eta);
  return GpFit(std::move(X), std::move(y), r.theta, tau2, eta);
}

} // namespace

Predictions predict_batch(const PalmModel &model, const Design &X) {
  return predict_rows(model, X);
}

Predictions predict_batch(const GlobalPlusPalm &model, const Design &X) {
  return predict_rows(model, X);
}

Predictions baseline_transductive_lagp(const TrainingSet &data,
                                       const Design &X_test,
                                       const PalmConfig &cfg) {
  if (X_test.cols() != data.dim())
    throw std::invalid_argument("baseline_transductive_lagp: dimension mismatch");
  const PalmContext ctx = prepare_palm(data, cfg);
  const Design U = ctx.coding.code(X_test);
  Predictions out{Eigen::VectorXd(U.rows()), Eigen::VectorXd(U.rows())};
  parallel_for(static_cast<std::size_t>(U.rows()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Point u = row_span(U, ii);
    const LocalExpert e = build_local_expert(ctx.data, u, ctx.local, ctx.theta_max);
    const MomentPrediction p = expert_predict(e, u);
    out.mean[ii] = p.mean;
    out.variance[ii] = p.variance;
  });
  return out;
}

Predictions baseline_partition_gp(const TrainingSet &data,
                                  Eigen::Index cells_per_dim,
                                  const Design &X_test, const PalmConfig &cfg,
                                  Eigen::Index max_cell_size,
                                  std::uint64_t seed) {
  if (cells_per_dim < 1)
    throw std::invalid_argument("baseline_partition_gp: need at least one cell");
  if (X_test.cols() != data.dim())
    throw std::invalid_argument("baseline_partition_gp: dimension mismatch");
  const PalmContext ctx = prepare_palm(data, cfg);
  const Eigen::Index d = ctx.data.dim();
  Eigen::Index cells = 1;
  for (Eigen::Index l = 0; l < d; ++l)
    cells *= cells_per_dim;

  const auto cell_of = [&](Point u) {
    Eigen::Index c = 0;
    for (Eigen::Index l = 0; l < d; ++l) {
      const double s = std::floor(u[static_cast<std::size_t>(l)] *
                                  static_cast<double>(cells_per_dim));
      const auto j = static_cast<Eigen::Index>(
          std::clamp(s, 0.0, static_cast<double>(cells_per_dim - 1)));
      c = c * cells_per_dim + j;
    }
    return c;
  };

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(cells));
  for (Eigen::Index i = 0; i < ctx.data.size(); ++i)
    members[static_cast<std::size_t>(cell_of(row_span(ctx.data.X, i)))].push_back(i);

  std::vector<std::optional<GpFit>> fits(members.size());
  parallel_for(members.size(), [&](std::size_t c) {
    auto idx = members[c];
    if (idx.size() < 2)
      throw std::runtime_error("baseline_partition_gp: a cell holds fewer than two points");
    if (static_cast<Eigen::Index>(idx.size()) > max_cell_size) {
      std::vector<Eigen::Index> sub;
      std::mt19937_64 rng(derive_seed(seed, c));
      std::sample(idx.begin(), idx.end(), std::back_inserter(sub), max_cell_size, rng);
      idx = std::move(sub);
    }
    fits[c] = fit_subset(ctx, idx);
  });

  const Design U = ctx.coding.code(X_test);
  Predictions out{Eigen::VectorXd(U.rows()), Eigen::VectorXd(U.rows())};
  parallel_for(static_cast<std::size_t>(U.rows()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Point u = row_span(U, ii);
    const MomentPrediction p =
        fits[static_cast<std::size_t>(cell_of(u))]->predict(u);
    out.mean[ii] = p.mean;
    out.variance[ii] = p.variance;
  });
  return out;
}

Predictions baseline_model_average(const TrainingSet &data, Eigen::Index K,
                                   Eigen::Index subset_size,
                                   const Design &X_test, const PalmConfig &cfg,
                                   std::uint64_t seed) {
  if (K < 1 || subset_size < 2)
    throw std::invalid_argument("baseline_model_average: need K >= 1, subset_size >= 2");
  if (K * subset_size > data.size())
    throw std::invalid_argument("baseline_model_average: K * subset_size exceeds N");
  if (X_test.cols() != data.dim())
    throw std::invalid_argument("baseline_model_average: dimension mismatch");
  const PalmContext ctx = prepare_palm(data, cfg);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(ctx.data.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::optional<GpFit>> fits(static_cast<std::size_t>(K));
  parallel_for(fits.size(), [&](std::size_t k) {
    const auto b = perm.begin() + static_cast<std::ptrdiff_t>(k) * subset_size;
    fits[k] = fit_subset(ctx, std::vector<Eigen::Index>(b, b + subset_size));
  });

  const Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(K, K);
  const Design U = ctx.coding.code(X_test);
  Predictions out{Eigen::VectorXd(U.rows()), Eigen::VectorXd(U.rows())};
  parallel_for(static_cast<std::size_t>(U.rows()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Point u = row_span(U, ii);
    std::vector<MomentPrediction> preds(static_cast<std::size_t>(K));
    Eigen::VectorXd s2(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      auto &p = preds[static_cast<std::size_t>(k)];
      p = fits[static_cast<std::size_t>(k)]->predict(u);
      p.variance = std::max(p.variance, std::numeric_limits<double>::min());
      s2[k] = p.variance;
    }
    const MomentPrediction agg = aggregate(preds, weights(s2, 1.0), rho);
    out.mean[ii] = agg.mean;
    out.variance[ii] = agg.variance;
  });
  return out;
}

} // namespace palm
