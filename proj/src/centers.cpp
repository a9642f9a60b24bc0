#include "palm/centers.hpp"
#include "palm/optimize.hpp"
#include "palm/parallel.hpp"
#include "palm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace palm {

void CenterSet::add(const Eigen::VectorXd &c, SelectionMode mode) {
  if (C.rows() > 0 && c.size() != C.cols())
    throw std::invalid_argument("CenterSet: dimension mismatch");
  if (!((c.array() >= 0.0).all() && (c.array() <= 1.0).all()))
    throw std::invalid_argument("CenterSet: center outside the unit cube");
  for (Eigen::Index k = 0; k < C.rows(); ++k)
    if (C.row(k) == c.transpose())
      throw std::invalid_argument("CenterSet: duplicate center");
  Design grown(C.rows() + 1, c.size());
  if (C.rows() > 0)
    grown.topRows(C.rows()) = C;
  grown.row(C.rows()) = c.transpose();
  C = std::move(grown);
  history.emplace_back(c, mode);
}

namespace {

double boundary_distance(const double *x, Eigen::Index d) {
  double b = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < d; ++l)
    b = std::min({b, x[l], 1.0 - x[l]});
  return b;
}

double distance(const double *a, const double *b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < d; ++l) {
    const double diff = a[l] - b[l];
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Criterion terms involving row i placed at x: distances to the other rows
// and, with buffer, twice the boundary distance.
void row_terms(const Design &C, Eigen::Index i, const double *x, bool buffer,
               std::vector<double> &out) {
  out.clear();
  const Eigen::Index d = C.cols();
  for (Eigen::Index j = 0; j < C.rows(); ++j)
    if (j != i)
      out.push_back(distance(x, C.row(j).data(), d));
  if (buffer)
    out.push_back(2.0 * boundary_distance(x, d));
}

double min_of(const std::vector<double> &v) {
  return v.empty() ? std::numeric_limits<double>::infinity()
                   : *std::min_element(v.begin(), v.end());
}

// sum (t / r)^-q, with every term at least r so nothing overflows.
double surrogate(const std::vector<double> &terms, double r, double q) {
  double s = 0.0;
  for (double t : terms)
    s += std::pow(r / t, q);
  return s;
}

} // namespace

double maximin_objective(const Design &C, bool buffer) {
  const Eigen::Index K = C.rows();
  const Eigen::Index d = C.cols();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = 0; j < i; ++j)
      best = std::min(best, distance(C.row(i).data(), C.row(j).data(), d));
    if (buffer)
      best = std::min(best, 2.0 * boundary_distance(C.row(i).data(), d));
  }
  return best;
}

CenterSet maximin_centers(Eigen::Index K, Eigen::Index d, std::uint64_t seed,
                          const MaximinOptions &options) {
  if (K < 1 || d < 1)
    throw std::invalid_argument("maximin_centers: need K >= 1 and d >= 1");
  if (!(options.initial_step > 0.0) || !(options.final_step > 0.0))
    throw std::invalid_argument("maximin_centers: steps must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Design C(K, d);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index l = 0; l < d; ++l)
      C(i, l) = unif(rng);

  const int T = options.iterations > 0
                    ? options.iterations
                    : static_cast<int>(std::max<Eigen::Index>(2000, 400 * K));
  // The last stretch ranks proposals by the exact criterion of the moved row.
  const int exact_from = T - T / 4;
  const double ratio = options.final_step / options.initial_step;
  std::uniform_int_distribution<Eigen::Index> pick(0, K - 1);
  std::vector<double> old_terms, new_terms;
  Eigen::VectorXd x(d);

  // Each phase shrinks the step from initial_step to final_step.
  const auto step_at = [&](int t) {
    const int begin = t < exact_from ? 0 : exact_from;
    const int len = (t < exact_from ? exact_from : T) - begin;
    const double frac = len > 1 ? static_cast<double>(t - begin) / (len - 1) : 1.0;
    return options.initial_step * std::pow(ratio, frac);
  };

  for (int t = 0; t < T; ++t) {
    const double step = step_at(t);
    const Eigen::Index i = pick(rng);
    for (Eigen::Index l = 0; l < d; ++l)
      x[l] = std::clamp(C(i, l) + step * normal(rng), 0.0, 1.0);

    row_terms(C, i, C.row(i).data(), options.buffer, old_terms);
    if (old_terms.empty())
      break;
    row_terms(C, i, x.data(), options.buffer, new_terms);
    const double old_min = min_of(old_terms);
    const double new_min = min_of(new_terms);

    bool accept = false;
    if (new_min <= 0.0) {
      accept = false;
    } else if (old_min <= 0.0) {
      accept = true;
    } else {
      const double r = std::min(old_min, new_min);
      const bool better_smooth = surrogate(new_terms, r, options.q) <
                                 surrogate(old_terms, r, options.q);
      accept = t < exact_from
                   ? better_smooth
                   : new_min > old_min || (new_min == old_min && better_smooth);
    }
    if (accept)
      C.row(i) = x.transpose();
  }

  CenterSet out;
  for (Eigen::Index i = 0; i < K; ++i)
    out.add(C.row(i).transpose(), SelectionMode::spacefill);
  return out;
}

namespace {

double sq_dist_rows(const Design &P, Eigen::Index i, const Eigen::MatrixXd &M,
                    Eigen::Index k) {
  return (P.row(i) - M.row(k)).squaredNorm();
}

} // namespace

KMeansResult kmeans(const Design &points, Eigen::Index k, std::uint64_t seed,
                    int max_iter) {
  const Eigen::Index M = points.rows();
  const Eigen::Index q = points.cols();
  if (k < 1 || k > M)
    throw std::invalid_argument("kmeans: need 1 <= k <= number of points");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd cent(k, q);

  // k-means++ seeding.
  std::vector<bool> chosen(static_cast<std::size_t>(M), false);
  std::uniform_int_distribution<Eigen::Index> first(0, M - 1);
  Eigen::Index c0 = first(rng);
  chosen[static_cast<std::size_t>(c0)] = true;
  cent.row(0) = points.row(c0);
  std::vector<double> d2(static_cast<std::size_t>(M));
  for (Eigen::Index i = 0; i < M; ++i)
    d2[static_cast<std::size_t>(i)] = sq_dist_rows(points, i, cent, 0);
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index next = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < M; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (d2[static_cast<std::size_t>(i)] > 0.0 && acc >= target) {
          next = i;
          break;
        }
      }
      if (next < 0)
        for (Eigen::Index i = M - 1; i >= 0 && next < 0; --i)
          if (d2[static_cast<std::size_t>(i)] > 0.0)
            next = i;
    } else {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < M; ++i)
        if (!chosen[static_cast<std::size_t>(i)])
          free.push_back(i);
      std::uniform_int_distribution<std::size_t> u(0, free.size() - 1);
      next = free[u(rng)];
    }
    chosen[static_cast<std::size_t>(next)] = true;
    cent.row(c) = points.row(next);
    for (Eigen::Index i = 0; i < M; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(
          d2[static_cast<std::size_t>(i)], sq_dist_rows(points, i, cent, c));
  }

  KMeansResult res;
  res.assignment.assign(static_cast<std::size_t>(M), -1);
  std::vector<double> own(static_cast<std::size_t>(M));

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
      Eigen::Index best = 0;
      double best_d = sq_dist_rows(points, i, cent, 0);
      for (Eigen::Index c = 1; c < k; ++c) {
        const double dc = sq_dist_rows(points, i, cent, c);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      auto &a = res.assignment[static_cast<std::size_t>(i)];
      changed = changed || a != best;
      a = best;
      own[static_cast<std::size_t>(i)] = best_d;
      ss += best_d;
    }
    res.objective_trace.push_back(ss);
    if (!changed)
      break;

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, q);
    std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < M; ++i) {
      const auto a = res.assignment[static_cast<std::size_t>(i)];
      sum.row(a) += points.row(i);
      ++count[static_cast<std::size_t>(a)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) {
        cent.row(c) = sum.row(c) / static_cast<double>(count[static_cast<std::size_t>(c)]);
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < M; ++i) {
        const auto a = res.assignment[static_cast<std::size_t>(i)];
        if (count[static_cast<std::size_t>(a)] < 2)
          continue;
        if (far < 0 || own[static_cast<std::size_t>(i)] > own[static_cast<std::size_t>(far)])
          far = i;
      }
      if (far < 0)
        throw std::logic_error("kmeans: no point available to re-seed a cluster");
      --count[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = c;
      count[static_cast<std::size_t>(c)] = 1;
      own[static_cast<std::size_t>(far)] = 0.0;
      cent.row(c) = points.row(far);
    }
  }

  res.members.assign(static_cast<std::size_t>(k), {});
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, q);
  for (Eigen::Index i = 0; i < M; ++i) {
    const auto a = res.assignment[static_cast<std::size_t>(i)];
    res.members[static_cast<std::size_t>(a)].push_back(i);
    sum.row(a) += points.row(i);
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto &m = res.members[static_cast<std::size_t>(c)];
    if (!m.empty())
      cent.row(c) = sum.row(c) / static_cast<double>(m.size());
  }
  res.within_ss = 0.0;
  for (Eigen::Index i = 0; i < M; ++i)
    res.within_ss +=
        sq_dist_rows(points, i, cent, res.assignment[static_cast<std::size_t>(i)]);
  res.centroids = std::move(cent);
  return res;
}

double min_distance(const Eigen::VectorXd &c, const Design &Z) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    best = std::min(best, (Z.row(i).transpose() - c).norm());
  return best;
}

Design augment_with_corners(const Design &C, const Eigen::VectorXd &lo,
                            const Eigen::VectorXd &hi, std::uint64_t seed) {
  const Eigen::Index d = lo.size();
  constexpr Eigen::Index kMaxCorners = 1024;
  if (d > 64)
    throw std::invalid_argument("augment_with_corners: at most 64 dimensions");
  std::vector<std::uint64_t> masks;
  if (d <= 10) {
    masks.resize(std::size_t{1} << d);
    std::iota(masks.begin(), masks.end(), std::uint64_t{0});
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> bit(0, 1);
    std::set<std::uint64_t> seen;
    while (static_cast<Eigen::Index>(masks.size()) < kMaxCorners) {
      std::uint64_t mask = 0;
      for (Eigen::Index l = 0; l < d; ++l)
        mask |= static_cast<std::uint64_t>(bit(rng)) << l;
      if (seen.insert(mask).second)
        masks.push_back(mask);
    }
  }
  Design Z(C.rows() + static_cast<Eigen::Index>(masks.size()), d);
  if (C.rows() > 0)
    Z.topRows(C.rows()) = C;
  for (std::size_t m = 0; m < masks.size(); ++m)
    for (Eigen::Index l = 0; l < d; ++l)
      Z(C.rows() + static_cast<Eigen::Index>(m), l) =
          (masks[m] >> l) & 1U ? hi[l] : lo[l];
  return Z;
}

namespace {

// Smallest positive gap between distinct coordinate values per column.
Eigen::VectorXd grid_spacing(const Design &X) {
  Eigen::VectorXd g(X.cols());
  for (Eigen::Index l = 0; l < X.cols(); ++l) {
    std::vector<double> v(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      v[static_cast<std::size_t>(i)] = X(i, l);
    std::sort(v.begin(), v.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[i - 1])
        gap = std::min(gap, v[i] - v[i - 1]);
    g[l] = std::isfinite(gap) ? gap : 1e-3;
  }
  return g;
}

// Fraction of the box width trimmed from each side so that the optimizer's
// clamped iterates stay strictly inside the cluster box.
constexpr double kInteriorMargin = 1e-6;

} // namespace

NextCenter select_next_center(const PalmModel &model, const CodedData &data,
                              const Design &centers,
                              const SequentialConfig &cfg, std::uint64_t seed) {
  if (cfg.multistarts < 1)
    throw std::invalid_argument("select_next_center: need at least one start");
  if (centers.cols() != data.dim())
    throw std::invalid_argument("select_next_center: dimension mismatch");
  const Eigen::Index N = data.size();
  const Eigen::Index d = data.dim();
  NextCenter out;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(N));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (cfg.max_prediction_points > 0 && cfg.max_prediction_points < N) {
    std::vector<Eigen::Index> sub;
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::sample(idx.begin(), idx.end(), std::back_inserter(sub),
                cfg.max_prediction_points, rng);
    idx = std::move(sub);
  }
  const auto M = static_cast<Eigen::Index>(idx.size());

  Eigen::VectorXd r(M);
  parallel_for(idx.size(), [&](std::size_t i) {
    const Eigen::Index row = idx[i];
    r[static_cast<Eigen::Index>(i)] =
        std::abs(data.y[row] - model.predict_coded(row_span(data.X, row)).mean);
  });

  const double rmin = r.minCoeff();
  const double rmax = r.maxCoeff();
  Design bound(M, d + 1);
  for (Eigen::Index i = 0; i < M; ++i) {
    bound.row(i).head(d) = data.X.row(idx[static_cast<std::size_t>(i)]);
    bound(i, d) = rmax > rmin ? (r[i] - rmin) / (rmax - rmin) : 0.0;
  }

  const Eigen::Index k = std::min<Eigen::Index>(std::max<Eigen::Index>(centers.rows(), 1), M);
  const KMeansResult km = kmeans(bound, k, derive_seed(seed, 1));

  Eigen::Index best_cluster = -1;
  double best_mean = -1.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto &members = km.members[static_cast<std::size_t>(c)];
    if (members.empty())
      continue;
    double s = 0.0;
    for (auto m : members)
      s += r[m];
    const double mean = s / static_cast<double>(members.size());
    if (mean > best_mean) {
      best_mean = mean;
      best_cluster = c;
    }
  }

  ResidualCluster cl;
  cl.mean_abs_residual = best_mean;
  cl.lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  cl.hi = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
  for (auto m : km.members[static_cast<std::size_t>(best_cluster)]) {
    const Eigen::Index row = idx[static_cast<std::size_t>(m)];
    cl.member_indices.push_back(row);
    cl.lo = cl.lo.cwiseMin(data.X.row(row).transpose());
    cl.hi = cl.hi.cwiseMax(data.X.row(row).transpose());
  }

  Eigen::VectorXd lo = cl.lo;
  Eigen::VectorXd hi = cl.hi;
  const Eigen::VectorXd spacing = grid_spacing(data.X);
  for (Eigen::Index l = 0; l < d; ++l) {
    if (hi[l] > lo[l])
      continue;
    lo[l] -= 0.5 * spacing[l];
    hi[l] += 0.5 * spacing[l];
    if (lo[l] < 0.0) {
      hi[l] -= lo[l];
      lo[l] = 0.0;
    }
    if (hi[l] > 1.0) {
      lo[l] = std::max(0.0, lo[l] - (hi[l] - 1.0));
      hi[l] = 1.0;
    }
  }
  const Design Z = augment_with_corners(centers, lo, hi, derive_seed(seed, 2));
  const Eigen::VectorXd margin = kInteriorMargin * (hi - lo);
  const BoxBounds box{lo + margin, hi - margin};

  std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(cfg.multistarts));
  {
    std::mt19937_64 rng(derive_seed(seed, 3));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto &s : starts) {
      s.resize(d);
      for (Eigen::Index l = 0; l < d; ++l)
        s[l] = box.lo[l] + u(rng) * (box.hi[l] - box.lo[l]);
    }
  }
  const Objective f = [&Z](const Eigen::VectorXd &c) { return min_distance(c, Z); };
  std::vector<OptimResult> results(starts.size());
  parallel_for(starts.size(), [&](std::size_t s) {
    results[s] = maximize_nelder_mead(f, starts[s], box, cfg.eval_budget);
  });

  out.start_values.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    out.start_values.push_back(f(starts[s]));
    out.end_values.push_back(results[s].value);
    out.end_points.push_back(results[s].x);
    if (results[s].value > out.end_values[static_cast<std::size_t>(out.best_start)])
      out.best_start = static_cast<Eigen::Index>(s);
  }
  out.center = results[static_cast<std::size_t>(out.best_start)].x;
  out.residuals = std::move(r);
  out.residual_indices = std::move(idx);
  out.cluster = std::move(cl);
  out.search_lo = box.lo;
  out.search_hi = box.hi;
  return out;
}

SequentialResult sequential_palm(const TrainingSet &data, Eigen::Index K_init,
                                 Eigen::Index K_final, const PalmConfig &cfg,
                                 const SequentialConfig &scfg,
                                 std::uint64_t seed,
                                 const MaximinOptions &maximin,
                                 const SequentialObserver &observer) {
  if (K_init < 1 || K_init > K_final)
    throw std::invalid_argument("sequential_palm: need 1 <= K_init <= K_final");
  const PalmContext ctx = prepare_palm(data, cfg);
  CenterSet centers = maximin_centers(K_init, data.dim(), derive_seed(seed, 0), maximin);
  std::vector<LocalExpert> provisional = build_experts(ctx, centers.C);
  PalmModel model = assemble_palm(provisional, ctx, cfg);
  if (observer)
    observer(model, centers);

  std::vector<NextCenter> steps;
  for (Eigen::Index K = K_init; K < K_final; ++K) {
    NextCenter next = select_next_center(model, ctx.data, centers.C, scfg,
                                         derive_seed(seed, static_cast<std::uint64_t>(K)));
    centers.add(next.center, SelectionMode::sequential);
    Design one(1, data.dim());
    one.row(0) = next.center.transpose();
    provisional.push_back(std::move(build_experts(ctx, one).front()));
    model = assemble_palm(provisional, ctx, cfg);
    steps.push_back(std::move(next));
    if (observer)
      observer(model, centers);
  }
  return {std::move(model), std::move(centers), std::move(steps)};
}

} // namespace palm
