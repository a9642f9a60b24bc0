#include "palm/centers.hpp"
#include "palm/random.hpp"
#include "palm/testbed.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace palm;

namespace {

double min_pairwise(const Design &C) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      best = std::min(best, (C.row(i) - C.row(j)).norm());
  return best;
}

Design column(std::initializer_list<double> v) {
  Design X(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v)
    X(i++, 0) = x;
  return X;
}

// Flat unit-square corpus with one narrow bump at (0.8, 0.8).
TrainingSet blob_set() {
  const Design X = grid_design(30, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0));
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double dx = X(i, 0) - 0.8;
    const double dy = X(i, 1) - 0.8;
    y[i] = std::exp(-(dx * dx + dy * dy) / 0.005);
  }
  return TrainingSet(X, y);
}

Design blob_centers() {
  Design C(8, 2);
  C << 0.1, 0.1, 0.1, 0.4, 0.4, 0.1, 0.1, 0.7, 0.7, 0.1, 0.4, 0.4, 0.1, 0.95, 0.95, 0.1;
  return C;
}

struct BlobFixture {
  TrainingSet data = blob_set();
  Design centers = blob_centers();
  PalmModel model = fit_palm(data, centers, PalmConfig{});
  NextCenter next = select_next_center(model, data.coded(), centers, SequentialConfig{}, 3);
};

const BlobFixture &blob() {
  static const BlobFixture f;
  return f;
}

TrainingSet glee_set(Eigen::Index m, std::uint64_t seed) {
  const TestFunction fn = test_function("glee");
  const Design X = grid_design(m, fn.lo, fn.hi);
  return TrainingSet(X, add_noise(evaluate_function(fn, X), 0.01, seed));
}

} // namespace

TEST(MaximinObjective, Examples) {
  const Design two = column({0.25, 0.75});
  EXPECT_DOUBLE_EQ(maximin_objective(two, false), 0.5);
  EXPECT_DOUBLE_EQ(maximin_objective(two, true), 0.5);
  const Design edge = column({0.1, 0.9});
  EXPECT_NEAR(maximin_objective(edge, true), 0.2, 1e-15);
  EXPECT_TRUE(std::isinf(maximin_objective(column({0.3}), false)));
}

TEST(MaximinCenters, SingleCenterSitsInTheMiddle) {
  const CenterSet s = maximin_centers(1, 2, 0);
  ASSERT_EQ(s.size(), 1);
  EXPECT_NEAR(s.C(0, 0), 0.5, 1e-3);
  EXPECT_NEAR(s.C(0, 1), 0.5, 1e-3);
}

TEST(MaximinCenters, TwoCentersWithoutBufferGoToTheEnds) {
  MaximinOptions o;
  o.buffer = false;
  const CenterSet s = maximin_centers(2, 1, 4, o);
  const double lo = std::min(s.C(0, 0), s.C(1, 0));
  const double hi = std::max(s.C(0, 0), s.C(1, 0));
  EXPECT_NEAR(lo, 0.0, 1e-3);
  EXPECT_NEAR(hi, 1.0, 1e-3);
}

TEST(MaximinCenters, TwoCentersWithBufferAreSymmetric) {
  const CenterSet s = maximin_centers(2, 1, 4);
  const double lo = std::min(s.C(0, 0), s.C(1, 0));
  const double hi = std::max(s.C(0, 0), s.C(1, 0));
  EXPECT_NEAR(lo, 0.25, 1e-3);
  EXPECT_NEAR(hi, 0.75, 1e-3);
  EXPECT_NEAR(lo + hi, 1.0, 1e-3);
}

TEST(MaximinCenters, BeatsUniformRandomDesigns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CenterSet s = maximin_centers(100, 2, seed);
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Design R(100, 2);
    for (Eigen::Index i = 0; i < 100; ++i)
      R.row(i) << u(rng), u(rng);
    EXPECT_GE(min_pairwise(s.C), min_pairwise(R)) << "seed " << seed;
  }
}

TEST(MaximinCenters, InsideCubeDistinctAndTagged) {
  const CenterSet s = maximin_centers(30, 3, 9);
  ASSERT_EQ(s.size(), 30);
  ASSERT_EQ(s.history.size(), 30u);
  EXPECT_TRUE((s.C.array() >= 0.0).all() && (s.C.array() <= 1.0).all());
  EXPECT_GT(min_pairwise(s.C), 0.0);
  for (const auto &h : s.history)
    EXPECT_EQ(h.second, SelectionMode::spacefill);
}

TEST(MaximinCenters, DeterministicUnderSeed) {
  const CenterSet a = maximin_centers(20, 2, 42);
  const CenterSet b = maximin_centers(20, 2, 42);
  const CenterSet c = maximin_centers(20, 2, 43);
  EXPECT_TRUE(a.C == b.C);
  EXPECT_FALSE(a.C == c.C);
}

TEST(CenterSet, RejectsDuplicatesAndOutsidePoints) {
  CenterSet s = maximin_centers(2, 2, 1);
  const Eigen::VectorXd dup = s.C.row(0).transpose();
  EXPECT_THROW(s.add(dup, SelectionMode::sequential), std::invalid_argument);
  EXPECT_THROW(s.add(Eigen::Vector2d(1.5, 0.5), SelectionMode::sequential), std::invalid_argument);
  s.add(Eigen::Vector2d(0.1, 0.2), SelectionMode::sequential);
  EXPECT_EQ(s.size(), 3);
  EXPECT_EQ(s.history.back().second, SelectionMode::sequential);
}

TEST(KMeans, SeparatesTwoPairs) {
  const Design P = column({0.0, 0.1, 10.0, 10.1});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KMeansResult r = kmeans(P, 2, seed);
    EXPECT_EQ(r.assignment[0], r.assignment[1]);
    EXPECT_EQ(r.assignment[2], r.assignment[3]);
    EXPECT_NE(r.assignment[0], r.assignment[2]);
    EXPECT_NEAR(r.within_ss, 0.01, 1e-12);
  }
  // Brute force over the 2-partitions: the split above is the optimum.
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < 7; ++mask) {
    double ss = 0.0;
    for (int g = 0; g < 2; ++g) {
      double sum = 0.0;
      int n = 0;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == g) {
          sum += P(i, 0);
          ++n;
        }
      const double mean = sum / n;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == g)
          ss += (P(i, 0) - mean) * (P(i, 0) - mean);
    }
    best = std::min(best, ss);
  }
  EXPECT_NEAR(best, 0.01, 1e-12);
}

TEST(KMeans, AsManyClustersAsPointsGivesSingletons) {
  const Design P = column({0.3, 0.1, 0.9, 0.5, 0.7});
  const KMeansResult r = kmeans(P, 5, 1);
  std::set<Eigen::Index> labels(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(labels.size(), 5u);
  EXPECT_EQ(r.within_ss, 0.0);
}

TEST(KMeans, RejectsTooManyClusters) {
  EXPECT_THROW(kmeans(column({0.0, 1.0}), 3, 0), std::invalid_argument);
}

TEST(KMeansProperty, ObjectiveNonIncreasingAndClustersNonEmpty) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Design P(300, 3);
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      P.row(i) << z(rng) + 4.0 * (i % 4), z(rng), 0.3 * z(rng);
    const KMeansResult r = kmeans(P, 8, static_cast<std::uint64_t>(rep));
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-9);
    for (const auto &m : r.members)
      EXPECT_FALSE(m.empty());
    double ss = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      ss += (P.row(i) - r.centroids.row(r.assignment[static_cast<std::size_t>(i)])).squaredNorm();
    EXPECT_NEAR(ss, r.within_ss, 1e-9 * ss);
  }
}

TEST(MinDistance, NearestRow) {
  Design Z(3, 2);
  Z << 0.0, 0.0, 1.0, 0.0, 0.0, 2.0;
  EXPECT_NEAR(min_distance(Eigen::Vector2d(0.9, 0.0), Z), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(min_distance(Eigen::Vector2d(0.0, 1.5), Z), 0.5);
}

TEST(AugmentWithCorners, AppendsEveryCorner) {
  Design C(1, 2);
  C << 0.5, 0.5;
  const Design Z = augment_with_corners(C, Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.6), 0);
  ASSERT_EQ(Z.rows(), 5);
  EXPECT_TRUE(Z.row(0) == C.row(0));
  std::set<std::pair<double, double>> corners;
  for (Eigen::Index i = 1; i < 5; ++i)
    corners.insert({Z(i, 0), Z(i, 1)});
  const std::set<std::pair<double, double>> expected{{0.1, 0.2}, {0.1, 0.6}, {0.3, 0.2}, {0.3, 0.6}};
  EXPECT_EQ(corners, expected);
}

TEST(AugmentWithCorners, SubsamplesInHighDimension) {
  const Design C = Design::Zero(0, 12);
  const Design Z = augment_with_corners(C, Eigen::VectorXd::Zero(12), Eigen::VectorXd::Ones(12), 5);
  EXPECT_EQ(Z.rows(), 1024);
  std::set<std::vector<double>> distinct;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    distinct.insert(std::vector<double>(Z.row(i).data(), Z.row(i).data() + 12));
  EXPECT_EQ(distinct.size(), 1024u);
}

TEST(SelectNextCenter, IsolatedBlobGetsBoxMidpoint) {
  const NextCenter &n = blob().next;
  const Eigen::VectorXd mid = 0.5 * (n.search_lo + n.search_hi);
  const Eigen::VectorXd width = n.search_hi - n.search_lo;
  EXPECT_LT((n.center - mid).cwiseQuotient(width).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((n.center - Eigen::Vector2d(0.8, 0.8)).norm(), 0.05);
}

TEST(SelectNextCenter, OptimizerNeverWorsensAStart) {
  const NextCenter &n = blob().next;
  ASSERT_EQ(n.start_values.size(), 10u);
  for (std::size_t s = 0; s < n.start_values.size(); ++s)
    EXPECT_GE(n.end_values[s], n.start_values[s]);
}

TEST(SelectNextCenter, AcceptedStartIsBest) {
  const NextCenter &n = blob().next;
  const double accepted = n.end_values[static_cast<std::size_t>(n.best_start)];
  for (double v : n.end_values)
    EXPECT_GE(accepted, v);
  const Design Z = augment_with_corners(blob().centers, n.cluster.lo, n.cluster.hi, 0);
  EXPECT_NEAR(min_distance(n.center, Z), accepted, 1e-12);
}

TEST(SelectNextCenter, StrictlyInsideTheClusterBox) {
  const NextCenter &n = blob().next;
  EXPECT_TRUE((n.center.array() > n.cluster.lo.array()).all());
  EXPECT_TRUE((n.center.array() < n.cluster.hi.array()).all());
  for (Eigen::Index k = 0; k < blob().centers.rows(); ++k)
    EXPECT_GT((n.center.transpose() - blob().centers.row(k)).norm(), 0.0);
}

TEST(SelectNextCenter, ClusterBoxSpansItsMembers) {
  const NextCenter &n = blob().next;
  const CodedData coded = blob().data.coded();
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e300), hi = Eigen::Vector2d::Constant(-1e300);
  double s = 0.0;
  for (auto i : n.cluster.member_indices) {
    lo = lo.cwiseMin(coded.X.row(i).transpose());
    hi = hi.cwiseMax(coded.X.row(i).transpose());
  }
  for (std::size_t j = 0; j < n.residual_indices.size(); ++j)
    if (std::find(n.cluster.member_indices.begin(), n.cluster.member_indices.end(),
                  n.residual_indices[j]) != n.cluster.member_indices.end())
      s += n.residuals[static_cast<Eigen::Index>(j)];
  EXPECT_TRUE(lo == n.cluster.lo);
  EXPECT_TRUE(hi == n.cluster.hi);
  EXPECT_NEAR(s / static_cast<double>(n.cluster.member_indices.size()),
              n.cluster.mean_abs_residual, 1e-12);
}

TEST(SelectNextCenter, ResidualsMatchAnIndependentPass) {
  const NextCenter &n = blob().next;
  const TrainingSet &data = blob().data;
  ASSERT_EQ(n.residuals.size(), data.size());
  for (std::size_t j = 0; j < n.residual_indices.size(); ++j) {
    const Eigen::Index i = n.residual_indices[j];
    const double r = std::abs(data.y()[i] - blob().model.predict(row_span(data.X(), i)).mean);
    EXPECT_EQ(n.residuals[static_cast<Eigen::Index>(j)], r);
  }
}

TEST(SelectNextCenter, DeterministicUnderSeed) {
  const BlobFixture &f = blob();
  const NextCenter again =
      select_next_center(f.model, f.data.coded(), f.centers, SequentialConfig{}, 3);
  EXPECT_TRUE(again.center == f.next.center);
}

TEST(SequentialPalm, GrowsToTheRequestedSize) {
  const TrainingSet data = glee_set(30, 1);
  int calls = 0;
  const SequentialResult r = sequential_palm(
      data, 3, 6, PalmConfig{}, SequentialConfig{}, 7, {},
      [&](const PalmModel &m, const CenterSet &c) {
        EXPECT_EQ(m.size(), c.size());
        ++calls;
      });
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(r.model.size(), 6);
  EXPECT_EQ(r.centers.size(), 6);
  EXPECT_EQ(r.steps.size(), 3u);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(r.centers.history[i].second,
              i < 3 ? SelectionMode::spacefill : SelectionMode::sequential);
  EXPECT_TRUE(r.model.centers() == r.centers.C);
  EXPECT_DOUBLE_EQ(r.model.tau2(), calibrate_tau2(r.model.s2(), r.model.rho()));
  for (const auto &e : r.model.experts())
    EXPECT_EQ(e.fit.tau2(), r.model.tau2());
}

TEST(SequentialPalm, EqualSizesGiveSpaceFillingModel) {
  const TrainingSet data = glee_set(30, 2);
  const SequentialResult r = sequential_palm(data, 4, 4, PalmConfig{}, SequentialConfig{}, 3);
  EXPECT_TRUE(r.steps.empty());
  const PalmModel direct = fit_palm(data, maximin_centers(4, 2, derive_seed(3, 0)).C, PalmConfig{});
  EXPECT_TRUE(direct.centers() == r.model.centers());
  EXPECT_EQ(direct.tau2(), r.model.tau2());
}

TEST(SequentialPalm, RejectsShrinking) {
  const TrainingSet data = glee_set(30, 2);
  EXPECT_THROW(sequential_palm(data, 5, 4, PalmConfig{}, SequentialConfig{}, 0),
               std::invalid_argument);
}
