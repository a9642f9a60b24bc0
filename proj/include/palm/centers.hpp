#pragma once

#include "palm/palm.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace palm {

enum class SelectionMode { spacefill, sequential };

/// Expert centers in coded units, one per row, with the order and mode in
/// which they were chosen.
struct CenterSet {
  Design C;
  std::vector<std::pair<Eigen::VectorXd, SelectionMode>> history;

  Eigen::Index size() const { return C.rows(); }
  void add(const Eigen::VectorXd &c, SelectionMode mode);
};

struct MaximinOptions {
  /// Include twice the distance to the boundary of [0,1]^d in the criterion.
  bool buffer = true;
  /// Exchange proposals; 0 means max(2000, 400 K).
  int iterations = 0;
  /// Exponent of the smooth surrogate sum_ij d_ij^-q used to rank proposals.
  double q = 30.0;
  double initial_step = 0.2;
  double final_step = 1e-6;
};

/// Smallest pairwise distance, and with `buffer` twice each row's distance
/// to the boundary of [0,1]^d. Infinite for a single row without buffer.
double maximin_objective(const Design &C, bool buffer);

/// K points in [0,1]^d by stochastic exchange: one point at a time takes a
/// Gaussian step, clamped to the cube, kept when the surrogate improves.
CenterSet maximin_centers(Eigen::Index K, Eigen::Index d, std::uint64_t seed,
                          const MaximinOptions &options = {});

struct KMeansResult {
  std::vector<Eigen::Index> assignment;
  Eigen::MatrixXd centroids;
  std::vector<std::vector<Eigen::Index>> members;
  double within_ss = 0.0;
  /// Within-cluster sum of squares after every assignment pass.
  std::vector<double> objective_trace;
};

/// Lloyd iterations from k-means++ seeding, stopping at an assignment fixed
/// point or after max_iter passes. Empty clusters are re-seeded with the
/// point farthest from its centroid.
KMeansResult kmeans(const Design &points, Eigen::Index k, std::uint64_t seed,
                    int max_iter = 100);

struct ResidualCluster {
  std::vector<Eigen::Index> member_indices;
  double mean_abs_residual = 0.0;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct SequentialConfig {
  int multistarts = 10;
  int eval_budget = 200;
  /// Caps the residual prediction pass; 0 uses every training point.
  Eigen::Index max_prediction_points = 0;
};

struct NextCenter {
  Eigen::VectorXd center;
  /// |y - mu| at the points used for clustering.
  Eigen::VectorXd residuals;
  /// Training indices behind `residuals`.
  std::vector<Eigen::Index> residual_indices;
  ResidualCluster cluster;
  /// Box the search ran in, after inflation and shrinking.
  Eigen::VectorXd search_lo;
  Eigen::VectorXd search_hi;
  std::vector<double> start_values;
  std::vector<double> end_values;
  std::vector<Eigen::VectorXd> end_points;
  Eigen::Index best_start = 0;
};

/// Distance from c to the nearest row of Z.
double min_distance(const Eigen::VectorXd &c, const Design &Z);

/// Rows of C followed by the corners of [lo, hi]; past 10 dimensions the
/// corners are subsampled to 1024.
Design augment_with_corners(const Design &C, const Eigen::VectorXd &lo,
                            const Eigen::VectorXd &hi, std::uint64_t seed);

/// Clusters the inputs bound with scaled absolute residuals, takes the
/// cluster with the largest mean residual, and places a new center inside
/// its bounding box as far as possible from the existing centers and the
/// box corners.
NextCenter select_next_center(const PalmModel &model, const CodedData &data,
                              const Design &centers,
                              const SequentialConfig &cfg, std::uint64_t seed);

struct SequentialResult {
  PalmModel model;
  CenterSet centers;
  std::vector<NextCenter> steps;
};

/// Called after the seed model and after every addition.
using SequentialObserver =
    std::function<void(const PalmModel &, const CenterSet &)>;

/// A maximin seed model of K_init experts grown to K_final by
/// select_next_center, fully recalibrated after every addition.
SequentialResult sequential_palm(const TrainingSet &data, Eigen::Index K_init,
                                 Eigen::Index K_final, const PalmConfig &cfg,
                                 const SequentialConfig &scfg,
                                 std::uint64_t seed,
                                 const MaximinOptions &maximin = {},
                                 const SequentialObserver &observer = {});

} // namespace palm
