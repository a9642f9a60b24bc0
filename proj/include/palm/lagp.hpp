#pragma once

#include "palm/data.hpp"
#include "palm/gp.hpp"

#include <vector>

namespace palm {

/// How the nugget of a local expert is chosen before pooling.
enum class NuggetMode {
  jitter,   ///< deterministic responses: fixed at kJitter
  estimate, ///< noisy responses: joint MLE with the lengthscale
};

struct LocalConfig {
  int n = 50;        ///< final local design size
  int n0 = 6;        ///< nearest-neighbour seed size
  int n_cand = 1000; ///< candidate pool: nearest neighbours beyond the seed
  bool separable = false;
  NuggetMode nugget_mode = NuggetMode::jitter;
  /// Nugget used while growing the design, and the MLE starting value in
  /// estimate mode. Ignored in jitter mode.
  double nugget_start = 0.01;
  /// Lengthscale used for ALC during design growth, and the MLE start.
  /// Values <= 0 mean: derive from the data.
  double growth_theta = 0.0;
  MleOptions mle{};
};

/// One GP expert anchored at a center. Coordinates are unit-coded.
struct LocalExpert {
  Eigen::VectorXd center;
  /// Indices into the training corpus; the first n0 are the nearest
  /// neighbours of the center in distance order, the rest are ALC picks in
  /// the order they were chosen.
  std::vector<Eigen::Index> design_indices;
  GpFit fit;
  /// In-sample mean squared error of the smoothed fit.
  double mse = 0.0;
  bool mle_converged = true;
};

/// Indices of the m rows closest to x in Euclidean distance, nearest first;
/// ties go to the lower index.
std::vector<Eigen::Index> nearest_neighbors(const Design &X, Point x,
                                            Eigen::Index m);

struct AlcResult {
  double reduction = 0.0;
  /// The candidate is numerically a duplicate of a design point.
  bool degenerate = false;
};

/// Decrease in predictive variance at `ref` from adding `candidate` to the
/// fit's design, via the partitioned inverse of the grown correlation
/// matrix: tau2 * (k(ref,c) - k_ref^T K^{-1} k_c)^2 / (1 + eta - k_c^T K^{-1} k_c).
AlcResult alc_reduction(const GpFit &fit, Point candidate, Point ref);

/// Per-step diagnostics of the greedy design growth.
struct LocalBuildTrace {
  /// Predictive variance at the center (unit amplitude, growth
  /// hyperparameters) after the seed and after every greedy pick.
  std::vector<double> center_variance;
  /// Pool positions of the candidates, nearest first.
  std::vector<Eigen::Index> pool;
};

/// Seeds the design with the n0 nearest neighbours of `center`, grows it to
/// cfg.n by greedy ALC at the center over the candidate pool, then fits
/// lengthscales (and, in estimate mode, the nugget) by maximum likelihood
/// with lengthscales capped at `theta_max`; the amplitude is profiled.
LocalExpert build_local_expert(const CodedData &data, Point center,
                               const LocalConfig &cfg,
                               const Lengthscales &theta_max,
                               LocalBuildTrace *trace = nullptr);

/// `fit` already carries whatever amplitude and nugget the caller assigned.
MomentPrediction expert_predict(const LocalExpert &e, Point x);

/// The lengthscale used during growth when cfg.growth_theta is unset.
double default_growth_theta(const CodedData &data, const Lengthscales &theta_max,
                            const LocalConfig &cfg);

} // namespace palm
