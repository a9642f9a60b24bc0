#pragma once

#include "palm/palm.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace palm {

/// -prod_j g(x_j), g(z) = e^{-(z-1)^2} + e^{-0.8(z+1)^2} - 0.05 sin(8(z+0.1))
double herbies_tooth(Point x);
/// x1 exp(-x1^2 - x2^2)
double gramacy_lee_2d(Point x);
/// -sum_i sin(x_i) sin^{2m}(i x_i^2 / pi), i from 1.
double michalewicz(Point x, int m = 10);
double sine_wave(double x);

/// Full-factorial grid with inclusive endpoints; the last dimension varies
/// fastest. lo and hi give the per-dimension bounds.
Design grid_design(Eigen::Index points_per_dim, const Eigen::VectorXd &lo,
                   const Eigen::VectorXd &hi);

/// Cell-midpoint grid lo + (i + 1/2)(hi - lo)/m, i = 0..m-1, per dimension.
/// Used for shifted test sets.
Design midpoint_grid(Eigen::Index points_per_dim, const Eigen::VectorXd &lo,
                     const Eigen::VectorXd &hi);

/// y + iid N(0, sd^2).
Eigen::VectorXd add_noise(const Eigen::VectorXd &y, double sd,
                          std::uint64_t seed);

double rmse(const Eigen::VectorXd &y, const Eigen::VectorXd &mu);
double mae(const Eigen::VectorXd &y, const Eigen::VectorXd &mu);
/// Mean of -(y - mu)^2 / sigma2 - log sigma2; higher is better.
double score(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
             const Eigen::VectorXd &sigma2);
/// Fraction of y inside mu +- z sigma, z the two-sided normal quantile.
double coverage(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                const Eigen::VectorXd &sigma2, double level = 0.9);

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  double score = 0.0;
  double coverage_90 = 0.0;
  double wall_time_fit = 0.0;
  double wall_time_predict = 0.0;
};

MetricReport evaluate(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                      const Eigen::VectorXd &sigma2);

/// Means and variances at a batch of points.
struct Predictions {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Natural-unit inputs; parallel over rows.
Predictions predict_batch(const PalmModel &model, const Design &X);
Predictions predict_batch(const GlobalPlusPalm &model, const Design &X);

/// One local expert per test point (centered there), used only at that point.
/// Shares the lengthscale cap and growth lengthscale across points.
Predictions baseline_transductive_lagp(const TrainingSet &data,
                                       const Design &X_test,
                                       const PalmConfig &cfg);

/// Disjoint regular partition of the coded domain into cells_per_dim^d
/// cells, each with its own GP; a test point uses the GP of its cell.
/// Cells with more than max_cell_size points use a random subset.
Predictions baseline_partition_gp(const TrainingSet &data,
                                  Eigen::Index cells_per_dim,
                                  const Design &X_test, const PalmConfig &cfg,
                                  Eigen::Index max_cell_size = 400,
                                  std::uint64_t seed = 0);

/// K GPs on disjoint random subsets of subset_size points, combined with
/// plain precision weights and identity correlation.
Predictions baseline_model_average(const TrainingSet &data, Eigen::Index K,
                                   Eigen::Index subset_size,
                                   const Design &X_test, const PalmConfig &cfg,
                                   std::uint64_t seed);

/// A test surface by name: herbie, glee, michalewicz, sine.
struct TestFunction {
  std::string name;
  Eigen::Index dim = 0;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  std::function<double(Point)> f;
};

/// d is used by michalewicz only; the others have a fixed dimension.
TestFunction test_function(const std::string &name, Eigen::Index d = 0,
                           int michalewicz_m = 10);

Eigen::VectorXd evaluate_function(const TestFunction &fn, const Design &X);

} // namespace palm
