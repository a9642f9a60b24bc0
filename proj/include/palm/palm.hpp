#pragma once

#include "palm/data.hpp"
#include "palm/lagp.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace palm {

/// Floor applied to the empirical response variance.
inline constexpr double kS2Floor = 1e-12;

/// How per-expert in-sample MSEs are pooled into the shared noise level.
enum class MseNormalization {
  mean_over_experts, ///< (1/K) sum_k mse_k
  per_design_size,   ///< sum_k mse_k / n_k
};

struct PalmConfig {
  LocalConfig local{};
  /// Weight power; unset means default_power(d, K).
  std::optional<double> power;
  MseNormalization mse_normalization = MseNormalization::mean_over_experts;
  /// Subset fits bounding the expert lengthscales. subset_size is reduced to
  /// N when the corpus is smaller.
  CapOptions cap{};
  /// Skips the subset fits when set.
  std::optional<Lengthscales> theta_max;
};

struct PalmPrediction {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::VectorXd weights;
};

/// w_k = phi_k^p / sum_l phi_l^p with phi_k = 1 / sigma2_k, evaluated in log
/// space. p = 1 uses the plain precision ratio directly.
Eigen::VectorXd weights(const Eigen::VectorXd &sigma2s, double p);

/// log_d K, with base 2 when d = 1.
double default_power(Eigen::Index d, Eigen::Index K);

/// k(x)^T K^{-1} k(x) against the expert's design.
double predictive_kernel(const LocalExpert &e, Point x);

/// Largest predictive kernel of either expert over the other's design
/// points, clamped to [0, 1].
double estimate_rho(const LocalExpert &ek, const LocalExpert &ej);

/// All pairs; unit diagonal.
Eigen::MatrixXd estimate_rho_matrix(const std::vector<LocalExpert> &experts);

/// s2 * K^2 / sum_kj rho_kj
double calibrate_tau2(double s2, const Eigen::MatrixXd &rho);

/// Sample variance with denominator N - 1.
double empirical_s2(const Eigen::VectorXd &y);

/// mse / tau2, with the pooled mse per `norm`; values under the jitter floor
/// become jitter.
Nugget pooled_nugget(const std::vector<LocalExpert> &experts, double tau2,
                     MseNormalization norm = MseNormalization::mean_over_experts);

/// Mean and variance aggregation for arbitrary nonnegative weights:
/// mean = sum w_k mu_k, variance = (w*sigma)^T rho (w*sigma).
MomentPrediction aggregate(const std::vector<MomentPrediction> &preds,
                           const Eigen::VectorXd &w, const Eigen::MatrixXd &rho);

/// K calibrated local experts sharing one amplitude and nugget, combined
/// with powered precision weights. Immutable once built.
class PalmModel {
public:
  PalmModel(std::vector<LocalExpert> experts, Eigen::MatrixXd rho, double tau2,
            Nugget eta, double power, double s2, CodingMap coding);

  /// x in natural units.
  PalmPrediction predict(Point x) const;
  /// u in unit-coded units.
  PalmPrediction predict_coded(Point u) const;

  Eigen::Index size() const { return static_cast<Eigen::Index>(experts_.size()); }
  Eigen::Index dim() const { return coding_.dim(); }
  const std::vector<LocalExpert> &experts() const { return experts_; }
  const Eigen::MatrixXd &rho() const { return rho_; }
  double tau2() const { return tau2_; }
  const Nugget &nugget() const { return eta_; }
  double power() const { return power_; }
  double s2() const { return s2_; }
  const CodingMap &coding() const { return coding_; }
  /// Coded expert centers, one per row.
  Design centers() const;
  /// Number of distinct training points used by any expert.
  Eigen::Index distinct_design_points() const;

private:
  std::vector<LocalExpert> experts_;
  Eigen::MatrixXd rho_;
  double tau2_;
  Nugget eta_;
  double power_;
  double s2_;
  CodingMap coding_;
};

/// Everything shared by the experts of one fit, computed once per corpus.
struct PalmContext {
  CodedData data;
  CodingMap coding;
  Lengthscales theta_max;
  LocalConfig local;
  double s2 = 0.0;
};

PalmContext prepare_palm(const TrainingSet &data, const PalmConfig &cfg);

/// Provisional experts (own profile amplitude, own nugget), one per coded
/// center row, built in parallel.
std::vector<LocalExpert> build_experts(const PalmContext &ctx,
                                       const Design &centers);

/// Correlations from the provisional fits, then the calibrated amplitude and
/// pooled nugget written into every expert.
PalmModel assemble_palm(const std::vector<LocalExpert> &provisional,
                        const PalmContext &ctx, const PalmConfig &cfg);

/// centers are unit-coded, one per row.
PalmModel fit_palm(const TrainingSet &data, const Design &centers,
                   const PalmConfig &cfg);

/// How the two-stage predictor reports variance.
enum class GlobalVariance {
  residual_only, ///< variance of the residual PALM
  additive,      ///< plus the global GP's predictive variance
};

struct GlobalPlusPalmConfig {
  Eigen::Index m_global = 1000;
  GlobalVariance variance = GlobalVariance::residual_only;
  std::uint64_t seed = 0;
  PalmConfig palm{};
};

/// A global GP on a random subsample plus a PALM fit to its residuals.
class GlobalPlusPalm {
public:
  GlobalPlusPalm(GpFit global, std::vector<Eigen::Index> global_indices,
                 PalmModel residual, GlobalVariance variance);

  MomentPrediction predict(Point x) const;
  MomentPrediction predict_coded(Point u) const;

  const GpFit &global() const { return global_; }
  const std::vector<Eigen::Index> &global_indices() const {
    return global_indices_;
  }
  const PalmModel &residual_model() const { return residual_; }
  GlobalVariance variance_mode() const { return variance_; }

private:
  GpFit global_;
  std::vector<Eigen::Index> global_indices_;
  PalmModel residual_;
  GlobalVariance variance_;
};

/// Residuals y - mu_global(x) over the whole corpus.
Eigen::VectorXd global_residuals(const GpFit &global, const CodedData &data);

/// Global GP on the given subset, separable lengthscales and (in estimate
/// mode) nugget by maximum likelihood, profiled amplitude.
GpFit fit_global_stage(const CodedData &data,
                       const std::vector<Eigen::Index> &indices,
                       const PalmConfig &cfg);

GlobalPlusPalm fit_global_plus_palm(const TrainingSet &data,
                                    const Design &centers,
                                    const GlobalPlusPalmConfig &cfg);

} // namespace palm
