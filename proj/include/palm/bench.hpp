#pragma once

#include "palm/centers.hpp"
#include "palm/run_config.hpp"
#include "palm/testbed.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace palm {

struct Dataset {
  Design X;
  Eigen::VectorXd y;
  /// Noise-free responses.
  Eigen::VectorXd truth;
};

struct GeneratedData {
  TestFunction fn;
  Dataset train;
  Dataset test;
};

/// Inclusive training grid and midpoint test grid over the function's
/// domain, with noise drawn from streams of `seed`.
GeneratedData generate_data(const RunConfig &cfg, std::uint64_t seed);

struct FittedModel {
  std::optional<PalmModel> palm;
  std::optional<GlobalPlusPalm> two_stage;
  CenterSet centers;

  Predictions predict(const Design &X) const;
  const PalmModel &local_model() const;
};

/// Centers by maximin or sequential selection per cfg.center_mode; with
/// model = global+palm the local stage is fitted to the global residuals.
FittedModel fit_from_config(const TrainingSet &data, const RunConfig &cfg,
                            std::uint64_t seed,
                            const SequentialObserver &observer = {});

/// Scenario names accepted by run_bench.
std::vector<std::string> bench_scenarios();

/// Settings of a named scenario; the caller layers file and flag values on
/// top. Throws for an unknown name.
RunConfig scenario_defaults(const std::string &scenario);

/// Header of metrics.csv.
inline constexpr const char *kMetricsHeader =
    "scenario,method,K,rep,rmse,mae,score,coverage_90";
/// Header of timing.csv.
inline constexpr const char *kTimingHeader =
    "scenario,method,K,rep,wall_time_fit,wall_time_predict";

/// Runs the scenario and writes metrics.csv, timing.csv and, depending on
/// the scenario, slice.csv and curve.csv into `out_dir`. Progress lines go
/// to `log` when given.
void run_bench(const std::string &scenario, const RunConfig &cfg,
               const std::filesystem::path &out_dir, std::ostream *log = nullptr);

} // namespace palm
