#pragma once

#include "palm/palm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace palm {

enum class CenterMode { spacefill, sequential };
enum class ModelType { palm, global_plus_palm };
/// auto picks estimate when noise_sd > 0 and jitter otherwise.
enum class NuggetChoice { automatic, jitter, estimate };

/// Experiment settings read from a flat key=value file. Every field has a
/// key of the same name.
struct RunConfig {
  std::string function = "herbie";
  int dim = 3;            ///< michalewicz only
  int michalewicz_m = 10;
  int train_grid = 50;    ///< inclusive grid points per dimension
  int test_grid = 51;     ///< midpoint grid points per dimension
  double noise_sd = 0.0;
  bool test_noise = true; ///< add the same noise to test responses
  int K = 25;
  int n = 50;
  int n0 = 6;
  int n_cand = 1000;
  std::optional<double> power; ///< "auto" for log_d K
  bool separable = false;
  NuggetChoice nugget = NuggetChoice::automatic;
  MseNormalization mse_norm = MseNormalization::mean_over_experts;
  CenterMode center_mode = CenterMode::spacefill;
  int K_init = 5;
  int M_s = 10;
  int eval_budget = 200;
  int max_prediction_points = 0;
  ModelType model = ModelType::palm;
  int m_global = 1000;
  GlobalVariance global_variance = GlobalVariance::residual_only;
  int reps = 1;          ///< bench replicate seeds
  double slice_x2 = -0.104;
  double slice_step = 0.01;
  std::uint64_t seed = 0;
  int threads = 0;       ///< 0 defers to PALM_THREADS, then the hardware
  std::string out = ".";

  /// Throws on an unknown key or a malformed value.
  void set(const std::string &key, const std::string &value);
  /// Throws when a field is out of range.
  void validate() const;
  /// All keys, one `key = value` per line, in declaration order.
  std::string to_text() const;

  bool nugget_estimated() const;
  PalmConfig palm_config() const;
};

std::vector<std::string> run_config_keys();

/// Applies `key = value` lines from a file on top of `base`. Blank lines and
/// lines starting with '#' are skipped.
RunConfig load_run_config(const std::filesystem::path &path, RunConfig base = {});

/// Splits "key=value", trimming whitespace around both parts.
std::pair<std::string, std::string> split_assignment(const std::string &text);

/// flag, then the config's threads key, then PALM_THREADS, then 0 (hardware).
int resolve_threads(std::optional<int> flag, const RunConfig &cfg);

} // namespace palm
