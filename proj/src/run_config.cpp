#include "palm/run_config.hpp"
#include "palm/data.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace palm {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value) {
  throw std::invalid_argument(fmt::format("config: bad value '{}' for {}", value, key));
}

template <class T> T parse_number(const std::string &key, const std::string &value) {
  T v{};
  const char *b = value.data();
  const char *e = b + value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    bad_value(key, value);
  return v;
}

bool parse_bool(const std::string &key, const std::string &value) {
  if (value == "true" || value == "1" || value == "yes")
    return true;
  if (value == "false" || value == "0" || value == "no")
    return false;
  bad_value(key, value);
}

const char *nugget_name(NuggetChoice n) {
  switch (n) {
  case NuggetChoice::jitter:
    return "jitter";
  case NuggetChoice::estimate:
    return "estimate";
  default:
    return "auto";
  }
}

const std::vector<std::string> kKeys = {
    "function", "dim", "michalewicz_m", "train_grid", "test_grid", "noise_sd",
    "test_noise", "K", "n", "n0", "n_cand", "power", "separable", "nugget",
    "mse_norm", "center_mode", "K_init", "M_s", "eval_budget",
    "max_prediction_points", "model", "m_global", "global_variance", "reps",
    "slice_x2", "slice_step", "seed", "threads", "out"};

} // namespace

std::vector<std::string> run_config_keys() { return kKeys; }

void RunConfig::set(const std::string &key, const std::string &raw) {
  const std::string value = trim(raw);
  if (key == "function") {
    function = value;
  } else if (key == "dim") {
    dim = parse_number<int>(key, value);
  } else if (key == "michalewicz_m") {
    michalewicz_m = parse_number<int>(key, value);
  } else if (key == "train_grid") {
    train_grid = parse_number<int>(key, value);
  } else if (key == "test_grid") {
    test_grid = parse_number<int>(key, value);
  } else if (key == "noise_sd") {
    noise_sd = parse_number<double>(key, value);
  } else if (key == "test_noise") {
    test_noise = parse_bool(key, value);
  } else if (key == "K") {
    K = parse_number<int>(key, value);
  } else if (key == "n") {
    n = parse_number<int>(key, value);
  } else if (key == "n0") {
    n0 = parse_number<int>(key, value);
  } else if (key == "n_cand") {
    n_cand = parse_number<int>(key, value);
  } else if (key == "power") {
    if (value == "auto")
      power.reset();
    else
      power = parse_number<double>(key, value);
  } else if (key == "separable") {
    separable = parse_bool(key, value);
  } else if (key == "nugget") {
    if (value == "auto")
      nugget = NuggetChoice::automatic;
    else if (value == "jitter")
      nugget = NuggetChoice::jitter;
    else if (value == "estimate")
      nugget = NuggetChoice::estimate;
    else
      bad_value(key, value);
  } else if (key == "mse_norm") {
    if (value == "mean")
      mse_norm = MseNormalization::mean_over_experts;
    else if (value == "per_design")
      mse_norm = MseNormalization::per_design_size;
    else
      bad_value(key, value);
  } else if (key == "center_mode") {
    if (value == "spacefill")
      center_mode = CenterMode::spacefill;
    else if (value == "sequential")
      center_mode = CenterMode::sequential;
    else
      bad_value(key, value);
  } else if (key == "K_init") {
    K_init = parse_number<int>(key, value);
  } else if (key == "M_s") {
    M_s = parse_number<int>(key, value);
  } else if (key == "eval_budget") {
    eval_budget = parse_number<int>(key, value);
  } else if (key == "max_prediction_points") {
    max_prediction_points = parse_number<int>(key, value);
  } else if (key == "model") {
    if (value == "palm")
      model = ModelType::palm;
    else if (value == "global+palm")
      model = ModelType::global_plus_palm;
    else
      bad_value(key, value);
  } else if (key == "m_global") {
    m_global = parse_number<int>(key, value);
  } else if (key == "global_variance") {
    if (value == "residual_only")
      global_variance = GlobalVariance::residual_only;
    else if (value == "additive")
      global_variance = GlobalVariance::additive;
    else
      bad_value(key, value);
  } else if (key == "reps") {
    reps = parse_number<int>(key, value);
  } else if (key == "slice_x2") {
    slice_x2 = parse_number<double>(key, value);
  } else if (key == "slice_step") {
    slice_step = parse_number<double>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "threads") {
    threads = parse_number<int>(key, value);
  } else if (key == "out") {
    if (value.empty())
      bad_value(key, value);
    out = value;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void RunConfig::validate() const {
  const auto need = [](bool ok, const char *msg) {
    if (!ok)
      throw std::invalid_argument(std::string("config: ") + msg);
  };
  need(function == "herbie" || function == "glee" || function == "michalewicz" ||
           function == "sine",
       "function must be herbie, glee, michalewicz or sine");
  need(dim >= 1 && dim <= 10, "dim must be in [1, 10]");
  need(michalewicz_m >= 1, "michalewicz_m must be at least 1");
  need(train_grid >= 2, "train_grid must be at least 2");
  need(test_grid >= 1, "test_grid must be at least 1");
  need(noise_sd >= 0.0, "noise_sd must be nonnegative");
  need(K >= 1, "K must be at least 1");
  need(n0 >= 1 && n0 <= n, "need 1 <= n0 <= n");
  need(n_cand >= 1, "n_cand must be at least 1");
  need(!power || *power > 0.0, "power must be positive");
  need(K_init >= 1, "K_init must be at least 1");
  need(center_mode == CenterMode::spacefill || K_init <= K,
       "sequential mode needs K_init <= K");
  need(M_s >= 1, "M_s must be at least 1");
  need(eval_budget >= 1, "eval_budget must be at least 1");
  need(max_prediction_points >= 0, "max_prediction_points must be nonnegative");
  need(m_global >= 1, "m_global must be at least 1");
  need(reps >= 1, "reps must be at least 1");
  need(slice_step > 0.0, "slice_step must be positive");
  need(threads >= 0, "threads must be nonnegative");
}

std::string RunConfig::to_text() const {
  std::string s;
  const auto add = [&s](const char *k, const std::string &v) {
    s += fmt::format("{} = {}\n", k, v);
  };
  add("function", function);
  add("dim", std::to_string(dim));
  add("michalewicz_m", std::to_string(michalewicz_m));
  add("train_grid", std::to_string(train_grid));
  add("test_grid", std::to_string(test_grid));
  add("noise_sd", format_double(noise_sd));
  add("test_noise", test_noise ? "true" : "false");
  add("K", std::to_string(K));
  add("n", std::to_string(n));
  add("n0", std::to_string(n0));
  add("n_cand", std::to_string(n_cand));
  add("power", power ? format_double(*power) : "auto");
  add("separable", separable ? "true" : "false");
  add("nugget", nugget_name(nugget));
  add("mse_norm", mse_norm == MseNormalization::mean_over_experts ? "mean" : "per_design");
  add("center_mode", center_mode == CenterMode::spacefill ? "spacefill" : "sequential");
  add("K_init", std::to_string(K_init));
  add("M_s", std::to_string(M_s));
  add("eval_budget", std::to_string(eval_budget));
  add("max_prediction_points", std::to_string(max_prediction_points));
  add("model", model == ModelType::palm ? "palm" : "global+palm");
  add("m_global", std::to_string(m_global));
  add("global_variance",
      global_variance == GlobalVariance::additive ? "additive" : "residual_only");
  add("reps", std::to_string(reps));
  add("slice_x2", format_double(slice_x2));
  add("slice_step", format_double(slice_step));
  add("seed", std::to_string(seed));
  add("threads", std::to_string(threads));
  add("out", out);
  return s;
}

bool RunConfig::nugget_estimated() const {
  return nugget == NuggetChoice::estimate ||
         (nugget == NuggetChoice::automatic && noise_sd > 0.0);
}

PalmConfig RunConfig::palm_config() const {
  PalmConfig c;
  c.local.n = n;
  c.local.n0 = n0;
  c.local.n_cand = n_cand;
  c.local.separable = separable;
  c.local.nugget_mode = nugget_estimated() ? NuggetMode::estimate : NuggetMode::jitter;
  c.power = power;
  c.mse_normalization = mse_norm;
  c.cap.seed = seed;
  return c;
}

std::pair<std::string, std::string> split_assignment(const std::string &text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: expected key=value, got '" + text + "'");
  std::string key = trim(text.substr(0, eq));
  if (key.empty())
    throw std::invalid_argument("config: empty key in '" + text + "'");
  return {std::move(key), trim(text.substr(eq + 1))};
}

RunConfig load_run_config(const std::filesystem::path &path, RunConfig base) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("config: cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    try {
      const auto [k, v] = split_assignment(t);
      base.set(k, v);
    } catch (const std::invalid_argument &e) {
      throw std::invalid_argument(
          fmt::format("{} (line {} of {})", e.what(), line_no, path.string()));
    }
  }
  return base;
}

int resolve_threads(std::optional<int> flag, const RunConfig &cfg) {
  if (flag) {
    if (*flag < 0)
      throw std::invalid_argument("--threads must be nonnegative");
    return *flag;
  }
  if (cfg.threads > 0)
    return cfg.threads;
  if (const char *env = std::getenv("PALM_THREADS"); env && *env) {
    int v = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0)
      throw std::invalid_argument("PALM_THREADS must be a nonnegative integer");
    return v;
  }
  return 0;
}

} // namespace palm
