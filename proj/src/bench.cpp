#include "palm/bench.hpp"
#include "palm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <random>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace palm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string metrics_row(const std::string &scenario, const std::string &method,
                        Eigen::Index K, int rep, const MetricReport &m) {
  return fmt::format("{},{},{},{},{},{},{},{}\n", scenario, method, K, rep,
                     format_double(m.rmse), format_double(m.mae),
                     format_double(m.score), format_double(m.coverage_90));
}

std::string timing_row(const std::string &scenario, const std::string &method,
                       Eigen::Index K, int rep, const MetricReport &m) {
  return fmt::format("{},{},{},{},{:.3f},{:.3f}\n", scenario, method, K, rep,
                     m.wall_time_fit, m.wall_time_predict);
}

// Predicts once untimed so that lazy allocations are not billed.
template <class Fn> Predictions timed_predict(Fn &&predict, const Design &X, double &secs) {
  if (X.rows() > 0)
    predict(Design(X.topRows(1)));
  const auto t0 = Clock::now();
  Predictions p = predict(X);
  secs = seconds_since(t0);
  return p;
}

MetricReport report_for(const Dataset &test, const Predictions &p) {
  Eigen::VectorXd var = p.variance.cwiseMax(std::numeric_limits<double>::min());
  return evaluate(test.y, p.mean, var);
}

struct Outputs {
  std::string metrics = std::string(kMetricsHeader) + "\n";
  std::string timing = std::string(kTimingHeader) + "\n";
  std::string slice;
  std::string curve;

  void add(const std::string &scenario, const std::string &method, Eigen::Index K,
           int rep, const MetricReport &m) {
    metrics += metrics_row(scenario, method, K, rep, m);
    timing += timing_row(scenario, method, K, rep, m);
  }
};

void note(std::ostream *log, const std::string &msg) {
  if (log)
    *log << msg << std::endl;
}

Design slice_design(const RunConfig &cfg, const TestFunction &fn) {
  const auto m = static_cast<Eigen::Index>(
      std::floor((fn.hi[0] - fn.lo[0]) / cfg.slice_step + 1e-9)) + 1;
  Design S(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    S(i, 0) = fn.lo[0] + static_cast<double>(i) * cfg.slice_step;
    S(i, 1) = cfg.slice_x2;
  }
  return S;
}

void run_herbie(const std::string &scenario, const RunConfig &cfg, Outputs &out,
                std::ostream *log) {
  const PalmConfig pc = cfg.palm_config();
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    const GeneratedData g = generate_data(cfg, seed);
    const TrainingSet train(g.train.X, g.train.y);
    const bool want_slice = rep == 0 && g.fn.dim == 2;
    const Design S = want_slice ? slice_design(cfg, g.fn) : Design();
    std::vector<std::pair<std::string, Predictions>> slices;

    MetricReport m;
    {
      const auto t0 = Clock::now();
      const FittedModel fit = fit_from_config(train, cfg, seed);
      m.wall_time_fit = seconds_since(t0);
      const Predictions p = timed_predict(
          [&](const Design &X) { return fit.predict(X); }, g.test.X, m.wall_time_predict);
      const MetricReport r = report_for(g.test, p);
      m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
      out.add(scenario, "palm", cfg.K, rep, m);
      note(log, fmt::format("{} rep {}: palm rmse {}", scenario, rep, format_double(m.rmse)));
      if (want_slice)
        slices.emplace_back("palm", fit.predict(S));
    }
    {
      const Predictions p = timed_predict(
          [&](const Design &X) { return baseline_transductive_lagp(train, X, pc); },
          g.test.X, m.wall_time_predict);
      m.wall_time_fit = 0.0;
      const MetricReport r = report_for(g.test, p);
      m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
      out.add(scenario, "lagp-transductive", cfg.K, rep, m);
      note(log, fmt::format("{} rep {}: lagp-transductive rmse {}", scenario, rep,
                            format_double(m.rmse)));
      if (want_slice)
        slices.emplace_back("lagp", baseline_transductive_lagp(train, S, pc));
    }
    {
      const Eigen::Index subset = train.size() / cfg.K;
      const std::uint64_t s = derive_seed(seed, 7);
      const auto t0 = Clock::now();
      const Predictions p = baseline_model_average(train, cfg.K, subset, g.test.X, pc, s);
      m.wall_time_fit = 0.0;
      m.wall_time_predict = seconds_since(t0);
      const MetricReport r = report_for(g.test, p);
      m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
      out.add(scenario, "model-average", cfg.K, rep, m);
      note(log, fmt::format("{} rep {}: model-average rmse {}", scenario, rep,
                            format_double(m.rmse)));
      if (want_slice)
        slices.emplace_back("average",
                            baseline_model_average(train, cfg.K, subset, S, pc, s));
    }
    {
      const auto cells = std::max<Eigen::Index>(
          1, std::lround(std::pow(static_cast<double>(cfg.K), 1.0 / static_cast<double>(train.dim()))));
      const auto t0 = Clock::now();
      const Predictions p = baseline_partition_gp(train, cells, g.test.X, pc);
      m.wall_time_fit = 0.0;
      m.wall_time_predict = seconds_since(t0);
      const MetricReport r = report_for(g.test, p);
      m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
      out.add(scenario, "partition-gp", cfg.K, rep, m);
      note(log, fmt::format("{} rep {}: partition-gp rmse {}", scenario, rep,
                            format_double(m.rmse)));
      if (want_slice)
        slices.emplace_back("partition", baseline_partition_gp(train, cells, S, pc));
    }

    if (want_slice) {
      std::string s = "x1,x2,truth";
      for (const auto &[name, p] : slices)
        s += fmt::format(",{0}_mean,{0}_variance", name);
      s += "\n";
      const Eigen::VectorXd truth = evaluate_function(g.fn, S);
      for (Eigen::Index i = 0; i < S.rows(); ++i) {
        s += fmt::format("{},{},{}", format_double(S(i, 0)), format_double(S(i, 1)),
                         format_double(truth[i]));
        for (const auto &[name, p] : slices)
          s += fmt::format(",{},{}", format_double(p.mean[i]), format_double(p.variance[i]));
        s += "\n";
      }
      out.slice = std::move(s);
    }
  }
}

// Space-filling and sequential PALM on the same data; `curve_ks` lists the
// sizes reported in curve.csv, `metric_ks` those reported in metrics.csv.
void run_modes(const std::string &scenario, const RunConfig &cfg,
               const std::vector<Eigen::Index> &curve_ks,
               const std::vector<Eigen::Index> &metric_ks, Outputs &out,
               std::ostream *log) {
  out.curve = "scenario,mode,rep,K,rmse,score\n";
  const Eigen::Index K_max = *std::max_element(curve_ks.begin(), curve_ks.end());
  const auto is_metric = [&](Eigen::Index K) {
    return std::find(metric_ks.begin(), metric_ks.end(), K) != metric_ks.end();
  };
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    const GeneratedData g = generate_data(cfg, seed);
    const TrainingSet train(g.train.X, g.train.y);

    for (const Eigen::Index K : curve_ks) {
      RunConfig c = cfg;
      c.K = static_cast<int>(K);
      c.center_mode = CenterMode::spacefill;
      MetricReport m;
      const auto t0 = Clock::now();
      const FittedModel fit = fit_from_config(train, c, seed);
      m.wall_time_fit = seconds_since(t0);
      const Predictions p = timed_predict(
          [&](const Design &X) { return fit.predict(X); }, g.test.X, m.wall_time_predict);
      const MetricReport r = report_for(g.test, p);
      m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
      out.curve += fmt::format("{},spacefill,{},{},{},{}\n", scenario, rep, K,
                               format_double(m.rmse), format_double(m.score));
      if (is_metric(K))
        out.add(scenario, "palm-spacefill", K, rep, m);
    }
    note(log, fmt::format("{} rep {}: spacefill done", scenario, rep));

    RunConfig c = cfg;
    c.K = static_cast<int>(K_max);
    c.center_mode = CenterMode::sequential;
    std::vector<std::pair<Eigen::Index, MetricReport>> seq;
    double observer_secs = 0.0;
    const auto t0 = Clock::now();
    const auto observer = [&](const PalmModel &model, const CenterSet &) {
      const auto o0 = Clock::now();
      const Eigen::Index K = model.size();
      if (std::find(curve_ks.begin(), curve_ks.end(), K) != curve_ks.end()) {
        MetricReport m;
        const Predictions p = timed_predict(
            [&](const Design &X) { return predict_batch(model, X); }, g.test.X,
            m.wall_time_predict);
        const MetricReport r = report_for(g.test, p);
        m.rmse = r.rmse, m.mae = r.mae, m.score = r.score, m.coverage_90 = r.coverage_90;
        m.wall_time_fit = seconds_since(t0) - observer_secs;
        seq.emplace_back(K, m);
      }
      observer_secs += seconds_since(o0);
    };
    fit_from_config(train, c, seed, observer);
    for (const auto &[K, m] : seq) {
      out.curve += fmt::format("{},sequential,{},{},{},{}\n", scenario, rep, K,
                               format_double(m.rmse), format_double(m.score));
      if (is_metric(K))
        out.add(scenario, "palm-sequential", K, rep, m);
    }
    note(log, fmt::format("{} rep {}: sequential done", scenario, rep));
  }
}

} // namespace

GeneratedData generate_data(const RunConfig &cfg, std::uint64_t seed) {
  GeneratedData g;
  g.fn = test_function(cfg.function, cfg.dim, cfg.michalewicz_m);
  g.train.X = grid_design(cfg.train_grid, g.fn.lo, g.fn.hi);
  g.train.truth = evaluate_function(g.fn, g.train.X);
  g.train.y = add_noise(g.train.truth, cfg.noise_sd, derive_seed(seed, 100));
  g.test.X = midpoint_grid(cfg.test_grid, g.fn.lo, g.fn.hi);
  g.test.truth = evaluate_function(g.fn, g.test.X);
  g.test.y = cfg.test_noise ? add_noise(g.test.truth, cfg.noise_sd, derive_seed(seed, 101))
                            : g.test.truth;
  return g;
}

Predictions FittedModel::predict(const Design &X) const {
  return two_stage ? predict_batch(*two_stage, X) : predict_batch(*palm, X);
}

const PalmModel &FittedModel::local_model() const {
  return two_stage ? two_stage->residual_model() : *palm;
}

FittedModel fit_from_config(const TrainingSet &data, const RunConfig &cfg,
                            std::uint64_t seed, const SequentialObserver &observer) {
  cfg.validate();
  const PalmConfig pc = cfg.palm_config();
  FittedModel out;

  std::optional<GpFit> global;
  std::vector<Eigen::Index> global_idx;
  TrainingSet local_data = data;
  if (cfg.model == ModelType::global_plus_palm) {
    const Eigen::Index m = std::min<Eigen::Index>(cfg.m_global, data.size());
    std::vector<Eigen::Index> all(static_cast<std::size_t>(data.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(seed, 200));
    std::sample(all.begin(), all.end(), std::back_inserter(global_idx), m, rng);
    const CodedData coded = data.coded();
    global = fit_global_stage(coded, global_idx, pc);
    local_data = data.with_responses(global_residuals(*global, coded));
  }

  std::optional<PalmModel> local;
  if (cfg.center_mode == CenterMode::sequential) {
    SequentialConfig sc;
    sc.multistarts = cfg.M_s;
    sc.eval_budget = cfg.eval_budget;
    sc.max_prediction_points = cfg.max_prediction_points;
    SequentialResult r = sequential_palm(local_data, std::min(cfg.K_init, cfg.K), cfg.K,
                                         pc, sc, derive_seed(seed, 201), {}, observer);
    local = std::move(r.model);
    out.centers = std::move(r.centers);
  } else {
    out.centers = maximin_centers(cfg.K, data.dim(), derive_seed(seed, 201));
    local = fit_palm(local_data, out.centers.C, pc);
    if (observer)
      observer(*local, out.centers);
  }

  if (global)
    out.two_stage.emplace(std::move(*global), std::move(global_idx), std::move(*local),
                          cfg.global_variance);
  else
    out.palm = std::move(local);
  return out;
}

std::vector<std::string> bench_scenarios() {
  return {"herbie-noisy", "herbie-det", "glee-seq", "michalewicz-3d"};
}

RunConfig scenario_defaults(const std::string &scenario) {
  RunConfig c;
  if (scenario == "herbie-noisy") {
    c.function = "herbie";
    c.noise_sd = 0.05;
  } else if (scenario == "herbie-det") {
    c.function = "herbie";
    c.noise_sd = 0.0;
  } else if (scenario == "glee-seq") {
    c.function = "glee";
    c.train_grid = 60;
    c.test_grid = 61;
    c.noise_sd = 0.01;
    c.K = 15;
    c.K_init = 5;
  } else if (scenario == "michalewicz-3d") {
    c.function = "michalewicz";
    c.dim = 3;
    c.train_grid = 15;
    c.test_grid = 16;
    c.noise_sd = 0.05;
    c.K = 20;
    c.K_init = 5;
  } else {
    throw std::invalid_argument("unknown scenario '" + scenario +
                                "' (expected herbie-noisy, herbie-det, glee-seq or "
                                "michalewicz-3d)");
  }
  return c;
}

void run_bench(const std::string &scenario, const RunConfig &cfg,
               const std::filesystem::path &out_dir, std::ostream *log) {
  scenario_defaults(scenario);
  cfg.validate();
  Outputs out;
  if (scenario == "herbie-noisy" || scenario == "herbie-det") {
    run_herbie(scenario, cfg, out, log);
  } else if (scenario == "glee-seq") {
    std::vector<Eigen::Index> ks;
    for (Eigen::Index K = cfg.K_init; K <= cfg.K; ++K)
      ks.push_back(K);
    run_modes(scenario, cfg, ks, {cfg.K}, out, log);
  } else {
    const std::vector<Eigen::Index> ks = {cfg.K, 2 * static_cast<Eigen::Index>(cfg.K)};
    run_modes(scenario, cfg, ks, ks, out, log);
  }

  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "metrics.csv", out.metrics);
  write_file_atomic(out_dir / "timing.csv", out.timing);
  if (!out.slice.empty())
    write_file_atomic(out_dir / "slice.csv", out.slice);
  if (!out.curve.empty())
    write_file_atomic(out_dir / "curve.csv", out.curve);
}

} // namespace palm
