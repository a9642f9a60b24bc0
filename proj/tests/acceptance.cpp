// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "palm/bench.hpp"
#include "palm/data.hpp"
#include "palm/persistence.hpp"
#include "palm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace palm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Design random_design(Eigen::Index n, Eigen::Index d, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Design X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      X(i, j) = u(rng);
  return X;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64 &rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = z(rng);
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double max_step(const Eigen::VectorXd &v) {
  double m = 0.0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    m = std::max(m, std::abs(v[i] - v[i - 1]));
  return m;
}

Design slice(double x2, double from, double to, double step) {
  const auto n = static_cast<Eigen::Index>(std::floor((to - from) / step + 1e-9)) + 1;
  Design X(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    X.row(i) << from + step * static_cast<double>(i), x2;
  return X;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Deterministic 50x50 herbie fit with K=25 maximin centers.
struct HerbieFit {
  TrainingSet data;
  PalmModel model;
};

HerbieFit herbie_det_fit() {
  RunConfig cfg = scenario_defaults("herbie-det");
  const GeneratedData g = generate_data(cfg, 0);
  TrainingSet data(g.train.X, g.train.y);
  FittedModel fit = fit_from_config(data, cfg, 0);
  return {std::move(data), std::move(*fit.palm)};
}

Outcome gp_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> nd(2, 30), dd(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index n = nd(rng), d = dd(rng);
    const Design X = random_design(n, d, rng);
    const Eigen::VectorXd y = random_vector(n, rng);
    Eigen::VectorXd th(d);
    for (Eigen::Index l = 0; l < d; ++l)
      th[l] = 0.05 + 0.5 * u(rng);
    const double tau2 = 0.5 + u(rng);
    const double eta = 1e-3 + 0.1 * u(rng);
    const GpFit fit = fit_gp(X, y, Lengthscales(th), tau2, Nugget::value(eta));

    // Dense inverse in extended precision, so the oracle's own rounding
    // stays well below the tolerance.
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    MatL K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        long double s = 0.0L;
        for (Eigen::Index l = 0; l < d; ++l)
          s += std::pow(static_cast<long double>(X(i, l)) - X(j, l), 2) / th[l];
        K(i, j) = std::exp(-s) + (i == j ? eta : 0.0L);
      }
    const MatL Kinv = K.inverse();
    const VecL yl = y.cast<long double>();
    for (int q = 0; q < 5; ++q) {
      const Eigen::VectorXd x = random_design(1, d, rng).row(0).transpose();
      VecL k(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        long double s = 0.0L;
        for (Eigen::Index l = 0; l < d; ++l)
          s += std::pow(static_cast<long double>(X(i, l)) - x[l], 2) / th[l];
        k[i] = std::exp(-s);
      }
      const auto mean = static_cast<double>(k.dot(Kinv * yl));
      const auto var = static_cast<double>(tau2 * (1.0L + eta - k.dot(Kinv * k)));
      const MomentPrediction p = gp_predict(fit, as_point(x));
      worst = std::max({worst, rel_err(p.mean, mean), rel_err(p.variance, var)});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 5.0,
          fmt::format("max relative error {:.3g} (limit 1e-10), {:.3f} s (limit 5 s)", worst,
                      secs)};
}

Outcome alc_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Design X = random_design(10, 2, rng);
    const Eigen::VectorXd y = random_vector(10, rng);
    const Lengthscales th = Lengthscales::isotropic(0.05 + 0.3 * u(rng), 2);
    const double tau2 = 0.5 + u(rng);
    const Nugget eta = Nugget::value(1e-4 + 0.01 * u(rng));
    const GpFit fit(X, y, th, tau2, eta);
    const std::vector<double> cand{u(rng), u(rng)};
    const std::vector<double> ref{u(rng), u(rng)};
    Design Xa(11, 2);
    Xa.topRows(10) = X;
    Xa.row(10) << cand[0], cand[1];
    Eigen::VectorXd ya(11);
    ya << y, 0.0;
    const GpFit grown(Xa, ya, th, tau2, eta);
    const double oracle = fit.predict(ref).variance - grown.predict(ref).variance;
    worst = std::max(worst, std::abs(alc_reduction(fit, cand, ref).reduction - oracle));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 5.0,
          fmt::format("max abs error {:.3g} (limit 1e-8), {:.3f} s (limit 5 s)", worst, secs)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Design X = random_design(20, 2, rng);
    const Eigen::VectorXd y = random_vector(20, rng);
    Eigen::VectorXd th(2);
    th << 0.1 + 0.5 * u(rng), 0.1 + 0.5 * u(rng);
    const double eta = 0.01 + 0.1 * u(rng);
    const LikelihoodGradient g = log_likelihood_gradient(X, y, Lengthscales(th), eta);
    Eigen::VectorXd fd(2);
    for (Eigen::Index l = 0; l < 2; ++l) {
      const double h = 1e-5 * th[l];
      Eigen::VectorXd tp = th, tm = th;
      tp[l] += h;
      tm[l] -= h;
      fd[l] = (log_likelihood(X, y, Lengthscales(tp), eta) -
               log_likelihood(X, y, Lengthscales(tm), eta)) /
              (2.0 * h);
    }
    worst = std::max(worst, (g.d_theta - fd).norm() / fd.norm());
  }
  return {worst < 1e-5, fmt::format("max relative error {:.3g} (limit 1e-5)", worst)};
}

Outcome weight_simplex() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> kdist(1, 60);
  std::uniform_real_distribution<double> logv(-12.0, 3.0), pdist(0.0, 8.0);
  double worst_sum = 0.0;
  bool exact = true;
  for (int rep = 0; rep < 10000; ++rep) {
    const int K = kdist(rng);
    Eigen::VectorXd s(K);
    for (int k = 0; k < K; ++k)
      s[k] = std::pow(10.0, logv(rng));
    const Eigen::VectorXd w = weights(s, pdist(rng));
    if (!(w.array() >= 0.0).all())
      worst_sum = std::numeric_limits<double>::infinity();
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    const Eigen::VectorXd phi = s.cwiseInverse();
    if (K > 1 && weights(s, 1.0) != phi / phi.sum())
      exact = false;
  }
  const bool ok = worst_sum <= 1e-12 && exact;
  return {ok, fmt::format("max |sum - 1| {:.3g} (limit 1e-12), p=1 exact: {}", worst_sum,
                          exact ? "yes" : "no")};
}

Outcome tau2_limit(const HerbieFit &h) {
  const std::vector<double> far{12.0, 0.0};
  const double v = h.model.predict(far).variance;
  const double target = h.model.s2() * (1.0 + h.model.nugget().eta);
  const double r = v / target;
  return {r >= 0.95 && r <= 1.05,
          fmt::format("variance / s2(1+eta) = {:.6f} (range [0.95, 1.05])", r)};
}

Outcome continuity(const HerbieFit &h) {
  const auto t0 = Clock::now();
  const Design S = slice(-0.104, -2.0, 2.0, 1e-3);
  const Predictions p = predict_batch(h.model, S);
  const Predictions l = baseline_transductive_lagp(h.data, S, PalmConfig{});
  const double ps = max_step(p.mean), ls = max_step(l.mean);
  const double secs = seconds_since(t0);
  return {ps <= 0.5 * ls && secs < 120.0,
          fmt::format("palm max step {:.3g}, lagp max step {:.3g}, ratio {:.3f} (limit 0.5), "
                      "{:.1f} s (limit 120 s)",
                      ps, ls, ps / ls, secs)};
}

struct NoisyHerbie {
  double palm_rmse = 0.0, lagp_rmse = 0.0, average_rmse = 0.0;
  double palm_predict = 0.0, lagp_predict = 0.0, secs = 0.0;
};

NoisyHerbie noisy_herbie() {
  const auto t0 = Clock::now();
  const RunConfig cfg = scenario_defaults("herbie-noisy");
  const std::uint64_t seed = derive_seed(0, 0);
  const GeneratedData g = generate_data(cfg, seed);
  const TrainingSet data(g.train.X, g.train.y);
  const PalmConfig pc = cfg.palm_config();
  NoisyHerbie r;

  const FittedModel fit = fit_from_config(data, cfg, seed);
  fit.predict(Design(g.test.X.topRows(1)));
  auto t = Clock::now();
  const Predictions p = fit.predict(g.test.X);
  r.palm_predict = seconds_since(t);
  r.palm_rmse = rmse(g.test.y, p.mean);

  baseline_transductive_lagp(data, Design(g.test.X.topRows(1)), pc);
  t = Clock::now();
  const Predictions l = baseline_transductive_lagp(data, g.test.X, pc);
  r.lagp_predict = seconds_since(t);
  r.lagp_rmse = rmse(g.test.y, l.mean);

  const Predictions a =
      baseline_model_average(data, cfg.K, data.size() / cfg.K, g.test.X, pc, derive_seed(seed, 7));
  r.average_rmse = rmse(g.test.y, a.mean);
  r.secs = seconds_since(t0);
  return r;
}

Outcome parity(const NoisyHerbie &r) {
  const double acc = r.palm_rmse / r.lagp_rmse;
  const double speed = r.palm_predict / r.lagp_predict;
  return {acc <= 1.25 && speed <= 0.3 && r.secs < 300.0,
          fmt::format("rmse palm {:.5f} lagp {:.5f} ratio {:.3f} (limit 1.25); predict "
                      "{:.3f} s vs {:.3f} s ratio {:.4f} (limit 0.3); {:.1f} s (limit 300 s)",
                      r.palm_rmse, r.lagp_rmse, acc, r.palm_predict, r.lagp_predict, speed,
                      r.secs)};
}

Outcome oversmoothing(const NoisyHerbie &r) {
  return {r.average_rmse > r.palm_rmse,
          fmt::format("rmse model-average {:.5f} vs palm {:.5f}", r.average_rmse, r.palm_rmse)};
}

Outcome sequential_glee() {
  const auto t0 = Clock::now();
  const RunConfig cfg = scenario_defaults("glee-seq");
  double sf_score = 0.0, seq_score = 0.0;
  int located = 0, inside_total = 0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    const std::uint64_t seed = derive_seed(0, static_cast<std::uint64_t>(rep));
    const GeneratedData g = generate_data(cfg, seed);
    const TrainingSet data(g.train.X, g.train.y);
    const auto test_score = [&](const FittedModel &f) {
      const Predictions p = f.predict(g.test.X);
      return score(g.test.y, p.mean, p.variance.cwiseMax(std::numeric_limits<double>::min()));
    };
    RunConfig c = cfg;
    c.center_mode = CenterMode::spacefill;
    sf_score += test_score(fit_from_config(data, c, seed));
    c.center_mode = CenterMode::sequential;
    const FittedModel seq = fit_from_config(data, c, seed);
    seq_score += test_score(seq);

    int inside = 0;
    int seen = 0;
    for (const auto &[u, mode] : seq.centers.history) {
      if (mode != SelectionMode::sequential || seen == 5)
        continue;
      ++seen;
      inside += data.coding().decode(as_point(u)).norm() <= 2.5 ? 1 : 0;
    }
    located += seen == 5 && inside == 5 ? 1 : 0;
    inside_total += inside;
  }
  sf_score /= reps;
  seq_score /= reps;
  const double secs = seconds_since(t0);
  const bool ok = seq_score >= sf_score - 0.01 && located >= 8 && secs < 600.0;
  return {ok, fmt::format("mean score sequential {:.4f} spacefill {:.4f} gap {:+.4f} (limit "
                          "-0.01); first five additions inside radius 2.5 in {}/10 seeds "
                          "(need 8), {}/50 additions inside overall; {:.1f} s (limit 600 s)",
                          seq_score, sf_score, seq_score - sf_score, located, inside_total,
                          secs)};
}

Outcome sequential_michalewicz() {
  const auto t0 = Clock::now();
  const RunConfig cfg = scenario_defaults("michalewicz-3d");
  const int reps = 10;
  int wins20 = 0;
  double gap20 = 0.0, gap40 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const std::uint64_t seed = derive_seed(0, static_cast<std::uint64_t>(rep));
    const GeneratedData g = generate_data(cfg, seed);
    const TrainingSet data(g.train.X, g.train.y);
    const auto test_rmse = [&](const Predictions &p) { return rmse(g.test.y, p.mean); };

    RunConfig c = cfg;
    c.center_mode = CenterMode::spacefill;
    c.K = 20;
    const double sf20 = test_rmse(fit_from_config(data, c, seed).predict(g.test.X));
    c.K = 40;
    const double sf40 = test_rmse(fit_from_config(data, c, seed).predict(g.test.X));

    c.center_mode = CenterMode::sequential;
    double seq20 = 0.0;
    const auto observer = [&](const PalmModel &m, const CenterSet &) {
      if (m.size() == 20)
        seq20 = test_rmse(predict_batch(m, g.test.X));
    };
    const double seq40 = test_rmse(fit_from_config(data, c, seed, observer).predict(g.test.X));
    wins20 += seq20 <= sf20 ? 1 : 0;
    gap20 += seq20 - sf20;
    gap40 += seq40 - sf40;
  }
  gap20 /= reps;
  gap40 /= reps;
  const double secs = seconds_since(t0);
  const bool ok = wins20 >= 7 && std::abs(gap40) < std::abs(gap20) && secs < 1200.0;
  return {ok, fmt::format("sequential rmse <= spacefill at K=20 in {}/10 seeds (need 7); mean "
                          "gap (sequential - spacefill) K=20 {:+.4f}, K=40 {:+.4f} (must "
                          "shrink); {:.1f} s (limit 1200 s)",
                          wins20, gap20, gap40, secs)};
}

Outcome persistence_round_trip() {
  const fs::path dir = fs::temp_directory_path() / "palm_acceptance_persist";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig cfg = scenario_defaults("herbie-noisy");
  cfg.train_grid = 30;
  cfg.K = 9;
  const GeneratedData g = generate_data(cfg, 5);
  write_dataset_csv(dir / "train.csv", g.train.X, g.train.y);
  const TrainingSet data = read_dataset_csv(dir / "train.csv");
  const FittedModel fit = fit_from_config(data, cfg, 5);
  ModelMeta meta;
  meta.training_path = (dir / "train.csv").string();
  meta.history = fit.centers.history;
  save_model(dir / "model.json", *fit.palm, data, meta);
  const LoadedModel back = load_model(dir / "model.json");

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{u(rng), u(rng)};
    const PalmPrediction a = fit.palm->predict(x);
    const MomentPrediction b = back.predict(x);
    worst = std::max({worst, std::abs(a.mean - b.mean), std::abs(a.variance - b.variance)});
  }
  fs::remove_all(dir);
  return {worst <= 1e-12, fmt::format("max difference on 1000 points {:.3g} (limit 1e-12)", worst)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "palm_acceptance_determinism";
  fs::remove_all(root);
  const std::string flags =
      " --set train_grid=20 --set test_grid=15 --set K=4 --set slice_step=0.1 --seed 3 "
      "--threads 1 --out ";
  std::vector<std::string> outputs;
  for (const char *run : {"a", "b"}) {
    const fs::path dir = root / run;
    const std::string cmd = std::string(PALM_CLI_PATH) + " bench herbie-noisy" + flags +
                            dir.string() + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0)
      return {false, "bench command failed"};
    outputs.push_back(slurp(dir / "metrics.csv"));
  }
  fs::remove_all(root);
  const bool same = outputs[0] == outputs[1] && !outputs[0].empty();
  return {same, fmt::format("metrics.csv {} across two runs ({} bytes)",
                            same ? "byte-identical" : "differs", outputs[0].size())};
}

} // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const std::string &name, const std::function<Outcome()> &fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << fmt::format("{} criterion {}: {}: {}", o.pass ? "PASS" : "FAIL", id, name,
                             o.detail)
              << std::endl;
  };

  report(1, "gp oracle", gp_oracle);
  report(2, "alc oracle", alc_oracle);
  report(3, "likelihood gradient", gradient_check);
  report(4, "weight simplex", weight_simplex);

  std::optional<HerbieFit> herbie;
  std::string herbie_error;
  try {
    herbie = herbie_det_fit();
  } catch (const std::exception &e) {
    herbie_error = e.what();
  }
  const auto with_herbie = [&](const std::function<Outcome(const HerbieFit &)> &fn) {
    return [&, fn]() -> Outcome {
      if (!herbie)
        return {false, "herbie fit failed: " + herbie_error};
      return fn(*herbie);
    };
  };
  report(5, "tau2 calibration limit", with_herbie(tau2_limit));
  report(6, "continuity", with_herbie(continuity));

  std::optional<NoisyHerbie> noisy;
  std::string noisy_error;
  try {
    noisy = noisy_herbie();
  } catch (const std::exception &e) {
    noisy_error = e.what();
  }
  const auto with_noisy = [&](const std::function<Outcome(const NoisyHerbie &)> &fn) {
    return [&, fn]() -> Outcome {
      if (!noisy)
        return {false, "noisy herbie run failed: " + noisy_error};
      return fn(*noisy);
    };
  };
  report(7, "accuracy parity at speed", with_noisy(parity));
  report(8, "model averaging over-smooths", with_noisy(oversmoothing));
  report(9, "sequential vs space-filling, glee", sequential_glee);
  report(10, "sequential vs space-filling, michalewicz", sequential_michalewicz);
  report(11, "persistence round trip", persistence_round_trip);
  report(12, "determinism", determinism);

  std::cout << fmt::format("{} of 12 criteria passed", 12 - failures) << std::endl;
  return failures == 0 ? 0 : 1;
}
