#include "palm/bench.hpp"
#include "palm/parallel.hpp"
#include "palm/persistence.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace palm;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--config", f.config, "key=value settings file");
  cmd->add_option("--set", f.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--threads", f.threads, "worker thread cap (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
}

// defaults, then the config file, then --set, then the dedicated flags.
RunConfig build_config(const CommonFlags &f, RunConfig base = {}) {
  RunConfig cfg = f.config.empty() ? std::move(base) : load_run_config(f.config, std::move(base));
  for (const auto &s : f.sets) {
    const auto [k, v] = split_assignment(s);
    cfg.set(k, v);
  }
  if (f.seed)
    cfg.seed = *f.seed;
  if (f.out)
    cfg.out = *f.out;
  cfg.threads = resolve_threads(f.threads, cfg);
  cfg.validate();
  if (cfg.threads > 0)
    set_thread_count(cfg.threads);
  return cfg;
}

std::string predictions_csv(const Design &X, const Eigen::VectorXd &mean,
                            const Eigen::VectorXd &var) {
  std::string out;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    out += fmt::format("x{},", j + 1);
  out += "mean,variance\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      out += format_double(X(i, j)) + ",";
    out += format_double(mean[i]) + "," + format_double(var[i]) + "\n";
  }
  return out;
}

int cmd_gen(const CommonFlags &f) {
  const RunConfig cfg = build_config(f);
  const GeneratedData g = generate_data(cfg, cfg.seed);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_dataset_csv(dir / "train.csv", g.train.X, g.train.y);
  write_dataset_csv(dir / "test.csv", g.test.X, g.test.y);
  std::cout << fmt::format("wrote {} training and {} test rows to {}\n", g.train.X.rows(),
                           g.test.X.rows(), dir.string());
  return 0;
}

int cmd_fit(const CommonFlags &f, const std::string &train_arg, const std::string &model_arg) {
  const RunConfig cfg = build_config(f);
  const fs::path dir = cfg.out;
  const fs::path train_path = train_arg.empty() ? dir / "train.csv" : fs::path(train_arg);
  const fs::path model_path = model_arg.empty() ? dir / "model.json" : fs::path(model_arg);
  const TrainingSet data = read_dataset_csv(train_path);

  const auto t0 = std::chrono::steady_clock::now();
  const FittedModel fit = fit_from_config(data, cfg, cfg.seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ModelMeta meta;
  meta.training_path = fs::absolute(train_path).string();
  meta.history = fit.centers.history;
  fs::create_directories(dir);
  if (model_path.has_parent_path())
    fs::create_directories(model_path.parent_path());
  if (fit.two_stage)
    save_model(model_path, *fit.two_stage, data, meta);
  else
    save_model(model_path, *fit.palm, data, meta);

  const PalmModel &m = fit.local_model();
  std::string report = "K,n,tau2,eta,p,sequential_additions,wall_time_fit\n";
  Eigen::Index additions = 0;
  for (const auto &h : fit.centers.history)
    additions += h.second == SelectionMode::sequential ? 1 : 0;
  report += fmt::format("{},{},{},{},{},{},{:.3f}\n", m.size(), cfg.n, format_double(m.tau2()),
                        format_double(m.nugget().eta), format_double(m.power()), additions,
                        secs);
  write_file_atomic(dir / "fit.csv", report);
  std::cout << fmt::format("fitted {} experts in {:.3f} s; model written to {}\n", m.size(),
                           secs, model_path.string());
  return 0;
}

int cmd_predict(const CommonFlags &f, const std::string &model_arg, const std::string &input,
                const std::string &output, const std::string &train_override) {
  const RunConfig cfg = build_config(f);
  const fs::path dir = cfg.out;
  const fs::path model_path = model_arg.empty() ? dir / "model.json" : fs::path(model_arg);
  const fs::path out_path = output.empty() ? dir / "predictions.csv" : fs::path(output);
  std::optional<TrainingSet> data;
  if (!train_override.empty())
    data = read_dataset_csv(train_override);
  const LoadedModel model = load_model(model_path, data);
  const Design X = read_inputs_csv(input);
  if (X.cols() != model.dim())
    throw std::runtime_error(fmt::format("inputs have {} columns, the model expects {}",
                                         X.cols(), model.dim()));
  Eigen::VectorXd mean(X.rows()), var(X.rows());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const MomentPrediction p = model.predict(row_span(X, ii));
    mean[ii] = p.mean;
    var[ii] = p.variance;
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out_path.has_parent_path())
    fs::create_directories(out_path.parent_path());
  write_file_atomic(out_path, predictions_csv(X, mean, var));
  std::cout << fmt::format("predicted {} points in {:.3f} s; written to {}\n", X.rows(), secs,
                           out_path.string());
  return 0;
}

int cmd_bench(const CommonFlags &f, const std::string &scenario) {
  const RunConfig cfg = build_config(f, scenario_defaults(scenario));
  run_bench(scenario, cfg, cfg.out, &std::cerr);
  std::cout << fmt::format("{} results written to {}\n", scenario, cfg.out);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Precision-aggregated local GP models: data generation, fitting, "
               "prediction and benchmarks"};
  app.require_subcommand(1);

  CommonFlags gen_f, fit_f, pred_f, bench_f;
  auto *gen = app.add_subcommand("gen", "write train.csv and test.csv for a test function");
  add_common(gen, gen_f);

  std::string fit_train, fit_model;
  auto *fit = app.add_subcommand("fit", "fit a model and save it");
  add_common(fit, fit_f);
  fit->add_option("--train", fit_train, "training CSV (default <out>/train.csv)");
  fit->add_option("--model", fit_model, "model file (default <out>/model.json)");

  std::string pred_model, pred_input, pred_output, pred_train;
  auto *pred = app.add_subcommand("predict", "predict at the rows of an inputs CSV");
  add_common(pred, pred_f);
  pred->add_option("--model", pred_model, "model file (default <out>/model.json)");
  pred->add_option("--input", pred_input, "CSV with columns x1..xd")->required();
  pred->add_option("--output", pred_output, "predictions CSV (default <out>/predictions.csv)");
  pred->add_option("--train", pred_train, "training CSV, overriding the one named in the model");

  std::string scenario;
  auto *bench = app.add_subcommand("bench", "run a named benchmark scenario");
  add_common(bench, bench_f);
  bench->add_option("scenario", scenario,
                    "herbie-noisy, herbie-det, glee-seq or michalewicz-3d")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (*gen)
      return cmd_gen(gen_f);
    if (*fit)
      return cmd_fit(fit_f, fit_train, fit_model);
    if (*pred)
      return cmd_predict(pred_f, pred_model, pred_input, pred_output, pred_train);
    if (*bench)
      return cmd_bench(bench_f, scenario);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
