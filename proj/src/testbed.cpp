#include "palm/testbed.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace palm {

namespace {

double herbie_factor(double z) {
  return std::exp(-(z - 1.0) * (z - 1.0)) + std::exp(-0.8 * (z + 1.0) * (z + 1.0)) -
         0.05 * std::sin(8.0 * (z + 0.1));
}

void check_pair(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                const char *what) {
  if (y.size() != mu.size())
    throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (y.size() == 0)
    throw std::invalid_argument(std::string(what) + ": empty input");
}

} // namespace

double herbies_tooth(Point x) {
  double p = 1.0;
  for (double z : x)
    p *= herbie_factor(z);
  return -p;
}

double gramacy_lee_2d(Point x) {
  if (x.size() != 2)
    throw std::invalid_argument("gramacy_lee_2d: needs two inputs");
  return x[0] * std::exp(-x[0] * x[0] - x[1] * x[1]);
}

double michalewicz(Point x, int m) {
  if (m < 1)
    throw std::invalid_argument("michalewicz: m must be at least 1");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double inner =
        std::sin(static_cast<double>(i + 1) * x[i] * x[i] / std::numbers::pi);
    s += std::sin(x[i]) * std::pow(inner, 2 * m);
  }
  return -s;
}

double sine_wave(double x) { return std::sin(x); }

namespace {

Design factorial(const std::vector<std::vector<double>> &axes) {
  const auto d = static_cast<Eigen::Index>(axes.size());
  Eigen::Index total = 1;
  for (const auto &a : axes)
    total *= static_cast<Eigen::Index>(a.size());
  Design X(total, d);
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rem = r;
    for (Eigen::Index l = d - 1; l >= 0; --l) {
      const auto &a = axes[static_cast<std::size_t>(l)];
      const auto m = static_cast<Eigen::Index>(a.size());
      X(r, l) = a[static_cast<std::size_t>(rem % m)];
      rem /= m;
    }
  }
  return X;
}

void check_bounds(const Eigen::VectorXd &lo, const Eigen::VectorXd &hi) {
  if (lo.size() != hi.size() || lo.size() < 1)
    throw std::invalid_argument("grid: bounds dimension mismatch");
  if (!(lo.array() < hi.array()).all())
    throw std::invalid_argument("grid: need lo < hi in every dimension");
}

} // namespace

Design grid_design(Eigen::Index points_per_dim, const Eigen::VectorXd &lo,
                   const Eigen::VectorXd &hi) {
  if (points_per_dim < 2)
    throw std::invalid_argument("grid_design: need at least 2 points per dimension");
  check_bounds(lo, hi);
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(lo.size()));
  for (Eigen::Index l = 0; l < lo.size(); ++l) {
    auto &a = axes[static_cast<std::size_t>(l)];
    const double h = (hi[l] - lo[l]) / static_cast<double>(points_per_dim - 1);
    for (Eigen::Index i = 0; i < points_per_dim; ++i)
      a.push_back(i + 1 == points_per_dim ? hi[l] : lo[l] + static_cast<double>(i) * h);
  }
  return factorial(axes);
}

Design midpoint_grid(Eigen::Index points_per_dim, const Eigen::VectorXd &lo,
                     const Eigen::VectorXd &hi) {
  if (points_per_dim < 1)
    throw std::invalid_argument("midpoint_grid: need at least 1 point per dimension");
  check_bounds(lo, hi);
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(lo.size()));
  for (Eigen::Index l = 0; l < lo.size(); ++l) {
    const double h = (hi[l] - lo[l]) / static_cast<double>(points_per_dim);
    for (Eigen::Index i = 0; i < points_per_dim; ++i)
      axes[static_cast<std::size_t>(l)].push_back(
          lo[l] + (static_cast<double>(i) + 0.5) * h);
  }
  return factorial(axes);
}

Eigen::VectorXd add_noise(const Eigen::VectorXd &y, double sd,
                          std::uint64_t seed) {
  if (!(sd >= 0.0))
    throw std::invalid_argument("add_noise: sd must be nonnegative");
  if (sd == 0.0)
    return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  Eigen::VectorXd out = y;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] += noise(rng);
  return out;
}

double rmse(const Eigen::VectorXd &y, const Eigen::VectorXd &mu) {
  check_pair(y, mu, "rmse");
  return std::sqrt((y - mu).squaredNorm() / static_cast<double>(y.size()));
}

double mae(const Eigen::VectorXd &y, const Eigen::VectorXd &mu) {
  check_pair(y, mu, "mae");
  return (y - mu).cwiseAbs().sum() / static_cast<double>(y.size());
}

double score(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
             const Eigen::VectorXd &sigma2) {
  check_pair(y, mu, "score");
  check_pair(y, sigma2, "score");
  if (!(sigma2.array() > 0.0).all())
    throw std::invalid_argument("score: variances must be positive");
  const Eigen::ArrayXd e = (y - mu).array();
  return (-(e * e) / sigma2.array() - sigma2.array().log()).mean();
}

double coverage(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                const Eigen::VectorXd &sigma2, double level) {
  check_pair(y, mu, "coverage");
  check_pair(y, sigma2, "coverage");
  if (!(level >= 0.0 && level < 1.0))
    throw std::invalid_argument("coverage: level must be in [0, 1)");
  if (!(sigma2.array() >= 0.0).all())
    throw std::invalid_argument("coverage: variances must be nonnegative");
  const double z =
      level == 0.0 ? 0.0
                   : boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (std::abs(y[i] - mu[i]) <= z * std::sqrt(sigma2[i]) &&
        (level > 0.0 || y[i] == mu[i]))
      ++inside;
  return static_cast<double>(inside) / static_cast<double>(y.size());
}

MetricReport evaluate(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                      const Eigen::VectorXd &sigma2) {
  MetricReport r;
  r.rmse = rmse(y, mu);
  r.mae = mae(y, mu);
  r.score = score(y, mu, sigma2);
  r.coverage_90 = coverage(y, mu, sigma2, 0.9);
  return r;
}

TestFunction test_function(const std::string &name, Eigen::Index d,
                           int michalewicz_m) {
  TestFunction fn;
  fn.name = name;
  if (name == "herbie") {
    fn.dim = 2;
    fn.lo = Eigen::VectorXd::Constant(2, -2.0);
    fn.hi = Eigen::VectorXd::Constant(2, 2.0);
    fn.f = [](Point x) { return herbies_tooth(x); };
  } else if (name == "glee") {
    fn.dim = 2;
    fn.lo = Eigen::VectorXd::Constant(2, -2.0);
    fn.hi = Eigen::VectorXd::Constant(2, 6.0);
    fn.f = [](Point x) { return gramacy_lee_2d(x); };
  } else if (name == "michalewicz") {
    fn.dim = d > 0 ? d : 3;
    fn.lo = Eigen::VectorXd::Zero(fn.dim);
    fn.hi = Eigen::VectorXd::Constant(fn.dim, std::numbers::pi);
    fn.f = [michalewicz_m](Point x) { return michalewicz(x, michalewicz_m); };
  } else if (name == "sine") {
    fn.dim = 1;
    fn.lo = Eigen::VectorXd::Zero(1);
    fn.hi = Eigen::VectorXd::Constant(1, 20.0);
    fn.f = [](Point x) { return sine_wave(x[0]); };
  } else {
    throw std::invalid_argument("unknown function '" + name +
                                "' (expected herbie, glee, michalewicz or sine)");
  }
  return fn;
}

Eigen::VectorXd evaluate_function(const TestFunction &fn, const Design &X) {
  if (X.cols() != fn.dim)
    throw std::invalid_argument("evaluate_function: dimension mismatch");
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    y[i] = fn.f(row_span(X, i));
  return y;
}

} // namespace palm
