#include "palm/optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace palm {

namespace {

// Largest coordinate change of a single quasi-Newton step.
constexpr double kMaxStep = 2.0;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;

std::vector<bool> active_set(const Eigen::VectorXd &x, const Eigen::VectorXd &g,
                             const BoxBounds &b) {
  std::vector<bool> active(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lo = x[i] <= b.lo[i] && g[i] > 0.0;
    const bool at_hi = x[i] >= b.hi[i] && g[i] < 0.0;
    active[static_cast<std::size_t>(i)] = at_lo || at_hi;
  }
  return active;
}

} // namespace

OptimResult minimize_projected_bfgs(const ValueAndGradient &f,
                                    const Eigen::VectorXd &x0,
                                    const BoxBounds &bounds, int max_iter,
                                    double grad_tol) {
  const Eigen::Index n = x0.size();
  if (bounds.lo.size() != n || bounds.hi.size() != n)
    throw std::invalid_argument("minimize_projected_bfgs: bounds mismatch");

  OptimResult res;
  res.x = bounds.clamp(x0);
  Eigen::VectorXd g(n);
  res.value = f(res.x, &g);
  res.evaluations = 1;
  if (!std::isfinite(res.value))
    return res;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool H_is_identity = true;

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const auto active = active_set(res.x, g, bounds);
    double pg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!active[static_cast<std::size_t>(i)])
        pg = std::max(pg, std::abs(g[i]));
    if (pg < grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = -(H * g);
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[static_cast<std::size_t>(i)])
        d[i] = 0.0;
    if (g.dot(d) >= 0.0) {
      H.setIdentity();
      H_is_identity = true;
      d = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[static_cast<std::size_t>(i)])
          d[i] = 0.0;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > kMaxStep)
      d *= kMaxStep / dmax;

    bool accepted = false;
    Eigen::VectorXd x_new, g_new(n);
    double f_new = 0.0;
    double t = 1.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
      x_new = bounds.clamp(res.x + t * d);
      const Eigen::VectorXd s = x_new - res.x;
      if (s.cwiseAbs().maxCoeff() == 0.0)
        break;
      f_new = f(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.value + kArmijo * g.dot(s)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!H_is_identity) {
        H.setIdentity();
        H_is_identity = true;
        continue;
      }
      break;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
      H_is_identity = false;
    }
    res.x = x_new;
    res.value = f_new;
    g = g_new;
  }
  return res;
}

namespace {

struct NelderMeadContext {
  const Objective *f;
  const BoxBounds *bounds;
  int evaluations = 0;
};

double nm_trampoline(const gsl_vector *v, void *params) {
  auto *ctx = static_cast<NelderMeadContext *>(params);
  Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i)
    x[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  ++ctx->evaluations;
  const double val = (*ctx->f)(ctx->bounds->clamp(x));
  return std::isfinite(val) ? -val : std::numeric_limits<double>::max();
}

struct GslVectorDeleter {
  void operator()(gsl_vector *v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer *m) const {
    gsl_multimin_fminimizer_free(m);
  }
};

} // namespace

OptimResult maximize_nelder_mead(const Objective &f, const Eigen::VectorXd &x0,
                                 const BoxBounds &bounds, int max_evals,
                                 double initial_step_fraction) {
  const auto n = static_cast<std::size_t>(x0.size());
  OptimResult res;
  res.x = bounds.clamp(x0);
  if (n == 0)
    throw std::invalid_argument("maximize_nelder_mead: empty start point");

  NelderMeadContext ctx{&f, &bounds};
  gsl_multimin_function fn{&nm_trampoline, n, &ctx};

  std::unique_ptr<gsl_vector, GslVectorDeleter> start(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    gsl_vector_set(start.get(), i, res.x[ii]);
    double width = initial_step_fraction * (bounds.hi[ii] - bounds.lo[ii]);
    if (!(width > 0.0))
      width = 1e-8;
    // step toward the interior so the initial simplex stays in the box
    if (res.x[ii] + width > bounds.hi[ii])
      width = -width;
    gsl_vector_set(step.get(), i, width);
  }

  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> solver(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  gsl_error_handler_t *old_handler = gsl_set_error_handler_off();
  gsl_multimin_fminimizer_set(solver.get(), &fn, start.get(), step.get());

  while (ctx.evaluations < max_evals) {
    ++res.iterations;
    if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS)
      break;
    const double size = gsl_multimin_fminimizer_size(solver.get());
    if (gsl_multimin_test_size(size, 1e-10) == GSL_SUCCESS) {
      res.converged = true;
      break;
    }
  }
  gsl_set_error_handler(old_handler);

  const gsl_vector *best = gsl_multimin_fminimizer_x(solver.get());
  Eigen::VectorXd x(x0.size());
  for (std::size_t i = 0; i < n; ++i)
    x[static_cast<Eigen::Index>(i)] = gsl_vector_get(best, i);
  res.x = bounds.clamp(x);
  res.value = -gsl_multimin_fminimizer_minimum(solver.get());
  res.evaluations = ctx.evaluations;
  return res;
}

} // namespace palm
