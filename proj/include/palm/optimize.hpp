#pragma once

#include <Eigen/Dense>

#include <functional>

namespace palm {

struct BoxBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd clamp(const Eigen::VectorXd &x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Objective returning f(x) and, when `grad` is non-null, its gradient.
/// Non-finite values are treated as infeasible by the line search.
using ValueAndGradient =
    std::function<double(const Eigen::VectorXd &x, Eigen::VectorXd *grad)>;

/// Box-constrained quasi-Newton minimization: BFGS inverse-Hessian updates on
/// the free variables, projection onto the box, Armijo backtracking.
/// Converged when the projected gradient's max-norm falls below `grad_tol`.
OptimResult minimize_projected_bfgs(const ValueAndGradient &f,
                                    const Eigen::VectorXd &x0,
                                    const BoxBounds &bounds, int max_iter,
                                    double grad_tol);

using Objective = std::function<double(const Eigen::VectorXd &x)>;

/// Derivative-free maximization of f over a box by Nelder-Mead (GSL's
/// nmsimplex2), with iterates projected into the box. The start point is a
/// simplex vertex, so the result is never worse than f(x0).
OptimResult maximize_nelder_mead(const Objective &f, const Eigen::VectorXd &x0,
                                 const BoxBounds &bounds, int max_evals,
                                 double initial_step_fraction = 0.25);

} // namespace palm
