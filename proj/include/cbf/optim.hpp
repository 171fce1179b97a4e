#pragma once

#include <functional>

#include "cbf/matalg.hpp"

namespace cbf {

// Objective evaluated with its gradient. Returning false (or a non-finite
// value) marks the point infeasible; line search then backtracks.
using GradFn = std::function<bool(const VectorXd& x, double& f, VectorXd& g)>;

struct OptimOptions {
  int max_iter = 2000;
  double grad_tol = 1e-6;       // stop on max-norm of the gradient
  double step_tol = 1e-12;      // stop when the line search collapses
  int history = 8;              // L-BFGS memory
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_line_iter = 60;
};

struct OptimResult {
  VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;       // gradient tolerance reached
  bool line_search_failed = false;
  std::string message;
};

// Limited-memory BFGS minimisation with Armijo backtracking. Curvature pairs
// with non-positive s'y are skipped so the inverse-Hessian model stays
// positive definite.
OptimResult minimize_lbfgs(const GradFn& fn, const VectorXd& x0, const OptimOptions& opts = {});

// Central-difference gradient of a value-only objective; used to cross-check
// analytic gradients and to build Hessians of gradient maps.
VectorXd fd_gradient(const std::function<double(const VectorXd&)>& fn, const VectorXd& x,
                     double rel_step = 1e-6);

// Central-difference Jacobian of a vector map; column j holds d map / d x_j.
MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& map, const VectorXd& x,
                     double rel_step = 1e-5);

}  // namespace cbf
