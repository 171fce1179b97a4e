#include "cbf/optim.hpp"

#include <cmath>
#include <deque>

namespace cbf {

namespace {

struct Pair {
  VectorXd s;
  VectorXd y;
  double rho;
};

}  // namespace

OptimResult minimize_lbfgs(const GradFn& fn, const VectorXd& x0, const OptimOptions& opts) {
  OptimResult res;
  const Eigen::Index d = x0.size();
  VectorXd x = x0, g(d), x_new(d), g_new(d), dir(d);
  double f = 0.0;
  ++res.evaluations;
  if (!fn(x, f, g) || !std::isfinite(f)) {
    res.message = "infeasible starting point";
    res.x = x;
    return res;
  }

  std::deque<Pair> mem;
  std::vector<double> alpha(static_cast<size_t>(opts.history));
  double gamma = 1.0;

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    if (g.cwiseAbs().maxCoeff() <= opts.grad_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for dir = -H g.
    dir = -g;
    int mi = static_cast<int>(mem.size()) - 1;
    for (auto r = mem.rbegin(); r != mem.rend(); ++r, --mi) {
      alpha[static_cast<size_t>(mi)] = r->rho * r->s.dot(dir);
      dir -= alpha[static_cast<size_t>(mi)] * r->y;
    }
    dir *= gamma;
    mi = 0;
    for (auto it2 = mem.begin(); it2 != mem.end(); ++it2, ++mi) {
      const double beta = it2->rho * it2->y.dot(dir);
      dir += (alpha[static_cast<size_t>(mi)] - beta) * it2->s;
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // model lost descent property: restart from steepest descent
      mem.clear();
      gamma = 1.0;
      dir = -g;
      slope = g.dot(dir);
    }

    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_iter; ++ls) {
      x_new = x + step * dir;
      ++res.evaluations;
      if (fn(x_new, f_new, g_new) && std::isfinite(f_new) &&
          f_new <= f + opts.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= opts.backtrack;
      if (step * dir.cwiseAbs().maxCoeff() < opts.step_tol) break;
    }
    if (!accepted) {
      res.line_search_failed = true;
      res.message = "line search failed";
      break;
    }

    VectorXd s = x_new - x;
    VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm() && sy > 0.0) {
      if (static_cast<int>(mem.size()) == opts.history) mem.pop_front();
      mem.push_back({std::move(s), std::move(yv), 1.0 / sy});
      gamma = sy / mem.back().y.squaredNorm();
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }

  res.x = std::move(x);
  res.f = f;
  res.grad = std::move(g);
  if (res.converged && res.message.empty()) res.message = "gradient tolerance reached";
  if (!res.converged && !res.line_search_failed && res.message.empty()) {
    res.message = "iteration limit reached";
  }
  return res;
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& fn, const VectorXd& x,
                     double rel_step) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hstep = rel_step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + hstep;
    const double fp = fn(xp);
    xp(i) = x(i) - hstep;
    const double fm = fn(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * hstep);
  }
  return g;
}

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& map, const VectorXd& x,
                     double rel_step) {
  VectorXd xp = x;
  MatrixXd jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double hstep = rel_step * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + hstep;
    const VectorXd fp = map(xp);
    xp(j) = x(j) - hstep;
    const VectorXd fm = map(xp);
    xp(j) = x(j);
    if (jac.size() == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * hstep);
  }
  return jac;
}

}  // namespace cbf
