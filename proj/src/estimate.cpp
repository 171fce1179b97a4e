#include "cbf/estimate.hpp"

#include <cmath>

namespace cbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelShape shape_from(const FitOptions& opts, int n) {
  ModelShape s;
  s.n = n;
  s.dyn = opts.dyn;
  s.P = opts.P;
  s.Q = opts.Q;
  s.K = opts.K;
  s.structure = opts.structure;
  s.family = opts.family;
  s.validate();
  return s;
}

ModelShape shape_of(const AnySpec& spec) {
  ModelShape s;
  if (const auto* c = std::get_if<CbfSpec>(&spec)) {
    s.n = c->n;
    s.dyn = Dynamics::bekk;
    s.P = c->P;
    s.Q = c->Q;
    s.K = c->K;
    s.structure = c->structure;
    s.family = std::isfinite(c->nu2) ? Family::matrix_f : Family::wishart;
  } else {
    const auto& h = std::get<HarSpec>(spec);
    s.n = h.n;
    s.dyn = Dynamics::har;
    s.structure = h.structure;
    s.family = std::isfinite(h.nu2) ? Family::matrix_f : Family::wishart;
  }
  return s;
}

double coef_rho(const DecodedTheta& p, int n) {
  MatrixXd ksum = MatrixXd::Zero(n * n, n * n);
  for (const auto& c : p.coef) ksum += kron(c, c);
  return spectral_radius(ksum);
}

// Smooth one-sided wall on the smallest eigenvalues of the implied intercept:
// zero for eigenvalues at or above the margin, growing like log^2 below it.
struct BarrierEval {
  double value = 0.0;
  MatrixXd grad;      // d value / d Omega (symmetric)
  bool feasible = true;
};

BarrierEval vt_barrier(const MatrixXd& omega, double margin) {
  BarrierEval out;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(omega);
  if (eig.info() != Eigen::Success) {
    out.feasible = false;
    return out;
  }
  const VectorXd& lam = eig.eigenvalues();
  if (lam(0) <= 0.0) {
    out.feasible = false;
    return out;
  }
  VectorXd dl = VectorXd::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < margin) {
      const double r = std::log(margin / lam(i));
      out.value += r * r;
      dl(i) = -2.0 * r / lam(i);
    }
  }
  if (out.value > 0.0) {
    out.grad = eig.eigenvectors() * dl.asDiagonal() * eig.eigenvectors().transpose();
  } else {
    out.grad = MatrixXd::Zero(omega.rows(), omega.cols());
  }
  return out;
}

struct RunOutcome {
  OptimResult opt;
  bool ok = false;
};

RunOutcome run_restarts(const GradFn& fn, const VectorXd& eta0, const FitOptions& opts,
                        int* restarts_used) {
  OptimOptions oo;
  oo.max_iter = opts.max_iter;
  oo.grad_tol = opts.grad_tol;
  RngStream jitter(opts.seed, 0x7e57a7ed);
  RunOutcome best;
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    VectorXd eta = eta0;
    if (attempt > 0) {
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) += 0.1 * jitter.normal();
    }
    // A jitter can land outside the feasible region; redraw a few times.
    {
      double f;
      VectorXd g;
      int tries = 0;
      while (!(fn(eta, f, g) && std::isfinite(f)) && tries++ < 10) {
        eta = eta0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) += 0.05 * jitter.normal();
      }
    }
    OptimResult r = minimize_lbfgs(fn, eta, oo);
    *restarts_used = attempt;
    if (!best.ok || (std::isfinite(r.f) && r.f < best.opt.f) ||
        (r.converged && !best.opt.converged && r.f <= best.opt.f + 1e-10)) {
      best.opt = std::move(r);
      best.ok = true;
    }
    if (best.opt.converged) break;
  }
  return best;
}

void fill_cov(FitResult& res, const MatrixXd& cov, bool pd) {
  res.cov = cov;
  res.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (!pd) res.flags.push_back("covariance_from_pseudo_inverse");
}

// Inverse of a symmetric matrix with a pseudo-inverse fallback for
// numerically semidefinite inputs.
MatrixXd sym_inverse(const MatrixXd& h, bool* pd, double* min_eig = nullptr) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (h + h.transpose()));
  const VectorXd& lam = eig.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  const double tol = std::max(1e-12 * lmax, 1e-300);
  if (min_eig) *min_eig = lam(0);
  *pd = lam(0) > tol;
  VectorXd inv = VectorXd::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (std::abs(lam(i)) > tol) inv(i) = 1.0 / lam(i);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

AnySpec FitResult::spec() const { return unpack(theta, shape); }

VectorXd moment_start(const MatrixSeries& series, const ModelShape& shape) {
  const MatrixXd ybar = sample_mean(series);
  const int n_a = shape.n_a_mats();
  const int n_b = shape.n_coef_mats() - n_a;
  const double a0 = 0.55 / std::sqrt(static_cast<double>(std::max(n_a, 1)));
  const double b0 = n_b > 0 ? 0.55 / std::sqrt(static_cast<double>(n_b)) : 0.0;
  std::vector<MatrixXd> coef;
  for (int c = 0; c < shape.n_coef_mats(); ++c) {
    const double v = c < n_a ? a0 : b0;
    coef.push_back(v * MatrixXd::Identity(shape.n, shape.n));
  }
  double load = n_a * a0 * a0 + n_b * b0 * b0;
  // Keep the start strictly inside the stationarity region.
  DecodedTheta probe;
  probe.coef = coef;
  while (coef_rho(probe, shape.n) > 0.9) {
    for (auto& c : probe.coef) c *= 0.9;
    load *= 0.81;
    coef = probe.coef;
  }
  const MatrixXd omega0 = (1.0 - load) * ybar;
  const double nu_s = shape.n == 1 ? 4.0 : 2.0 * shape.n;

  VectorXd theta(shape.dim());
  theta.head(shape.n_omega()) = vech(omega0);
  int at = shape.n_omega();
  for (const auto& c : coef) {
    if (shape.structure == Structure::full) {
      theta.segment(at, shape.n * shape.n) = vec(c);
      at += shape.n * shape.n;
    } else {
      theta.segment(at, shape.n) = c.diagonal();
      at += shape.n;
    }
  }
  theta(at++) = nu_s;
  if (shape.n_nu() == 2) theta(at++) = nu_s;
  return theta;
}

GradCheckResult grad_check(const LikelihoodContext& ctx, const VectorXd& theta) {
  GradCheckResult out;
  const ModelShape& shape = ctx.shape();
  const DecodedTheta p = decode_theta(theta, shape);
  LikGrad g = ctx.value_grad(p);
  if (!g.ok) throw std::runtime_error("grad_check: infeasible point");
  out.analytic = assemble_theta_grad(g, shape, true);
  out.fd = fd_gradient(
      [&](const VectorXd& th) { return ctx.value(decode_theta(th, shape)); }, theta);
  out.max_rel_err = 0.0;
  for (Eigen::Index i = 0; i < out.analytic.size(); ++i) {
    const double denom = std::max(1.0, std::abs(out.analytic(i)) + std::abs(out.fd(i)));
    out.max_rel_err = std::max(out.max_rel_err, std::abs(out.analytic(i) - out.fd(i)) / denom);
  }
  return out;
}

double neg_loglik(const MatrixSeries& series, const AnySpec& spec,
                  const std::optional<InitState>& init) {
  const ModelShape shape = shape_of(spec);
  const InitState st = init ? *init : sample_mean_init(series, shape.lags());
  LikelihoodContext ctx(series, shape, st);
  return ctx.value(decode_theta(pack(spec, shape), shape));
}

CovResult asymp_cov_mle(const LikelihoodContext& ctx, const VectorXd& theta) {
  const ModelShape& shape = ctx.shape();
  const auto grad_map = [&](const VectorXd& th) -> VectorXd {
    LikGrad g = ctx.value_grad(decode_theta(th, shape));
    if (!g.ok) throw std::runtime_error("asymptotic covariance: infeasible evaluation point");
    return assemble_theta_grad(g, shape, true);
  };
  CovResult out;
  MatrixXd h = fd_jacobian(grad_map, theta);
  out.hessian = 0.5 * (h + h.transpose());
  const MatrixXd hinv = sym_inverse(out.hessian, &out.pd);
  out.cov = hinv / ctx.T();
  return out;
}

MatrixXd vt_psi(const DecodedTheta& p, const ModelShape& shape) {
  const int n2 = shape.n * shape.n;
  MatrixXd asum = MatrixXd::Zero(n2, n2);
  MatrixXd bsum = MatrixXd::Zero(n2, n2);
  const int n_a = shape.n_a_mats();
  for (int c = 0; c < shape.n_coef_mats(); ++c) {
    const MatrixXd kk = kron(p.coef[static_cast<size_t>(c)], p.coef[static_cast<size_t>(c)]);
    if (c < n_a) {
      asum += kk;
    } else {
      bsum += kk;
    }
  }
  const MatrixXd lhs = MatrixXd::Identity(n2, n2) - asum - bsum;
  return lhs.partialPivLu().solve(MatrixXd::Identity(n2, n2) - bsum);
}

VtCovResult asymp_cov_vt(const LikelihoodContext& ctx, const VectorXd& zeta,
                         const MatrixXd& s_target) {
  const ModelShape& shape = ctx.shape();
  const int n = shape.n;
  const int n2 = n * n;
  const int dz = shape.dim_u() + shape.n_nu();
  const int T = ctx.T();

  const auto zeta_grad = [&](const VectorXd& z, const MatrixXd& s) -> VectorXd {
    DecodedTheta p = decode_zeta(z, shape);
    p.omega = vt_implied_omega(s, p.coef);
    LikGrad g = ctx.value_grad(p);
    if (!g.ok) throw std::runtime_error("asymptotic covariance: infeasible evaluation point");
    return assemble_theta_grad(vt_chain_adjust(g, p, s), shape, false);
  };

  MatrixXd j1 = fd_jacobian([&](const VectorXd& z) { return zeta_grad(z, s_target); }, zeta);
  j1 = 0.5 * (j1 + j1.transpose());

  // Cross Hessian against the targeting mean; symmetric perturbations keep
  // every evaluation inside the SPD cone and agree with the true partials
  // once contracted against vec moments of a symmetric series.
  MatrixXd j2(dz, n2);
  const double s_scale = s_target.diagonal().mean();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double hstep = 1e-5 * std::max(1.0, s_scale);
      MatrixXd e = MatrixXd::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = 0.5;
        e(j, i) = 0.5;
      }
      const VectorXd gp = zeta_grad(zeta, s_target + hstep * e);
      const VectorXd gm = zeta_grad(zeta, s_target - hstep * e);
      j2.col(j * n + i) = (gp - gm) / (2.0 * hstep);
    }
  }

  DecodedTheta p = decode_zeta(zeta, shape);
  p.omega = vt_implied_omega(s_target, p.coef);
  const MatrixXd psi = vt_psi(p, shape);
  const std::vector<MatrixXd> sig = ctx.sigma_path(p);
  const MatrixXd scores = ctx.per_t_scores(p, true, s_target);

  MatrixXd wmat(T, n2 + dz);
  for (int t = 0; t < T; ++t) {
    const MatrixXd resid = ctx.series()[t].m() - sig[static_cast<size_t>(t)];
    wmat.row(t).head(n2) = (psi * vec(resid)).transpose();
    wmat.row(t).tail(dz) = scores.row(t);
  }
  const MatrixXd eww = (wmat.transpose() * wmat) / T;

  VtCovResult out;
  const MatrixXd j1inv = sym_inverse(j1, &out.pd);
  MatrixXd m = MatrixXd::Zero(n2 + dz, n2 + dz);
  m.topLeftCorner(n2, n2).setIdentity();
  m.bottomLeftCorner(dz, n2) = -j1inv * j2;
  m.bottomRightCorner(dz, dz) = -j1inv;
  out.influence = wmat * m.transpose();
  out.joint = (m * eww * m.transpose()) / T;

  // Delta method to packed-theta order: omega responds to both the target
  // and the coefficients, while (coefficients, nu) pass through.
  MatrixXd d = MatrixXd::Zero(shape.dim(), n2 + dz);
  std::vector<std::pair<int, int>> vech_idx;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) vech_idx.emplace_back(i, j);
  for (int c = 0; c < n2; ++c) {
    const int ci = c % n, cj = c / n;
    MatrixXd e = MatrixXd::Zero(n, n);
    e(ci, cj) = 1.0;
    MatrixXd dom = e;
    for (const auto& cm : p.coef) dom -= cm * e * cm.transpose();
    for (int r = 0; r < shape.n_omega(); ++r) {
      d(r, c) = dom(vech_idx[static_cast<size_t>(r)].first, vech_idx[static_cast<size_t>(r)].second);
    }
  }
  const int pc = shape.per_coef();
  for (int cm = 0; cm < shape.n_coef_mats(); ++cm) {
    for (int e_idx = 0; e_idx < pc; ++e_idx) {
      MatrixXd dc = MatrixXd::Zero(n, n);
      if (shape.structure == Structure::full) {
        dc(e_idx % n, e_idx / n) = 1.0;
      } else {
        dc(e_idx, e_idx) = 1.0;
      }
      const MatrixXd& cmat = p.coef[static_cast<size_t>(cm)];
      MatrixXd dom = -(dc * s_target * cmat.transpose() + cmat * s_target * dc.transpose());
      const int col = n2 + cm * pc + e_idx;
      for (int r = 0; r < shape.n_omega(); ++r) {
        d(r, col) = dom(vech_idx[static_cast<size_t>(r)].first, vech_idx[static_cast<size_t>(r)].second);
      }
    }
  }
  d.block(shape.n_omega(), n2, dz, dz).setIdentity();
  out.cov_theta = d * out.joint * d.transpose();
  return out;
}

FitResult fit_mle(const MatrixSeries& series, const FitOptions& opts) {
  const ModelShape shape = shape_from(opts, series.n);
  if (series.T() <= opts.min_obs_factor * shape.dim()) {
    throw std::invalid_argument("fit: series too short for the requested parameter count");
  }
  const InitState init = opts.init ? *opts.init : sample_mean_init(series, shape.lags());
  LikelihoodContext ctx(series, shape, init);

  const GradFn fn = [&](const VectorXd& eta, double& f, VectorXd& g) -> bool {
    const VectorXd theta = to_natural(eta, shape);
    LikGrad lg = ctx.value_grad(decode_theta(theta, shape));
    if (!lg.ok) return false;
    f = lg.value;
    g = assemble_eta_grad(lg, shape, eta, true);
    return true;
  };

  FitResult res;
  res.shape = shape;
  res.init = init;
  const VectorXd eta0 = to_unconstrained(moment_start(series, shape), shape);
  RunOutcome run = run_restarts(fn, eta0, opts, &res.restarts_used);
  if (!run.ok || !std::isfinite(run.opt.f)) {
    throw std::runtime_error("fit: optimizer failed to find a feasible point");
  }
  res.theta = to_natural(run.opt.x, shape);
  canonicalize_signs(res.theta, shape);
  res.nll = run.opt.f;
  res.loglik = -res.nll * series.T();
  res.converged = run.opt.converged;
  res.iterations = run.opt.iterations;
  res.evaluations = run.opt.evaluations;
  res.grad_norm = run.opt.grad.size() ? run.opt.grad.cwiseAbs().maxCoeff() : kInf;
  if (!res.converged) res.flags.push_back("not_converged:" + run.opt.message);
  res.s_target = sample_mean(series);
  res.stationarity_rho = coef_rho(decode_theta(res.theta, shape), shape.n);
  if (res.stationarity_rho >= 1.0) res.flags.push_back("nonstationary_fit");
  if (opts.compute_cov) {
    CovResult cov = asymp_cov_mle(ctx, res.theta);
    fill_cov(res, cov.cov, cov.pd);
  }
  return res;
}

FitResult fit_vt(const MatrixSeries& series, const FitOptions& opts) {
  const ModelShape shape = shape_from(opts, series.n);
  const int dz = shape.dim_u() + shape.n_nu();
  if (series.T() <= opts.min_obs_factor * shape.dim()) {
    throw std::invalid_argument("fit: series too short for the requested parameter count");
  }
  const InitState init = opts.init ? *opts.init : sample_mean_init(series, shape.lags());
  LikelihoodContext ctx(series, shape, init);
  const MatrixXd s_target = sample_mean(series);
  const double margin = 1e-6 * s_target.trace() / shape.n;

  const GradFn fn = [&](const VectorXd& eta, double& f, VectorXd& g) -> bool {
    const VectorXd zeta = vt_to_natural(eta, shape);
    DecodedTheta p = decode_zeta(zeta, shape);
    p.omega = vt_implied_omega(s_target, p.coef);
    const BarrierEval bar = vt_barrier(p.omega, margin);
    if (!bar.feasible) return false;
    LikGrad lg = ctx.value_grad(p);
    if (!lg.ok) return false;
    f = lg.value + bar.value;
    lg.g_omega += bar.grad;
    lg = vt_chain_adjust(lg, p, s_target);
    g = assemble_eta_grad(lg, shape, eta, false);
    return true;
  };

  // Starting point: the moment-matched coefficients, shrunk toward zero until
  // the implied intercept clears the barrier margin.
  FitResult res;
  res.shape = shape;
  res.init = init;
  res.vt = true;
  res.s_target = s_target;
  const VectorXd theta0 = moment_start(series, shape);
  VectorXd zeta0 = theta0.tail(dz);
  for (int shrink = 0; shrink < 60; ++shrink) {
    DecodedTheta p = decode_zeta(zeta0, shape);
    p.omega = vt_implied_omega(s_target, p.coef);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p.omega);
    if (eig.eigenvalues()(0) > margin) break;
    zeta0.head(shape.dim_u()) *= 0.7;
  }
  const VectorXd eta0 = vt_to_unconstrained(zeta0, shape);
  RunOutcome run = run_restarts(fn, eta0, opts, &res.restarts_used);
  if (!run.ok || !std::isfinite(run.opt.f)) {
    throw std::runtime_error("fit: optimizer failed to find a feasible point");
  }
  VectorXd zeta_hat = vt_to_natural(run.opt.x, shape);
  {
    // Canonicalize coefficient signs within the zeta layout.
    VectorXd full(shape.dim());
    full.head(shape.n_omega()).setZero();
    full.tail(dz) = zeta_hat;
    canonicalize_signs(full, shape);
    zeta_hat = full.tail(dz);
  }
  DecodedTheta p_hat = decode_zeta(zeta_hat, shape);
  p_hat.omega = vt_implied_omega(s_target, p_hat.coef);
  VectorXd theta(shape.dim());
  theta.head(shape.n_omega()) = vech(p_hat.omega);
  theta.tail(dz) = zeta_hat;
  res.theta = theta;
  res.nll = run.opt.f;
  res.loglik = -ctx.value(p_hat) * series.T();
  res.converged = run.opt.converged;
  res.iterations = run.opt.iterations;
  res.evaluations = run.opt.evaluations;
  res.grad_norm = run.opt.grad.size() ? run.opt.grad.cwiseAbs().maxCoeff() : kInf;
  if (!res.converged) res.flags.push_back("not_converged:" + run.opt.message);
  res.stationarity_rho = coef_rho(p_hat, shape.n);
  if (res.stationarity_rho >= 1.0) res.flags.push_back("nonstationary_fit");
  if (opts.compute_cov) {
    VtCovResult cov = asymp_cov_vt(ctx, zeta_hat, s_target);
    res.joint_cov_vt = cov.joint;
    fill_cov(res, cov.cov_theta, cov.pd);
  }
  return res;
}

}  // namespace cbf
