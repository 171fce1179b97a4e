#include "cbf/diagnose.hpp"

#include <cmath>

#include "cbf/specfun.hpp"

namespace cbf {

namespace {

MatrixXd inv_sqrt_spd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success || eig.eigenvalues()(0) <= 0.0) {
    throw std::runtime_error("diagnose: conditional covariance not positive definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

// z residual matrix for a parameter point, re-running the covariance filter.
MatrixXd residuals_at(const MatrixSeries& series, const ModelShape& shape, const InitState& init,
                      const DecodedTheta& p) {
  LikelihoodContext ctx(series, shape, init);
  return scale_residuals(series, ctx.sigma_path(p));
}

// Averaged cross moments between lagged residuals and residual sensitivities:
// row j is (1/(T-l)) sum_{t>l} z_{t-j}' dz_t for one parameter coordinate.
void accumulate_gbar(MatrixXd& gbar, int col, const MatrixXd& z, const MatrixXd& dz, int lags) {
  const int T = static_cast<int>(z.rows());
  for (int j = 1; j <= lags; ++j) {
    double acc = 0.0;
    for (int t = lags; t < T; ++t) acc += z.row(t - j).dot(dz.row(t));
    gbar(j - 1, col) = acc / (T - lags);
  }
}

// Assembles the statistic from the residuals, the averaged residual
// sensitivities `gbar`, the estimator covariance `mid` = Avar(sqrt(T)
// theta_err), and the per-observation estimator influences `phi` (T rows).
// sqrt(T) V_l is asymptotically the normalized sum of the composed terms
// u_t = b_t + G phi_t with b_{t,j} = z_t' z_{t-j}, so the default variance
// estimate is the sample covariance of u_t. That keeps vhat positive
// semidefinite by construction and self-normalizes against heavy-tailed
// residuals: the additive expansion Var(b) I + G Avar G' + cross-couplings
// can lose an eigenvalue to sampling noise because the coupling nearly
// cancels the G block, which this joint form cannot. The scalar_square
// reading keeps the simpler expansion without the influence coupling.
PortmanteauResult finish_test(const MatrixXd& z, int lags, const MatrixXd& gbar,
                              const MatrixXd& mid, const MatrixXd& phi,
                              const DiagnoseOptions& opts) {
  const int T = static_cast<int>(z.rows());
  PortmanteauResult out;
  out.lags = lags;
  out.autocovs = inner_autocovs(z, lags);
  if (opts.reading == InnerVarianceReading::scalar_square) {
    const double m = z.rowwise().squaredNorm().mean();
    out.vhat = (m * m) * MatrixXd::Identity(lags, lags);
    out.vhat.noalias() += gbar * mid * gbar.transpose();
  } else {
    const int used = T - lags;
    MatrixXd u = phi.bottomRows(used) * gbar.transpose();
    for (int t = lags; t < T; ++t)
      for (int j = 1; j <= lags; ++j) u(t - lags, j - 1) += z.row(t).dot(z.row(t - j));
    const Eigen::RowVectorXd ubar = u.colwise().mean();
    u.rowwise() -= ubar;
    out.vhat = u.transpose() * u / used;
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out.vhat);
  const VectorXd& lam = eig.eigenvalues();
  const double tol = 1e-10 * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  int rank = 0;
  VectorXd inv = VectorXd::Zero(lags);
  for (int i = 0; i < lags; ++i) {
    if (lam(i) > tol) {
      inv(i) = 1.0 / lam(i);
      ++rank;
    }
  }
  out.pinv_used = rank < lags;
  out.dof = rank;
  if (out.pinv_used) out.flags.push_back("variance_rank_deficient");
  const MatrixXd vinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  out.stat = T * out.autocovs.dot(vinv * out.autocovs);
  out.pvalue =
      out.dof > 0 ? chisq_sf(out.stat, out.dof) : std::numeric_limits<double>::quiet_NaN();
  if (out.dof == 0) out.flags.push_back("degenerate_variance");
  return out;
}

int max_lag(const std::vector<int>& lags) {
  if (lags.empty()) throw std::invalid_argument("diagnose: no lag counts requested");
  int m = 0;
  for (int l : lags) {
    if (l < 1) throw std::invalid_argument("diagnose: lag counts must be >= 1");
    m = std::max(m, l);
  }
  return m;
}

}  // namespace

MatrixXd scale_residuals(const MatrixSeries& series, const std::vector<MatrixXd>& sigma) {
  const int T = series.T();
  if (static_cast<int>(sigma.size()) != T) {
    throw std::invalid_argument("diagnose: path length does not match the series");
  }
  const int n = series.n;
  MatrixXd z(T, n * n);
  MatrixXd r(n, n);
  for (int t = 0; t < T; ++t) {
    const MatrixXd isq = inv_sqrt_spd(sigma[static_cast<size_t>(t)]);
    r.noalias() = isq * series[t].m() * isq;
    r -= MatrixXd::Identity(n, n);
    z.row(t) = Eigen::Map<const VectorXd>(r.data(), n * n).transpose();
  }
  return z;
}

VectorXd inner_autocovs(const MatrixXd& z, int lags) {
  const int T = static_cast<int>(z.rows());
  if (lags < 1 || lags >= T) throw std::invalid_argument("diagnose: invalid lag count");
  VectorXd v = VectorXd::Zero(lags);
  for (int t = lags; t < T; ++t) {
    for (int j = 1; j <= lags; ++j) v(j - 1) += z.row(t).dot(z.row(t - j));
  }
  return v / T;
}

std::vector<PortmanteauResult> pi_tests(const MatrixSeries& series, const FitResult& fit,
                                        const std::vector<int>& lags,
                                        const DiagnoseOptions& opts) {
  if (fit.vt) throw std::invalid_argument("pi_test: fit came from the two-step estimator");
  if (fit.cov.size() == 0) throw std::invalid_argument("pi_test: fit lacks a covariance matrix");
  const ModelShape& shape = fit.shape;
  const int T = series.T();
  max_lag(lags);
  const DecodedTheta p = decode_theta(fit.theta, shape);
  const MatrixXd z = residuals_at(series, shape, fit.init, p);

  // Residual sensitivities by central differences over the dynamic
  // parameters; the residual transform does not involve nu, so those columns
  // stay zero.
  const int d = shape.dim();
  std::vector<MatrixXd> dz_all;
  dz_all.reserve(static_cast<size_t>(shape.dim_gamma()));
  for (int m = 0; m < shape.dim_gamma(); ++m) {
    const double h = opts.fd_step * std::max(1.0, std::abs(fit.theta(m)));
    VectorXd th = fit.theta;
    th(m) += h;
    const MatrixXd zp = residuals_at(series, shape, fit.init, decode_theta(th, shape));
    th(m) = fit.theta(m) - h;
    const MatrixXd zm = residuals_at(series, shape, fit.init, decode_theta(th, shape));
    dz_all.push_back((zp - zm) / (2.0 * h));
  }

  // Per-observation influence of the estimator: theta_err ~ -O^{-1} score_t.
  LikelihoodContext ctx(series, shape, fit.init);
  const MatrixXd mid = T * fit.cov;
  const MatrixXd phi =
      -(ctx.per_t_scores(p, false, MatrixXd::Zero(shape.n, shape.n)) * mid);

  std::vector<PortmanteauResult> out;
  for (int l : lags) {
    MatrixXd gbar = MatrixXd::Zero(l, d);
    for (int m = 0; m < shape.dim_gamma(); ++m) {
      accumulate_gbar(gbar, m, z, dz_all[static_cast<size_t>(m)], l);
    }
    out.push_back(finish_test(z, l, gbar, mid, phi, opts));
  }
  return out;
}

PortmanteauResult pi_test(const MatrixSeries& series, const FitResult& fit, int lags,
                          const DiagnoseOptions& opts) {
  return pi_tests(series, fit, std::vector<int>{lags}, opts).front();
}

std::vector<PortmanteauResult> pi_v_tests(const MatrixSeries& series, const FitResult& fit,
                                          const std::vector<int>& lags,
                                          const DiagnoseOptions& opts) {
  if (!fit.vt) throw std::invalid_argument("pi_v_test: fit is not variance-targeted");
  if (fit.joint_cov_vt.size() == 0) {
    throw std::invalid_argument("pi_v_test: fit lacks the two-step joint covariance");
  }
  const ModelShape& shape = fit.shape;
  const int n = shape.n;
  const int n2 = n * n;
  const int dz_dim = shape.dim_u() + shape.n_nu();
  const int T = series.T();
  max_lag(lags);
  const VectorXd zeta = fit.theta.tail(dz_dim);
  DecodedTheta p = decode_zeta(zeta, shape);
  p.omega = vt_implied_omega(fit.s_target, p.coef);
  const MatrixXd z = residuals_at(series, shape, fit.init, p);

  const auto residuals_for = [&](const VectorXd& zt, const MatrixXd& s) {
    DecodedTheta q = decode_zeta(zt, shape);
    q.omega = vt_implied_omega(s, q.coef);
    return residuals_at(series, shape, fit.init, q);
  };

  // Sensitivities to the targeting mean use symmetric perturbations, which
  // agree with the true partials once contracted against the symmetric-
  // duplicated joint covariance.
  std::vector<MatrixXd> dz_all(static_cast<size_t>(n2 + dz_dim));
  const double s_scale = fit.s_target.diagonal().mean();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double h = opts.fd_step * std::max(1.0, s_scale);
      MatrixXd e = MatrixXd::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = 0.5;
        e(j, i) = 0.5;
      }
      const MatrixXd zp = residuals_for(zeta, fit.s_target + h * e);
      const MatrixXd zm = residuals_for(zeta, fit.s_target - h * e);
      dz_all[static_cast<size_t>(j * n + i)] = (zp - zm) / (2.0 * h);
    }
  }
  for (int m = 0; m < shape.dim_u(); ++m) {
    const double h = opts.fd_step * std::max(1.0, std::abs(zeta(m)));
    VectorXd zt = zeta;
    zt(m) += h;
    const MatrixXd zp = residuals_for(zt, fit.s_target);
    zt(m) = zeta(m) - h;
    const MatrixXd zm = residuals_for(zt, fit.s_target);
    dz_all[static_cast<size_t>(n2 + m)] = (zp - zm) / (2.0 * h);
  }
  // nu coordinates do not move the residual transform.
  for (int m = shape.dim_u(); m < dz_dim; ++m) {
    dz_all[static_cast<size_t>(n2 + m)] = MatrixXd::Zero(T, n2);
  }

  // Recompute the two-step covariance here to also obtain the matched
  // per-observation influences (targeting-mean block plus corrected scores).
  LikelihoodContext ctx(series, shape, fit.init);
  const VtCovResult vcov = asymp_cov_vt(ctx, zeta, fit.s_target);
  const MatrixXd mid = T * vcov.joint;

  std::vector<PortmanteauResult> out;
  for (int l : lags) {
    MatrixXd gbar = MatrixXd::Zero(l, n2 + dz_dim);
    for (int m = 0; m < n2 + dz_dim; ++m) {
      accumulate_gbar(gbar, m, z, dz_all[static_cast<size_t>(m)], l);
    }
    out.push_back(finish_test(z, l, gbar, mid, vcov.influence, opts));
  }
  return out;
}

PortmanteauResult pi_v_test(const MatrixSeries& series, const FitResult& fit, int lags,
                            const DiagnoseOptions& opts) {
  return pi_v_tests(series, fit, std::vector<int>{lags}, opts).front();
}

}  // namespace cbf
