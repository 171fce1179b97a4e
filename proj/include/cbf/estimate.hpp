#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbf/likelihood.hpp"
#include "cbf/model.hpp"
#include "cbf/optim.hpp"
#include "cbf/params.hpp"
#include "cbf/rng.hpp"

namespace cbf {

struct FitOptions {
  Family family = Family::matrix_f;
  Dynamics dyn = Dynamics::bekk;
  Structure structure = Structure::diagonal;
  int P = 1;
  int Q = 1;
  int K = 1;
  double grad_tol = 1e-6;       // relative gradient tolerance
  int max_iter = 2000;
  int restarts = 5;             // jittered restarts after the moment-matched start
  std::uint64_t seed = 1;       // jitter stream
  int min_obs_factor = 5;       // require T > factor * parameter count
  bool compute_cov = true;
  std::optional<InitState> init;  // default: pre-sample state pinned at the sample mean
};

struct FitResult {
  ModelShape shape;
  VectorXd theta;               // packed natural parameters (omega, coefficients, nu)
  double nll = std::numeric_limits<double>::infinity();   // mean per-observation value
  double loglik = -std::numeric_limits<double>::infinity();  // total log-likelihood
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  int restarts_used = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  MatrixXd cov;                 // asymptotic covariance of theta (packed order)
  VectorXd se;                  // sqrt of cov diagonal
  bool vt = false;
  MatrixXd s_target;            // sample mean used by the two-step variant
  MatrixXd joint_cov_vt;        // VT only: asy. cov of (vec target, zeta) divided by T
  double stationarity_rho = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> flags;
  InitState init;

  AnySpec spec() const;         // decoded model specification
};

// Full maximum likelihood over (omega, coefficients, nu).
FitResult fit_mle(const MatrixSeries& series, const FitOptions& opts);

// Two-step variance-targeted fit: the intercept is implied by the sample mean
// and only (coefficients, nu) are optimized.
FitResult fit_vt(const MatrixSeries& series, const FitOptions& opts);

// Mean per-observation negative log-likelihood of a fully specified model.
double neg_loglik(const MatrixSeries& series, const AnySpec& spec,
                  const std::optional<InitState>& init = std::nullopt);

// Asymptotic covariance of the MLE: inverse of the finite-difference Hessian
// of the mean objective, divided by T. Non-PD Hessians fall back to a
// pseudo-inverse and set `pd` false.
struct CovResult {
  MatrixXd cov;
  MatrixXd hessian;
  bool pd = true;
};
CovResult asymp_cov_mle(const LikelihoodContext& ctx, const VectorXd& theta);

// Joint asymptotic covariance of the two-step estimator (vec of the targeting
// mean, then zeta), divided by T; built from the outer product of w_t and the
// two cross Hessians of the concentrated objective.
struct VtCovResult {
  MatrixXd joint;               // (n^2 + dim zeta) square
  MatrixXd cov_theta;           // delta-method covariance in packed theta order
  MatrixXd influence;           // T x (n^2 + dim zeta): rows are the per-
                                // observation estimator influences, so that
                                // sqrt(T)(theta_v_hat - theta_v0) ~ their
                                // normalized sum and joint = infl'infl / T^2
  bool pd = true;
};
VtCovResult asymp_cov_vt(const LikelihoodContext& ctx, const VectorXd& zeta,
                         const MatrixXd& s_target);

// Map (I - sum A* - sum B*)^{-1} (I - sum B*) used by the targeting CLT.
MatrixXd vt_psi(const DecodedTheta& p, const ModelShape& shape);

// Maximum relative disagreement between the analytic gradient and a central
// finite difference of the objective at `theta`; used as a correctness guard.
struct GradCheckResult {
  double max_rel_err = std::numeric_limits<double>::quiet_NaN();
  VectorXd analytic;
  VectorXd fd;
};
GradCheckResult grad_check(const LikelihoodContext& ctx, const VectorXd& theta);

// Moment-matched starting point in natural parameters.
VectorXd moment_start(const MatrixSeries& series, const ModelShape& shape);

}  // namespace cbf
