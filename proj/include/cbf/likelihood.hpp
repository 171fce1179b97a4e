#pragma once

#include <limits>

#include "cbf/params.hpp"

namespace cbf {

// Natural parameters in layout order. `coef` holds A_11..A_KP then B_11..B_KQ
// (bekk) or Ad, Aw, Am (har). Wishart-family parameters carry nu2 = +inf.
struct DecodedTheta {
  MatrixXd omega;
  std::vector<MatrixXd> coef;
  double nu1 = 0.0;
  double nu2 = 0.0;
};

DecodedTheta decode_theta(const VectorXd& theta, const ModelShape& shape);
// VT layout zeta = (coefficients, nu); omega is left empty for the caller
// (variance targeting implies it from the mean target).
DecodedTheta decode_zeta(const VectorXd& zeta, const ModelShape& shape);

// Omega implied by variance targeting: S - sum_c C_c S C_c'.
MatrixXd vt_implied_omega(const MatrixXd& s_target, const std::vector<MatrixXd>& coef);

// Value and free-matrix adjoints of the average negative log-likelihood:
// d value = tr(g_omega dOmega) + sum_c tr(g_coef[c]' dC_c) + g_nu1 dnu1 + ...
struct LikGrad {
  double value = std::numeric_limits<double>::infinity();
  bool ok = false;
  MatrixXd g_omega;
  std::vector<MatrixXd> g_coef;
  double g_nu1 = 0.0;
  double g_nu2 = 0.0;
};

// Average negative log-likelihood (1/T) sum_t l_t of the conditional
// matrix-F or Wishart model over BEKK or HAR dynamics, with constant
// pre-sample state. Not thread-safe: each worker should own its context.
class LikelihoodContext {
 public:
  LikelihoodContext(const MatrixSeries& series, ModelShape shape, InitState init);

  const ModelShape& shape() const { return shape_; }
  const InitState& init() const { return init_; }
  const MatrixSeries& series() const { return *series_; }
  int T() const { return T_; }
  double mean_logdet_y() const { return mean_ld_y_; }

  // +inf when the filter or a factorization degenerates.
  double value(const DecodedTheta& p) const;
  LikGrad value_grad(const DecodedTheta& p) const;
  VectorXd per_t_terms(const DecodedTheta& p) const;
  std::vector<MatrixXd> sigma_path(const DecodedTheta& p) const;

  // T x d per-observation scores d l_t / d coordinate. Coordinates are the
  // packed theta layout (vt = false) or the VT zeta layout (vt = true, with
  // Omega implied from s_target so coefficient coordinates pick up the
  // targeting term).
  MatrixXd per_t_scores(const DecodedTheta& p, bool vt, const MatrixXd& s_target) const;

 private:
  struct Forward;
  bool run_forward(const DecodedTheta& p, bool with_grad, Forward& fwd) const;

  const MatrixSeries* series_;
  ModelShape shape_;
  InitState init_;
  int T_ = 0;
  std::vector<MatrixXd> ypad_;    // bekk: Y_{1-P}..Y_T, lag access
  HarInputs har_;                 // har: daily/weekly/monthly inputs
  std::vector<double> ld_y_;      // log|Y_t|
  double mean_ld_y_ = 0.0;
};

// Gradient assembly from free-matrix adjoints.
VectorXd assemble_theta_grad(const LikGrad& g, const ModelShape& shape, bool include_omega = true);
VectorXd assemble_eta_grad(const LikGrad& g, const ModelShape& shape, const VectorXd& eta,
                           bool include_omega = true);
// Adds the variance-targeting chain term (-2 g_omega C S per coefficient).
LikGrad vt_chain_adjust(const LikGrad& g, const DecodedTheta& p, const MatrixXd& s_target);

}  // namespace cbf
