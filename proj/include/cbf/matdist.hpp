#pragma once

#include "cbf/matalg.hpp"
#include "cbf/rng.hpp"

namespace cbf {

// Wishart W(df, scale) on n x n SPD matrices, df > n - 1.
struct WishartParams {
  double df;
  SpdMatrix scale;

  WishartParams(double df_, SpdMatrix scale_);
  int n() const { return scale.n(); }
};

// Matrix-F distribution F(nu, scale) with density
//   f(x) = Lambda(nu) |scale|^{-nu1/2} |x|^{(nu1-n-1)/2} / |I + scale^{-1} x|^{(nu1+nu2)/2},
//   Lambda(nu) = Gamma_n((nu1+nu2)/2) / (Gamma_n(nu1/2) Gamma_n(nu2/2)),
// on n x n SPD matrices, with nu1, nu2 > n + 1. `scale` is the Sigma argument
// of the density; the mean is nu1/(nu2-n-1) * scale.
struct MatrixFParams {
  double nu1;
  double nu2;
  SpdMatrix scale;

  MatrixFParams(double nu1_, double nu2_, SpdMatrix scale_);
  int n() const { return scale.n(); }
};

// Bartlett-decomposition Wishart draw.
SpdMatrix sample_wishart(const WishartParams& p, RngStream& rng);
MatrixXd sample_wishart_raw(double df, const MatrixXd& chol_scale_lower, RngStream& rng);

double logpdf_wishart(const SpdMatrix& x, const WishartParams& p);

// Draw with conditional mean p.scale: L ~ W(nu1, I), R ~ W(nu2, I),
// ((nu2-n-1)/nu1) * scale^{1/2} L^{1/2} R^{-1} L^{1/2} scale^{1/2} with
// symmetric square roots. The draw follows F(nu, ((nu2-n-1)/nu1) * scale),
// so E[draw] = scale: this op treats `scale` as the target mean.
SpdMatrix sample_matrix_f(const MatrixFParams& p, RngStream& rng);
MatrixXd sample_matrix_f_raw(double nu1, double nu2, const MatrixXd& sqrt_mean, RngStream& rng);

double logpdf_matrix_f(const SpdMatrix& x, const MatrixFParams& p);

// nu1/(nu2 - n - 1) * scale.
SpdMatrix matrix_f_mean(const MatrixFParams& p);

}  // namespace cbf
