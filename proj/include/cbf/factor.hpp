#pragma once

#include "cbf/estimate.hpp"

namespace cbf {

// Loading estimate with orthonormal columns, the projected r x r factor
// series, and the static remainder of the sample mean.
struct FactorDecomp {
  MatrixXd f_hat;        // n x r, F'F = I_r
  MatrixSeries yf;       // r x r series F' Y_t F
  MatrixXd y0_hat;       // Ybar - FF' Ybar FF'
  int r = 0;
};

struct RankDiagnostics {
  VectorXd eigenvalues;  // descending spectrum of (1/T) sum (Y_t - Ybar)^2
  VectorXd ratios;       // lambda_i / lambda_{i+1}, denominator floored at numerical rank tol
  int suggested_r = 1;   // argmax ratio over i <= n/2
};

// Spectrum of the centered second-moment matrix and adjacent-eigenvalue
// ratios used to choose the factor count.
RankDiagnostics eigen_ratios(const MatrixSeries& series);

// Top-r eigenvector extraction. Each loading column is sign-normalized so its
// largest-magnitude entry is positive; a tie between the r-th and (r+1)-th
// eigenvalues is an error because the loading space is not well defined there.
FactorDecomp extract_factors(const MatrixSeries& series, int r);

// Fit the conditional model on the extracted factor series.
FitResult fit_f_cbf(const FactorDecomp& decomp, const FitOptions& opts, bool vt);

// Map an r x r factor-level prediction back to full dimension:
// F sigma_f F' + Y0. The static part need not be PSD; the optional projection
// floors negative eigenvalues at zero.
MatrixXd reconstruct(const FactorDecomp& decomp, const MatrixXd& sigma_f,
                     bool psd_project = false);

}  // namespace cbf
