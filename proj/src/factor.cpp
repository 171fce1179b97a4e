#include "cbf/factor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cbf {

namespace {

MatrixXd centered_second_moment(const MatrixSeries& series) {
  const int n = series.n;
  const MatrixXd ybar = sample_mean(series);
  MatrixXd s = MatrixXd::Zero(n, n);
  MatrixXd d(n, n);
  for (int t = 0; t < series.T(); ++t) {
    d = series[t].m() - ybar;
    s.noalias() += d * d;
  }
  return s / series.T();
}

// Descending eigenpairs of a symmetric PSD matrix.
void spectrum_desc(const MatrixXd& s, VectorXd& lambda, MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  if (eig.info() != Eigen::Success) throw std::runtime_error("factor: eigendecomposition failed");
  lambda = eig.eigenvalues().reverse();
  vectors = eig.eigenvectors().rowwise().reverse();
}

}  // namespace

RankDiagnostics eigen_ratios(const MatrixSeries& series) {
  if (series.T() < 2) throw std::invalid_argument("factor: need at least two observations");
  const int n = series.n;
  MatrixXd s = centered_second_moment(series);
  RankDiagnostics out;
  MatrixXd vecs;
  spectrum_desc(s, out.eigenvalues, vecs);
  if (out.eigenvalues(0) <= 0.0) {
    throw std::invalid_argument("factor: constant series has no spectrum to rank");
  }
  if (n == 1) {
    out.ratios = VectorXd(0);
    out.suggested_r = 1;
    return out;
  }
  // Denominators are floored at the numerical-rank tolerance of the spectrum
  // so a roundoff-zero tail cannot post an arbitrarily large (or infinite)
  // ratio past the true rank boundary.
  const double rank_tol =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * out.eigenvalues(0);
  out.ratios = VectorXd(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    const double num = std::max(out.eigenvalues(i), 0.0);
    const double den = std::max(out.eigenvalues(i + 1), rank_tol);
    out.ratios(i) = num / den;
  }
  const int search = std::max(1, n / 2);
  int best = 0;
  for (int i = 1; i < search && i < n - 1; ++i) {
    if (out.ratios(i) > out.ratios(best)) best = i;
  }
  out.suggested_r = best + 1;
  return out;
}

FactorDecomp extract_factors(const MatrixSeries& series, int r) {
  const int n = series.n;
  if (r < 1 || r > n) throw std::invalid_argument("factor: rank out of range");
  MatrixXd s = centered_second_moment(series);
  VectorXd lambda;
  MatrixXd vecs;
  spectrum_desc(s, lambda, vecs);
  if (r < n) {
    const double gap = lambda(r - 1) - lambda(r);
    const double scale = std::max(lambda(0), 1e-300);
    if (gap <= 1e-10 * scale) {
      std::ostringstream msg;
      msg << "factor: eigenvalues " << r << " and " << r + 1 << " are tied (" << lambda(r - 1)
          << " vs " << lambda(r) << "); the loading space is not identified";
      throw std::invalid_argument(msg.str());
    }
  }
  FactorDecomp out;
  out.r = r;
  out.f_hat = vecs.leftCols(r);
  for (int c = 0; c < r; ++c) {
    Eigen::Index imax;
    out.f_hat.col(c).cwiseAbs().maxCoeff(&imax);
    if (out.f_hat(imax, c) < 0.0) out.f_hat.col(c) = -out.f_hat.col(c);
  }
  out.yf.n = r;
  MatrixXd proj(r, r);
  for (int t = 0; t < series.T(); ++t) {
    proj.noalias() = out.f_hat.transpose() * series[t].m() * out.f_hat;
    out.yf.push(SpdMatrix(proj));
  }
  const MatrixXd ybar = sample_mean(series);
  const MatrixXd pp = out.f_hat * out.f_hat.transpose();
  out.y0_hat = ybar - pp * ybar * pp;
  out.y0_hat = 0.5 * (out.y0_hat + out.y0_hat.transpose()).eval();
  return out;
}

FitResult fit_f_cbf(const FactorDecomp& decomp, const FitOptions& opts, bool vt) {
  return vt ? fit_vt(decomp.yf, opts) : fit_mle(decomp.yf, opts);
}

MatrixXd reconstruct(const FactorDecomp& decomp, const MatrixXd& sigma_f, bool psd_project) {
  if (sigma_f.rows() != decomp.r || sigma_f.cols() != decomp.r) {
    throw std::invalid_argument("factor: prediction dimension does not match the decomposition");
  }
  MatrixXd out = decomp.f_hat * sigma_f * decomp.f_hat.transpose() + decomp.y0_hat;
  out = 0.5 * (out + out.transpose()).eval();
  if (psd_project) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out);
    out = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
          eig.eigenvectors().transpose();
  }
  return out;
}

}  // namespace cbf
