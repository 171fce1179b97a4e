#include "cbf/matdist.hpp"

#include <cmath>
#include <numbers>

#include "cbf/specfun.hpp"

namespace cbf {

namespace {

double logdet_llt(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::LLT<MatrixXd> llt_or_throw(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw std::runtime_error(what);
  return llt;
}

}  // namespace

WishartParams::WishartParams(double df_, SpdMatrix scale_) : df(df_), scale(std::move(scale_)) {
  if (!(df > scale.n() - 1)) throw std::invalid_argument("WishartParams: requires df > n - 1");
}

MatrixFParams::MatrixFParams(double nu1_, double nu2_, SpdMatrix scale_)
    : nu1(nu1_), nu2(nu2_), scale(std::move(scale_)) {
  const int nn = scale.n();
  if (!(nu1 > nn + 1)) throw std::invalid_argument("MatrixFParams: requires nu1 > n + 1");
  if (!(nu2 > nn + 1)) throw std::invalid_argument("MatrixFParams: requires nu2 > n + 1");
}

MatrixXd sample_wishart_raw(double df, const MatrixXd& chol_scale_lower, RngStream& rng) {
  const int n = static_cast<int>(chol_scale_lower.rows());
  // Bartlett factor: lower triangular, chi variates on the diagonal.
  MatrixXd l = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    l(i, i) = std::sqrt(rng.chisq(df - i));
    for (int j = 0; j < i; ++j) l(i, j) = rng.normal();
  }
  MatrixXd al = chol_scale_lower * l;
  return al * al.transpose();
}

SpdMatrix sample_wishart(const WishartParams& p, RngStream& rng) {
  const auto llt = llt_or_throw(p.scale.m(), "sample_wishart: scale factorization failed");
  return SpdMatrix(sample_wishart_raw(p.df, MatrixXd(llt.matrixL()), rng));
}

double logpdf_wishart(const SpdMatrix& x, const WishartParams& p) {
  const int n = p.n();
  if (x.n() != n) throw std::invalid_argument("logpdf_wishart: dimension mismatch");
  const auto llt_v = llt_or_throw(p.scale.m(), "logpdf_wishart: singular scale");
  const auto llt_x = llt_or_throw(x.m(), "logpdf_wishart: singular argument");
  const double ld_v = logdet_llt(llt_v);
  const double ld_x = logdet_llt(llt_x);
  const double tr_vinv_x = llt_v.solve(x.m()).trace();
  return 0.5 * (p.df - n - 1) * ld_x - 0.5 * tr_vinv_x - 0.5 * p.df * n * std::numbers::ln2 -
         0.5 * p.df * ld_v - ln_multigamma(n, 0.5 * p.df);
}

MatrixXd sample_matrix_f_raw(double nu1, double nu2, const MatrixXd& sqrt_mean, RngStream& rng) {
  const int n = static_cast<int>(sqrt_mean.rows());
  const MatrixXd eye = MatrixXd::Identity(n, n);
  const MatrixXd l = sample_wishart_raw(nu1, eye, rng);
  const MatrixXd r = sample_wishart_raw(nu2, eye, rng);
  const MatrixXd lh = sqrtm_sym(l);
  Eigen::LLT<MatrixXd> llt_r(r);
  if (llt_r.info() != Eigen::Success) throw std::runtime_error("sample_matrix_f: singular denominator draw");
  const MatrixXd core = lh * llt_r.solve(lh);
  const double c = (nu2 - n - 1) / nu1;
  MatrixXd out = c * (sqrt_mean * core * sqrt_mean.transpose());
  return 0.5 * (out + out.transpose());
}

SpdMatrix sample_matrix_f(const MatrixFParams& p, RngStream& rng) {
  return SpdMatrix(sample_matrix_f_raw(p.nu1, p.nu2, sqrtm_sym(p.scale.m()), rng));
}

double logpdf_matrix_f(const SpdMatrix& x, const MatrixFParams& p) {
  const int n = p.n();
  if (x.n() != n) throw std::invalid_argument("logpdf_matrix_f: dimension mismatch");
  const double h1 = 0.5 * (p.nu1 + p.nu2);
  const double log_lambda =
      ln_multigamma(n, h1) - ln_multigamma(n, 0.5 * p.nu1) - ln_multigamma(n, 0.5 * p.nu2);
  const auto llt_s = llt_or_throw(p.scale.m(), "logpdf_matrix_f: singular scale");
  const auto llt_x = llt_or_throw(x.m(), "logpdf_matrix_f: singular argument");
  const auto llt_sx = llt_or_throw(p.scale.m() + x.m(), "logpdf_matrix_f: factorization failed");
  const double ld_s = logdet_llt(llt_s);
  const double ld_x = logdet_llt(llt_x);
  const double ld_sx = logdet_llt(llt_sx);
  // |I + scale^{-1} x| = |scale + x| / |scale|.
  return log_lambda - 0.5 * p.nu1 * ld_s + 0.5 * (p.nu1 - n - 1) * ld_x - h1 * (ld_sx - ld_s);
}

SpdMatrix matrix_f_mean(const MatrixFParams& p) {
  return SpdMatrix(p.nu1 / (p.nu2 - p.n() - 1) * p.scale.m());
}

}  // namespace cbf
