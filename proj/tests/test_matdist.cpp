#include <doctest.h>

#include <cmath>

#include "cbf/matdist.hpp"
#include "cbf/rng.hpp"

using namespace cbf;

namespace {

// Independent scalar density oracles implemented directly from textbook
// formulas, used to pin down the matrix densities at n = 1.

double log_f_density(double x, double d1, double d2) {
  // standard F(d1, d2) density
  return 0.5 * d1 * std::log(d1 / d2) + (0.5 * d1 - 1.0) * std::log(x) -
         0.5 * (d1 + d2) * std::log1p(d1 * x / d2) - std::lgamma(0.5 * d1) -
         std::lgamma(0.5 * d2) + std::lgamma(0.5 * (d1 + d2));
}

double log_gamma_density(double x, double shape, double scale) {
  return -std::lgamma(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(x) - x / scale;
}

MatrixXd random_spd(int n, RngStream& rng) {
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  MatrixXd m = g * g.transpose() / n + 0.4 * MatrixXd::Identity(n, n);
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST_CASE("wishart log density matches the scalar gamma form at n=1") {
  // W ~ Wishart_1(df, s): W = s * chisq(df), i.e. Gamma(df/2, 2s)
  const double df = 6.5, s = 0.7;
  WishartParams p(df, SpdMatrix(s * MatrixXd::Identity(1, 1)));
  for (double x : {0.05, 0.4, 1.3, 5.0}) {
    SpdMatrix xm(x * MatrixXd::Identity(1, 1));
    const double expect = log_gamma_density(x, df / 2, 2 * s);
    CHECK(logpdf_wishart(xm, p) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("wishart sampler matches first and second moments") {
  RngStream rng(2024, 0);
  const int n = 2, N = 40000;
  MatrixXd scale = random_spd(n, rng);
  WishartParams p(7.0, SpdMatrix(scale));
  MatrixXd mean = MatrixXd::Zero(n, n);
  double var12 = 0.0;
  for (int i = 0; i < N; ++i) {
    SpdMatrix w = sample_wishart(p, rng);
    mean += w.m();
    const double dev = w(0, 1) - 7.0 * scale(0, 1);
    var12 += dev * dev;
  }
  mean /= N;
  var12 /= N;
  const MatrixXd target = 7.0 * scale;
  CHECK((mean - target).cwiseAbs().maxCoeff() < 0.05 * target.cwiseAbs().maxCoeff());
  // var(W_12) = df (s_11 s_22 + s_12^2)
  const double v = 7.0 * (scale(0, 0) * scale(1, 1) + scale(0, 1) * scale(0, 1));
  CHECK(var12 == doctest::Approx(v).epsilon(0.06));
}

TEST_CASE("matrix-F log density reduces to the scalar F law at n=1") {
  // If X ~ F(d1, d2) then Y = b (d1/d2) X follows the matrix-F density with
  // scale argument b at n = 1.
  const double nu1 = 7.0, nu2 = 9.0, b = 1.3;
  MatrixFParams p(nu1, nu2, SpdMatrix(b * MatrixXd::Identity(1, 1)));
  for (double y : {0.05, 0.3, 1.0, 2.4, 8.0}) {
    const double x = y * nu2 / (nu1 * b);
    const double expect = log_f_density(x, nu1, nu2) + std::log(nu2 / (nu1 * b));
    SpdMatrix ym(y * MatrixXd::Identity(1, 1));
    CHECK(logpdf_matrix_f(ym, p) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("matrix-F density is congruence-equivariant") {
  // Y -> C Y C' maps F(nu, S) to F(nu, C S C'), so the densities differ by
  // the Jacobian |det C|^{n+1}.
  RngStream rng(77, 0);
  const int n = 3;
  MatrixXd y = random_spd(n, rng);
  MatrixXd s = random_spd(n, rng);
  MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = rng.normal() + (i == j ? 1.5 : 0.0);
  const double nu1 = 8.0, nu2 = 10.0;
  const double lhs = logpdf_matrix_f(SpdMatrix(MatrixXd(c * y * c.transpose())),
                                     MatrixFParams(nu1, nu2, SpdMatrix(MatrixXd(c * s * c.transpose()))));
  const double rhs = logpdf_matrix_f(SpdMatrix(y), MatrixFParams(nu1, nu2, SpdMatrix(s))) -
                     (n + 1) * std::log(std::abs(c.determinant()));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("matrix-F sampler has the requested mean") {
  RngStream rng(31, 0);
  const int n = 2, N = 60000;
  MatrixXd target = random_spd(n, rng);
  MatrixXd sq = sqrtm_sym(target);
  MatrixXd mean = MatrixXd::Zero(n, n);
  for (int i = 0; i < N; ++i) mean += sample_matrix_f_raw(12.0, 9.0, sq, rng);
  mean /= N;
  CHECK((mean - target).cwiseAbs().maxCoeff() < 0.06 * target.cwiseAbs().maxCoeff());
}

TEST_CASE("matrix-F mean helper applies the scale correction") {
  MatrixXd s = 2.0 * MatrixXd::Identity(2, 2);
  MatrixFParams p(10.0, 8.0, SpdMatrix(s));
  // mean = nu1 / (nu2 - n - 1) * scale = 10/5 * 2 I
  CHECK(matrix_f_mean(p).m()(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("degrees-of-freedom domain is enforced") {
  SpdMatrix eye2(MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(MatrixFParams(3.0, 2.9, eye2), std::invalid_argument);  // nu2 <= n+1
  CHECK_THROWS_AS(MatrixFParams(2.5, 8.0, eye2), std::invalid_argument);  // nu1 <= n+1
  CHECK_NOTHROW(MatrixFParams(3.1, 3.1, eye2));
  CHECK_THROWS_AS(WishartParams(0.9, eye2), std::invalid_argument);       // df <= n-1
}
