#include <doctest.h>

#include <cmath>

#include "cbf/diagnose.hpp"
#include "cbf/replicate.hpp"

using namespace cbf;

namespace {

MatrixSeries study_series(double lambda, int T, std::uint64_t seed) {
  CbfSpec dgp = study_dgp(10.0, 8.0, lambda);
  RngStream rng(seed, 0);
  return simulate(dgp, T, 300, rng);
}

FitOptions study_opts() {
  FitOptions o;
  o.structure = Structure::diagonal;
  o.P = o.Q = o.K = 1;
  o.restarts = 2;
  return o;
}

}  // namespace

TEST_CASE("scale residuals vanish when the model matches the data exactly") {
  RngStream rng(601, 0);
  MatrixSeries y;
  y.n = 2;
  std::vector<MatrixXd> sig;
  for (int t = 0; t < 5; ++t) {
    MatrixXd g = MatrixXd::Random(2, 2);
    MatrixXd m = g * g.transpose() + 0.5 * MatrixXd::Identity(2, 2);
    y.push(SpdMatrix(m));
    sig.push_back(m);
  }
  MatrixXd z = scale_residuals(y, sig);
  CHECK(z.rows() == 5);
  CHECK(z.cols() == 4);
  CHECK(z.cwiseAbs().maxCoeff() < 1e-10);

  // identity sigma: residuals are vec(Y - I)
  std::vector<MatrixXd> eye(5, MatrixXd::Identity(2, 2));
  MatrixXd z2 = scale_residuals(y, eye);
  for (int t = 0; t < 5; ++t) {
    MatrixXd expect = y[t].m() - MatrixXd::Identity(2, 2);
    CHECK((z2.row(t).transpose() - vec(expect)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("inner-product autocovariances match a direct loop") {
  MatrixXd z(4, 2);
  z << 1, 0, 0, 2, 1, 1, 2, 0;
  VectorXd v = inner_autocovs(z, 2);
  // lag 1: (z2'z1 + z3'z2 + z4'z3) / 4 ; lag 2: (z3'z1 + z4'z2) / 4
  const double lag1 = (z.row(1).dot(z.row(0)) + z.row(2).dot(z.row(1)) +
                       z.row(3).dot(z.row(2))) / 4.0;
  const double lag2 = (z.row(2).dot(z.row(0)) + z.row(3).dot(z.row(1))) / 4.0;
  CHECK(v[0] == doctest::Approx(lag1).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(lag2).epsilon(1e-15));
}

TEST_CASE("portmanteau test on a well-specified fit behaves like a chi-square") {
  MatrixSeries y = study_series(0.0, 700, 42);
  FitResult fit = fit_mle(y, study_opts());
  REQUIRE(fit.converged);

  PortmanteauResult r = pi_test(y, fit, 3);
  CHECK(r.lags == 3);
  CHECK(r.dof == 3);
  CHECK(std::isfinite(r.stat));
  CHECK(r.stat >= 0.0);
  CHECK(r.pvalue > 1e-4);   // gross misspecification would push this to ~0
  CHECK(r.pvalue <= 1.0);
  CHECK_FALSE(r.pinv_used);
  CHECK(r.autocovs.size() == 3);

  // variance estimate must be symmetric PSD
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(r.vhat);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("multi-lag runs reproduce the single-lag results") {
  MatrixSeries y = study_series(0.0, 500, 43);
  FitResult fit = fit_mle(y, study_opts());
  REQUIRE(fit.converged);

  std::vector<PortmanteauResult> many = pi_tests(y, fit, {2, 4});
  PortmanteauResult two = pi_test(y, fit, 2);
  PortmanteauResult four = pi_test(y, fit, 4);
  REQUIRE(many.size() == 2);
  CHECK(many[0].stat == doctest::Approx(two.stat).epsilon(1e-12));
  CHECK(many[1].stat == doctest::Approx(four.stat).epsilon(1e-12));
  CHECK(many[0].pvalue == doctest::Approx(two.pvalue).epsilon(1e-12));
}

TEST_CASE("targeted variant uses the two-step covariance and stays finite") {
  MatrixSeries y = study_series(0.0, 700, 44);
  FitResult fit = fit_vt(y, study_opts());
  REQUIRE(fit.converged);
  REQUIRE(fit.vt);

  std::vector<PortmanteauResult> rs = pi_v_tests(y, fit, {2, 3});
  for (const auto& r : rs) {
    CHECK(std::isfinite(r.stat));
    CHECK(r.stat >= 0.0);
    CHECK(r.pvalue >= 0.0);
    CHECK(r.pvalue <= 1.0);
    CHECK(r.dof == r.lags);
  }

  // mismatched inputs are rejected
  CHECK_THROWS_AS(pi_v_test(y, fit, 0), std::invalid_argument);
  FitResult mle = fit_mle(y, study_opts());
  CHECK_THROWS_AS(pi_v_test(y, mle, 2), std::invalid_argument);
  CHECK_THROWS_AS(pi_test(y, fit, 2), std::invalid_argument);
}

TEST_CASE("strong misspecification inflates the statistic") {
  // second-lag loading far outside the null: the lag-2 autocovariance of the
  // scale residuals is large, so the statistic should exceed typical null
  // draws by a wide margin
  MatrixSeries y = study_series(0.35, 900, 45);
  FitResult fit = fit_mle(y, study_opts());
  REQUIRE(std::isfinite(fit.nll));
  PortmanteauResult r = pi_test(y, fit, 2);
  CHECK(r.stat > 10.0);
  CHECK(r.pvalue < 0.05);
}

TEST_CASE("variance readings differ but stay in the same scale") {
  MatrixSeries y = study_series(0.0, 500, 46);
  FitResult fit = fit_mle(y, study_opts());
  REQUIRE(fit.converged);
  DiagnoseOptions a;
  a.reading = InnerVarianceReading::outer_trace;
  DiagnoseOptions b;
  b.reading = InnerVarianceReading::scalar_square;
  PortmanteauResult ra = pi_test(y, fit, 2, a);
  PortmanteauResult rb = pi_test(y, fit, 2, b);
  CHECK(std::isfinite(ra.stat));
  CHECK(std::isfinite(rb.stat));
  CHECK(ra.stat != rb.stat);
  CHECK(rb.stat / ra.stat > 0.05);
  CHECK(rb.stat / ra.stat < 20.0);
}
