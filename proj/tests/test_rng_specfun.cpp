#include <doctest.h>

#include <cmath>
#include <vector>

#include "cbf/rng.hpp"
#include "cbf/specfun.hpp"

using namespace cbf;

TEST_CASE("random streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_equal_across = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t ua = a.next_u64();
    if (ua != b.next_u64()) all_equal = false;
    if (ua == c.next_u64()) any_equal_across = true;
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_across);

  RngStream base(5, 0);
  RngStream s1 = base.split(1), s1b = RngStream(5, 0).split(1), s2 = base.split(2);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("uniform draws stay in [0,1) with the right mean") {
  RngStream rng(99, 0);
  double sum = 0.0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / N == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal and gamma moments match Monte Carlo expectations") {
  RngStream rng(123, 0);
  const int N = 200000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < N; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
  }
  m1 /= N;
  m2 /= N;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(double(N)));           // 4 standard errors
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / N));

  for (double shape : {0.4, 1.0, 3.7}) {
    double g1 = 0, g2 = 0;
    for (int i = 0; i < N; ++i) {
      const double g = rng.gamma(shape);
      REQUIRE(g >= 0.0);
      g1 += g;
      g2 += g * g;
    }
    g1 /= N;
    g2 /= N;
    const double var = shape;  // Gamma(shape,1) variance
    CHECK(std::abs(g1 - shape) < 4.0 * std::sqrt(var / N));
    const double second = shape * (shape + 1.0);
    // fourth-moment bound for the SE of the second empirical moment
    const double se2 = std::sqrt((shape * (shape + 1) * (shape + 2) * (shape + 3) -
                                  second * second) / N);
    CHECK(std::abs(g2 - second) < 4.0 * se2);
  }

  double c1 = 0;
  for (int i = 0; i < N; ++i) c1 += rng.chisq(3.5);
  CHECK(c1 / N == doctest::Approx(3.5).epsilon(0.02));
}

TEST_CASE("multivariate gamma reduces to lgamma and obeys the p=2 identity") {
  for (double x : {0.7, 1.3, 4.0, 11.5}) {
    CHECK(ln_multigamma(1, x) == doctest::Approx(std::lgamma(x)).epsilon(1e-14));
  }
  // Gamma_2(a) = sqrt(pi) Gamma(a) Gamma(a - 1/2)
  for (double a : {1.2, 2.5, 7.0}) {
    const double expected = 0.5 * std::log(M_PI) + std::lgamma(a) + std::lgamma(a - 0.5);
    CHECK(ln_multigamma(2, a) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("digamma matches a finite difference of lgamma") {
  for (double x : {0.3, 1.0, 2.7, 15.0, 120.0}) {
    const double h = 1e-6 * std::max(1.0, x);
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2 * h);
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-7));
  }
  CHECK(multi_digamma(1, 3.3) == doctest::Approx(digamma(3.3)).epsilon(1e-14));
  const double expect2 = digamma(4.0) + digamma(3.5);
  CHECK(multi_digamma(2, 4.0) == doctest::Approx(expect2).epsilon(1e-14));
}

TEST_CASE("incomplete gamma pieces are complementary and hit known values") {
  for (double a : {0.5, 2.0, 9.0}) {
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
      CHECK(gamma_p(a, x) + gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // chi-square with 2 dof: cdf(x) = 1 - exp(-x/2), an exact elementary form
  for (double x : {0.2, 1.0, 3.0, 10.0}) {
    CHECK(chisq_cdf(x, 2.0) == doctest::Approx(1.0 - std::exp(-x / 2)).epsilon(1e-12));
    CHECK(chisq_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  }
}

TEST_CASE("chi-square quantile inverts the cdf") {
  for (double df : {1.0, 2.0, 6.0, 30.0}) {
    for (double p : {0.01, 0.25, 0.5, 0.9, 0.95, 0.99}) {
      const double q = chisq_quantile(p, df);
      CHECK(chisq_cdf(q, df) == doctest::Approx(p).epsilon(1e-9));
    }
  }
  // classical 95% critical value with 2 dof
  CHECK(chisq_quantile(0.95, 2.0) == doctest::Approx(5.991464547107979).epsilon(1e-10));
}

TEST_CASE("normal cdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_sf(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-10));
  CHECK(normal_cdf(-1.0) + normal_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("F cdf agrees with the chi-square limit and symmetry") {
  // F(d1, d2) at x equals I_{d1 x/(d1 x + d2)}(d1/2, d2/2)
  CHECK(f_cdf(1.0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-10));  // median of F(1,1)
  // P(F(d1,d2) <= x) = 1 - P(F(d2,d1) <= 1/x)
  for (double x : {0.4, 1.7}) {
    CHECK(f_cdf(x, 3.0, 7.0) == doctest::Approx(1.0 - f_cdf(1.0 / x, 7.0, 3.0)).epsilon(1e-10));
  }
}
