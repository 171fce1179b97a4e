#pragma once

namespace cbf {

// log of the multivariate gamma function
// Gamma_n(x) = pi^{n(n-1)/4} * prod_{i=1..n} Gamma(x + (1-i)/2), x > (n-1)/2.
double ln_multigamma(int n, double x);

// digamma and its multivariate sum psi_n(x) = sum_{i=1..n} psi(x + (1-i)/2).
double digamma(double x);
double multi_digamma(int n, double x);

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta function I_x(a, b).
double inc_beta(double a, double b, double x);

// Distribution helpers built on the above.
double chisq_cdf(double x, double df);
double chisq_sf(double x, double df);
double chisq_quantile(double p, double df);
double normal_cdf(double x);
double normal_sf(double x);
double f_cdf(double x, double d1, double d2);

}  // namespace cbf
