#pragma once

#include <optional>
#include <vector>

#include "cbf/matalg.hpp"
#include "cbf/matdist.hpp"
#include "cbf/rng.hpp"

namespace cbf {

enum class Structure { full, diagonal };

// BEKK-type conditional-mean recursion for an n x n SPD series:
//   Sigma_t = Omega + sum_{i<=P} sum_{k<=K} A_ki Y_{t-i} A_ki'
//                   + sum_{j<=Q} sum_{k<=K} B_kj Sigma_{t-j} B_kj'
// with innovation degrees of freedom nu = (nu1, nu2); nu2 may be +inf for
// the Wishart limit. Coefficients are stored A[k][i], B[k][j] (0-based).
struct CbfSpec {
  int n = 0;
  int P = 0;
  int Q = 0;
  int K = 1;
  SpdMatrix omega;
  std::vector<std::vector<MatrixXd>> A;
  std::vector<std::vector<MatrixXd>> B;
  double nu1 = 0.0;
  double nu2 = 0.0;
  Structure structure = Structure::full;

  int M() const { return std::max(P, Q); }
  void validate() const;
};

// HAR restriction: daily, weekly (5-day average) and monthly (22-day average)
// lags with one coefficient matrix each. Equivalent to a CbfSpec with
// P = 22, K = 3, Q = 0 under the har_expand scaling.
struct HarSpec {
  int n = 0;
  SpdMatrix omega;
  MatrixXd Ad, Aw, Am;
  double nu1 = 0.0;
  double nu2 = 0.0;
  Structure structure = Structure::full;

  void validate() const;
};

inline constexpr int kHarWeek = 5;
inline constexpr int kHarMonth = 22;

// Pre-sample state. Y0[j] holds Y_{-j} and S0[j] holds Sigma_{-j}
// (j = 0 is the observation just before the sample starts).
struct InitState {
  std::vector<MatrixXd> Y0;
  std::vector<MatrixXd> S0;

  static InitState constant(const MatrixXd& m, int lags);
};

// Constant-initialization state from the sample mean of the series.
InitState sample_mean_init(const MatrixSeries& series, int lags);
MatrixXd sample_mean(const MatrixSeries& series);

struct StationarityResult {
  double rho = 0.0;   // spectral radius of sum_i (A_i* + B_i*)
  bool stationary = false;
};

// Covariance-stationarity check: rho(sum_i sum_k (A_ki x A_ki + B_ki x B_ki)) < 1.
StationarityResult check_stationarity(const CbfSpec& spec);
StationarityResult check_stationarity(const HarSpec& spec);

// Expand a HAR spec to its equivalent (P=22, K=3, Q=0) BEKK form:
// A[0][0] = Ad, A[1][i] = Aw/sqrt(5) for i < 5, A[2][i] = Am/sqrt(22) for i < 22.
CbfSpec har_expand(const HarSpec& spec);

// Filtered conditional-mean path Sigma_1..Sigma_T given the observed series
// and pre-sample state. Output matrices are SPD whenever omega is SPD.
std::vector<MatrixXd> sigma_path(const CbfSpec& spec, const MatrixSeries& series,
                                 const InitState& init);
std::vector<MatrixXd> har_sigma_path(const HarSpec& spec, const MatrixSeries& series,
                                     const InitState& init);

// Daily/weekly/monthly lagged averages feeding the HAR recursion at each t;
// parameter-independent, so computed once per (series, init).
struct HarInputs {
  std::vector<MatrixXd> yd, yw, ym;  // index t-1, t = 1..T
};
HarInputs make_har_inputs(const MatrixSeries& series, const InitState& init);

// Unconditional mean: unvec([I - sum(A* + B*)]^{-1} vec(Omega)).
// Requires stationarity.
SpdMatrix unconditional_mean(const CbfSpec& spec);
SpdMatrix unconditional_mean(const HarSpec& spec);

// Scalar factors of the conditional second-moment kernel; require nu2 > n+3.
double moment_s1(int n, double nu1, double nu2);
double moment_s2(int n, double nu1, double nu2);

// n^4 x n^4 kernel Pi mapping vec(E[vec Sigma vec Sigma']) to the conditional
// outer-moment correction:
// Pi = (s1-1) I + s2 [I_{n^2} (x) (I_{n^2} + K_{n^2})] [I_n (x) K_{n^2} (x) I_n].
MatrixXd moment_kernel(int n, double nu1, double nu2);

// Stationary second moment E[vec(Y) vec(Y)'] (n^2 x n^2), computed from the
// MA representation: vec of it equals
// (Pi + I)(I - sum_{i>=1} Phi_i (x) Phi_i Pi)^{-1} (ybar (x) ybar).
// The Phi series is truncated when ||Phi_i||_F <= tol * ||Phi_0||_F.
MatrixXd second_moment(const CbfSpec& spec, double tol = 1e-12, int max_terms = 10000);

// Volatility persistence of one asset (0-based index): sum of squared own
// diagonal loadings. Defined for diagonal-structure specs.
double persistence(const CbfSpec& spec, int asset);
double persistence(const HarSpec& spec, int asset);

struct SimulateInfo {
  double rho = 0.0;
  bool stationary = false;
};

// Simulate T observations after a burn-in, initialized at the unconditional
// mean (or Omega when the spec is not stationary; reported via info, not an
// error, since near-boundary designs are legitimate simulation targets).
MatrixSeries simulate(const CbfSpec& spec, int T, int burnin, RngStream& rng,
                      SimulateInfo* info = nullptr);
MatrixSeries simulate(const HarSpec& spec, int T, int burnin, RngStream& rng,
                      SimulateInfo* info = nullptr);

}  // namespace cbf
