#include "cbf/model.hpp"

#include <cmath>
#include <limits>

namespace cbf {

namespace {

void check_coef_block(const std::vector<std::vector<MatrixXd>>& m, int k_count, int lag_count,
                      int n, Structure structure, const char* name) {
  if (static_cast<int>(m.size()) != k_count) {
    throw std::invalid_argument(std::string(name) + ": expected K coefficient groups");
  }
  for (const auto& row : m) {
    if (static_cast<int>(row.size()) != lag_count) {
      throw std::invalid_argument(std::string(name) + ": wrong lag count");
    }
    for (const auto& a : row) {
      if (a.rows() != n || a.cols() != n) {
        throw std::invalid_argument(std::string(name) + ": coefficient dimension mismatch");
      }
      if (structure == Structure::diagonal && !a.isDiagonal(0.0)) {
        throw std::invalid_argument(std::string(name) + ": diagonal structure requires diagonal coefficients");
      }
    }
  }
}

void check_nu(int n, double nu1, double nu2) {
  if (!(nu1 > n + 1)) throw std::invalid_argument("spec: requires nu1 > n + 1");
  if (!(nu2 > n + 1)) throw std::invalid_argument("spec: requires nu2 > n + 1");
}

const MatrixXd& lagged(const MatrixSeries& series, const std::vector<MatrixXd>& pre, int t,
                       int lag) {
  // Value of the series at time t - lag, where t is 1-based and pre[j]
  // holds the pre-sample value at time -j.
  const int s = t - lag;
  return s >= 1 ? series[s - 1].m() : pre[static_cast<size_t>(-s)];
}

}  // namespace

void CbfSpec::validate() const {
  if (n < 1) throw std::invalid_argument("spec: n must be positive");
  if (omega.n() != n) throw std::invalid_argument("spec: omega dimension mismatch");
  if (P < 0 || Q < 0 || K < 1) throw std::invalid_argument("spec: invalid orders");
  check_coef_block(A, K, P, n, structure, "spec A");
  check_coef_block(B, K, Q, n, structure, "spec B");
  check_nu(n, nu1, nu2);
}

void HarSpec::validate() const {
  if (n < 1) throw std::invalid_argument("har spec: n must be positive");
  if (omega.n() != n) throw std::invalid_argument("har spec: omega dimension mismatch");
  for (const MatrixXd* a : {&Ad, &Aw, &Am}) {
    if (a->rows() != n || a->cols() != n) throw std::invalid_argument("har spec: coefficient dimension mismatch");
    if (structure == Structure::diagonal && !a->isDiagonal(0.0)) {
      throw std::invalid_argument("har spec: diagonal structure requires diagonal coefficients");
    }
  }
  check_nu(n, nu1, nu2);
}

InitState InitState::constant(const MatrixXd& m, int lags) {
  InitState s;
  s.Y0.assign(static_cast<size_t>(lags), m);
  s.S0.assign(static_cast<size_t>(lags), m);
  return s;
}

MatrixXd sample_mean(const MatrixSeries& series) {
  if (series.T() < 1) throw std::invalid_argument("sample_mean: empty series");
  MatrixXd m = MatrixXd::Zero(series.n, series.n);
  for (const auto& y : series.y) m += y.m();
  return m / series.T();
}

InitState sample_mean_init(const MatrixSeries& series, int lags) {
  return InitState::constant(sample_mean(series), lags);
}

namespace {

// sum_i (A_i* + B_i*) = sum over all coefficient matrices of C (x) C.
MatrixXd coef_kron_sum(const CbfSpec& spec) {
  const int n2 = spec.n * spec.n;
  MatrixXd s = MatrixXd::Zero(n2, n2);
  for (const auto& row : spec.A)
    for (const auto& a : row) s += kron(a, a);
  for (const auto& row : spec.B)
    for (const auto& b : row) s += kron(b, b);
  return s;
}

MatrixXd coef_kron_sum(const HarSpec& spec) {
  return kron(spec.Ad, spec.Ad) + kron(spec.Aw, spec.Aw) + kron(spec.Am, spec.Am);
}

StationarityResult stationarity_from_kron(const MatrixXd& s) {
  StationarityResult r;
  r.rho = spectral_radius(s);
  r.stationary = r.rho < 1.0;
  return r;
}

}  // namespace

StationarityResult check_stationarity(const CbfSpec& spec) {
  spec.validate();
  return stationarity_from_kron(coef_kron_sum(spec));
}

StationarityResult check_stationarity(const HarSpec& spec) {
  spec.validate();
  return stationarity_from_kron(coef_kron_sum(spec));
}

CbfSpec har_expand(const HarSpec& spec) {
  spec.validate();
  CbfSpec out;
  out.n = spec.n;
  out.P = kHarMonth;
  out.Q = 0;
  out.K = 3;
  out.omega = spec.omega;
  out.nu1 = spec.nu1;
  out.nu2 = spec.nu2;
  out.structure = spec.structure;
  const MatrixXd zero = MatrixXd::Zero(spec.n, spec.n);
  out.A.assign(3, std::vector<MatrixXd>(kHarMonth, zero));
  out.A[0][0] = spec.Ad;
  for (int i = 0; i < kHarWeek; ++i) out.A[1][i] = spec.Aw / std::sqrt(double(kHarWeek));
  for (int i = 0; i < kHarMonth; ++i) out.A[2][i] = spec.Am / std::sqrt(double(kHarMonth));
  out.B.assign(3, std::vector<MatrixXd>());
  return out;
}

std::vector<MatrixXd> sigma_path(const CbfSpec& spec, const MatrixSeries& series,
                                 const InitState& init) {
  spec.validate();
  if (series.n != spec.n) throw std::invalid_argument("sigma_path: series dimension mismatch");
  if (static_cast<int>(init.Y0.size()) < spec.P || static_cast<int>(init.S0.size()) < spec.Q) {
    throw std::invalid_argument("sigma_path: initial state shorter than model order");
  }
  const int T = series.T();
  std::vector<MatrixXd> out;
  out.reserve(static_cast<size_t>(T));
  MatrixXd acc(spec.n, spec.n), tmp(spec.n, spec.n);
  for (int t = 1; t <= T; ++t) {
    acc = spec.omega.m();
    for (int i = 1; i <= spec.P; ++i) {
      const MatrixXd& ylag = lagged(series, init.Y0, t, i);
      for (int k = 0; k < spec.K; ++k) {
        const MatrixXd& a = spec.A[static_cast<size_t>(k)][static_cast<size_t>(i - 1)];
        tmp.noalias() = a * ylag;
        acc.noalias() += tmp * a.transpose();
      }
    }
    for (int j = 1; j <= spec.Q; ++j) {
      const int s = t - j;
      const MatrixXd& slag = s >= 1 ? out[static_cast<size_t>(s - 1)] : init.S0[static_cast<size_t>(-s)];
      for (int k = 0; k < spec.K; ++k) {
        const MatrixXd& b = spec.B[static_cast<size_t>(k)][static_cast<size_t>(j - 1)];
        tmp.noalias() = b * slag;
        acc.noalias() += tmp * b.transpose();
      }
    }
    out.push_back(0.5 * (acc + acc.transpose()));
  }
  return out;
}

HarInputs make_har_inputs(const MatrixSeries& series, const InitState& init) {
  if (static_cast<int>(init.Y0.size()) < kHarMonth) {
    throw std::invalid_argument("har inputs: initial state shorter than the monthly window");
  }
  const int T = series.T();
  HarInputs h;
  h.yd.reserve(T);
  h.yw.reserve(T);
  h.ym.reserve(T);
  for (int t = 1; t <= T; ++t) {
    MatrixXd sum_m = MatrixXd::Zero(series.n, series.n);
    MatrixXd sum_w = MatrixXd::Zero(series.n, series.n);
    for (int i = 1; i <= kHarMonth; ++i) {
      const MatrixXd& y = lagged(series, init.Y0, t, i);
      sum_m += y;
      if (i <= kHarWeek) sum_w += y;
    }
    h.yd.push_back(lagged(series, init.Y0, t, 1));
    h.yw.push_back(sum_w / kHarWeek);
    h.ym.push_back(sum_m / kHarMonth);
  }
  return h;
}

std::vector<MatrixXd> har_sigma_path(const HarSpec& spec, const MatrixSeries& series,
                                     const InitState& init) {
  spec.validate();
  if (series.n != spec.n) throw std::invalid_argument("har_sigma_path: series dimension mismatch");
  const HarInputs h = make_har_inputs(series, init);
  const int T = series.T();
  std::vector<MatrixXd> out;
  out.reserve(static_cast<size_t>(T));
  MatrixXd acc(spec.n, spec.n);
  for (int t = 0; t < T; ++t) {
    acc = spec.omega.m();
    acc.noalias() += spec.Ad * h.yd[static_cast<size_t>(t)] * spec.Ad.transpose();
    acc.noalias() += spec.Aw * h.yw[static_cast<size_t>(t)] * spec.Aw.transpose();
    acc.noalias() += spec.Am * h.ym[static_cast<size_t>(t)] * spec.Am.transpose();
    out.push_back(0.5 * (acc + acc.transpose()));
  }
  return out;
}

namespace {

SpdMatrix mean_from_kron(const MatrixXd& ks, const MatrixXd& omega, int n) {
  const StationarityResult st = stationarity_from_kron(ks);
  if (!st.stationary) throw std::invalid_argument("unconditional_mean: spec is not stationary");
  const MatrixXd lhs = MatrixXd::Identity(n * n, n * n) - ks;
  const VectorXd ybar = lhs.partialPivLu().solve(vec(omega));
  return SpdMatrix(unvec(ybar, n, n));
}

}  // namespace

SpdMatrix unconditional_mean(const CbfSpec& spec) {
  spec.validate();
  return mean_from_kron(coef_kron_sum(spec), spec.omega.m(), spec.n);
}

SpdMatrix unconditional_mean(const HarSpec& spec) {
  spec.validate();
  return mean_from_kron(coef_kron_sum(spec), spec.omega.m(), spec.n);
}

namespace {

void check_moment_nu(int n, double nu1, double nu2) {
  check_nu(n, nu1, nu2);
  if (!(nu2 > n + 3)) throw std::invalid_argument("moment kernel: requires nu2 > n + 3");
  if (!std::isfinite(nu2)) throw std::invalid_argument("moment kernel: requires finite nu2");
}

}  // namespace

double moment_s1(int n, double nu1, double nu2) {
  check_moment_nu(n, nu1, nu2);
  return (nu2 - n - 1) * (nu1 * (nu2 - n - 2) + 2) / (nu1 * (nu2 - n) * (nu2 - n - 3));
}

double moment_s2(int n, double nu1, double nu2) {
  check_moment_nu(n, nu1, nu2);
  return (nu2 - n - 1) * (nu1 + nu2 - n - 1) / (nu1 * (nu2 - n) * (nu2 - n - 3));
}

MatrixXd moment_kernel(int n, double nu1, double nu2) {
  const double s1 = moment_s1(n, nu1, nu2);
  const double s2 = moment_s2(n, nu1, nu2);
  const int n2 = n * n;
  const int n4 = n2 * n2;
  const MatrixXd kn = commutation_matrix(n);
  const MatrixXd left = kron(MatrixXd::Identity(n2, n2), MatrixXd(MatrixXd::Identity(n2, n2) + kn));
  const MatrixXd right = kron(kron(MatrixXd::Identity(n, n), kn), MatrixXd::Identity(n, n));
  MatrixXd pi = (s1 - 1.0) * MatrixXd::Identity(n4, n4);
  pi.noalias() += s2 * (left * right);
  return pi;
}

MatrixXd second_moment(const CbfSpec& spec, double tol, int max_terms) {
  spec.validate();
  check_moment_nu(spec.n, spec.nu1, spec.nu2);
  const int n = spec.n, n2 = n * n, n4 = n2 * n2;
  const StationarityResult st = check_stationarity(spec);
  if (!st.stationary) throw std::invalid_argument("second_moment: spec is not stationary");

  // Per-lag kron blocks A_i* + B_i* and B_i* alone for the Phi recursion
  // Phi_i = -B_i* + sum_{j=1..i} (A_j* + B_j*) Phi_{i-j}.
  const int m = spec.M();
  std::vector<MatrixXd> ab(static_cast<size_t>(m), MatrixXd::Zero(n2, n2));
  std::vector<MatrixXd> bonly(static_cast<size_t>(m), MatrixXd::Zero(n2, n2));
  for (int i = 0; i < spec.P; ++i)
    for (int k = 0; k < spec.K; ++k) ab[static_cast<size_t>(i)] += kron(spec.A[k][i], spec.A[k][i]);
  for (int j = 0; j < spec.Q; ++j)
    for (int k = 0; k < spec.K; ++k) {
      const MatrixXd bb = kron(spec.B[k][j], spec.B[k][j]);
      ab[static_cast<size_t>(j)] += bb;
      bonly[static_cast<size_t>(j)] += bb;
    }

  std::vector<MatrixXd> phi;  // phi[i], phi[0] = I
  phi.push_back(MatrixXd::Identity(n2, n2));
  MatrixXd kron_sum = MatrixXd::Zero(n4, n4);
  const double phi0_norm = phi[0].norm();
  int i = 1;
  for (; i <= max_terms; ++i) {
    MatrixXd p = MatrixXd::Zero(n2, n2);
    if (i <= m) p -= bonly[static_cast<size_t>(i - 1)];
    for (int j = 1; j <= std::min(i, m); ++j) {
      p.noalias() += ab[static_cast<size_t>(j - 1)] * phi[static_cast<size_t>(i - j)];
    }
    if (p.norm() <= tol * phi0_norm) break;
    kron_sum += kron(p, p);
    phi.push_back(std::move(p));
    // Only the last M Phi terms feed the recursion, but keeping all is cheap
    // at the dimensions in scope.
  }
  if (i > max_terms) throw std::runtime_error("second_moment: MA series did not converge");

  const MatrixXd pi = moment_kernel(n, spec.nu1, spec.nu2);
  MatrixXd series_op = kron_sum * pi;
  if (spectral_radius(series_op) >= 1.0) {
    throw std::runtime_error("second_moment: second-moment operator is divergent");
  }
  const VectorXd ybar = vec(unconditional_mean(spec).m());
  VectorXd rhs = kron(ybar, ybar);
  const VectorXd z = (MatrixXd::Identity(n4, n4) - series_op).partialPivLu().solve(rhs);
  VectorXd out_vec = pi * z + z;
  return unvec(out_vec, n2, n2);
}

double persistence(const CbfSpec& spec, int asset) {
  spec.validate();
  if (spec.structure != Structure::diagonal) {
    throw std::invalid_argument("persistence: defined for diagonal structure");
  }
  if (spec.K != 1) throw std::invalid_argument("persistence: defined for K = 1");
  if (asset < 0 || asset >= spec.n) throw std::invalid_argument("persistence: asset out of range");
  double s = 0.0;
  for (const auto& a : spec.A[0]) s += a(asset, asset) * a(asset, asset);
  for (const auto& b : spec.B[0]) s += b(asset, asset) * b(asset, asset);
  return s;
}

double persistence(const HarSpec& spec, int asset) {
  spec.validate();
  if (spec.structure != Structure::diagonal) {
    throw std::invalid_argument("persistence: defined for diagonal structure");
  }
  if (asset < 0 || asset >= spec.n) throw std::invalid_argument("persistence: asset out of range");
  const double d = spec.Ad(asset, asset), w = spec.Aw(asset, asset), m = spec.Am(asset, asset);
  return d * d + w * w + m * m;
}

MatrixSeries simulate(const CbfSpec& spec, int T, int burnin, RngStream& rng, SimulateInfo* info) {
  spec.validate();
  if (T < 1) throw std::invalid_argument("simulate: T must be positive");
  if (burnin < 0) throw std::invalid_argument("simulate: burnin must be non-negative");
  if (!std::isfinite(spec.nu2)) throw std::invalid_argument("simulate: requires finite nu2");

  const StationarityResult st = check_stationarity(spec);
  if (info != nullptr) {
    info->rho = st.rho;
    info->stationary = st.stationary;
  }
  const MatrixXd start = st.stationary ? unconditional_mean(spec).m() : spec.omega.m();

  const int n = spec.n;
  const int m = std::max(spec.M(), 1);
  // Ring buffers over the last M values; index (t mod M).
  std::vector<MatrixXd> ybuf(static_cast<size_t>(m), start);
  std::vector<MatrixXd> sbuf(static_cast<size_t>(m), start);
  const MatrixXd eye = MatrixXd::Identity(n, n);

  MatrixSeries out;
  out.n = n;
  out.y.reserve(static_cast<size_t>(T));
  MatrixXd acc(n, n), tmp(n, n);
  for (int t = 0; t < burnin + T; ++t) {
    acc = spec.omega.m();
    for (int i = 1; i <= spec.P; ++i) {
      const MatrixXd& ylag = ybuf[static_cast<size_t>((t - i + 100 * m) % m)];
      for (int k = 0; k < spec.K; ++k) {
        const MatrixXd& a = spec.A[static_cast<size_t>(k)][static_cast<size_t>(i - 1)];
        tmp.noalias() = a * ylag;
        acc.noalias() += tmp * a.transpose();
      }
    }
    for (int j = 1; j <= spec.Q; ++j) {
      const MatrixXd& slag = sbuf[static_cast<size_t>((t - j + 100 * m) % m)];
      for (int k = 0; k < spec.K; ++k) {
        const MatrixXd& b = spec.B[static_cast<size_t>(k)][static_cast<size_t>(j - 1)];
        tmp.noalias() = b * slag;
        acc.noalias() += tmp * b.transpose();
      }
    }
    MatrixXd sigma = 0.5 * (acc + acc.transpose());
    const MatrixXd shalf = sqrtm_sym(sigma);
    const MatrixXd delta = sample_matrix_f_raw(spec.nu1, spec.nu2, eye, rng);
    MatrixXd yt = shalf * delta * shalf;
    yt = 0.5 * (yt + yt.transpose());
    ybuf[static_cast<size_t>(t % m)] = yt;
    sbuf[static_cast<size_t>(t % m)] = std::move(sigma);
    if (t >= burnin) out.push(SpdMatrix(ybuf[static_cast<size_t>(t % m)]));
  }
  return out;
}

MatrixSeries simulate(const HarSpec& spec, int T, int burnin, RngStream& rng, SimulateInfo* info) {
  return simulate(har_expand(spec), T, burnin, rng, info);
}

}  // namespace cbf
