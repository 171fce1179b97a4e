#include "cbf/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "cbf/specfun.hpp"

namespace cbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logdet_llt(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void symmetrize(MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
}

}  // namespace

DecodedTheta decode_theta(const VectorXd& theta, const ModelShape& shape) {
  if (theta.size() != shape.dim()) throw std::invalid_argument("decode_theta: wrong parameter count");
  DecodedTheta p;
  p.omega = unvech_sym(theta.head(shape.n_omega()));
  int at = shape.n_omega();
  const int pc = shape.per_coef();
  for (int c = 0; c < shape.n_coef_mats(); ++c, at += pc) {
    if (shape.structure == Structure::full) {
      p.coef.push_back(unvec(theta.segment(at, pc), shape.n, shape.n));
    } else {
      p.coef.push_back(MatrixXd(VectorXd(theta.segment(at, pc)).asDiagonal()));
    }
  }
  p.nu1 = theta(at++);
  p.nu2 = shape.n_nu() == 2 ? theta(at++) : kInf;
  return p;
}

DecodedTheta decode_zeta(const VectorXd& zeta, const ModelShape& shape) {
  if (zeta.size() != shape.dim_u() + shape.n_nu()) {
    throw std::invalid_argument("decode_zeta: wrong parameter count");
  }
  VectorXd full(shape.dim());
  full.head(shape.n_omega()).setZero();
  // Placeholder identity omega; VT callers overwrite it.
  for (int j = 0, at = 0; j < shape.n; ++j)
    for (int i = j; i < shape.n; ++i, ++at) full(at) = (i == j) ? 1.0 : 0.0;
  full.tail(shape.dim_u() + shape.n_nu()) = zeta;
  return decode_theta(full, shape);
}

MatrixXd vt_implied_omega(const MatrixXd& s_target, const std::vector<MatrixXd>& coef) {
  MatrixXd omega = s_target;
  for (const auto& c : coef) omega -= c * s_target * c.transpose();
  symmetrize(omega);
  return omega;
}

LikelihoodContext::LikelihoodContext(const MatrixSeries& series, ModelShape shape, InitState init)
    : series_(&series), shape_(std::move(shape)), init_(std::move(init)), T_(series.T()) {
  shape_.validate();
  if (series.n != shape_.n) throw std::invalid_argument("likelihood: series dimension mismatch");
  if (T_ < 1) throw std::invalid_argument("likelihood: empty series");
  if (shape_.dyn == Dynamics::bekk) {
    if (static_cast<int>(init_.Y0.size()) < shape_.P || static_cast<int>(init_.S0.size()) < shape_.Q) {
      throw std::invalid_argument("likelihood: initial state shorter than model order");
    }
    // ypad[P-1+t] = Y_t for t >= 1; ypad[P-1-j] = Y_{-j} from the init state.
    ypad_.reserve(static_cast<size_t>(shape_.P + T_));
    for (int j = shape_.P - 1; j >= 0; --j) ypad_.push_back(init_.Y0[static_cast<size_t>(j)]);
    for (int t = 0; t < T_; ++t) ypad_.push_back(series[t].m());
  } else {
    har_ = make_har_inputs(series, init_);
  }
  ld_y_.reserve(static_cast<size_t>(T_));
  for (int t = 0; t < T_; ++t) {
    Eigen::LLT<MatrixXd> llt(series[t].m());
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("likelihood: observation is numerically singular");
    }
    ld_y_.push_back(logdet_llt(llt));
    mean_ld_y_ += ld_y_.back();
  }
  mean_ld_y_ /= T_;
}

struct LikelihoodContext::Forward {
  bool with_grad = false;
  bool with_terms = false;
  double value = kInf;
  std::vector<MatrixXd> sig;    // Sigma_t, t = 1..T
  std::vector<MatrixXd> w;      // d l_t / d Sigma_t
  std::vector<double> dnu1_t;   // per-t nu partials (full, constants included)
  std::vector<double> dnu2_t;
  std::vector<double> terms;    // per-t l_t
};

bool LikelihoodContext::run_forward(const DecodedTheta& p, bool with_grad, Forward& fwd) const {
  const int n = shape_.n;
  const int T = T_;
  const bool wishart = !std::isfinite(p.nu2);
  const double nu1 = p.nu1, nu2 = p.nu2;
  if (!(nu1 > 0.0) || !std::isfinite(nu1)) return false;

  // Family constants per evaluation.
  double log_c2 = 0.0, c = 0.0, h = 0.0, lconst = 0.0;
  double dnu1_const = 0.0, dnu2_const = 0.0;
  if (!wishart) {
    const double denom = nu2 - n - 1;
    if (!(denom > 0.0)) return false;
    c = nu1 / denom;
    log_c2 = std::log(denom) - std::log(nu1);
    h = 0.5 * (nu1 + nu2);
    const double c_nu = -ln_multigamma(n, h) + ln_multigamma(n, 0.5 * nu1) + ln_multigamma(n, 0.5 * nu2);
    lconst = 0.5 * nu1 * n * log_c2 + c_nu;
    const double psi_h = multi_digamma(n, h);
    dnu1_const = 0.5 * n * log_c2 - 0.5 * n + 0.5 * (-psi_h + multi_digamma(n, 0.5 * nu1));
    dnu2_const = 0.5 * nu1 * n / denom + 0.5 * (-psi_h + multi_digamma(n, 0.5 * nu2));
  } else {
    if (!(nu1 > n - 1)) return false;
    lconst = ln_multigamma(n, 0.5 * nu1) + 0.5 * nu1 * n * std::numbers::ln2;
    dnu1_const = 0.5 * (multi_digamma(n, 0.5 * nu1) + n * std::numbers::ln2 - n * std::log(nu1) - n);
  }

  fwd.with_grad = with_grad;
  fwd.sig.assign(static_cast<size_t>(T), MatrixXd());
  if (with_grad) {
    fwd.w.assign(static_cast<size_t>(T), MatrixXd());
    fwd.dnu1_t.assign(static_cast<size_t>(T), 0.0);
    fwd.dnu2_t.assign(static_cast<size_t>(T), 0.0);
  }
  if (fwd.with_terms) fwd.terms.assign(static_cast<size_t>(T), 0.0);

  const int n_a = shape_.n_a_mats();
  const int n_c = shape_.n_coef_mats();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  MatrixXd acc(n, n), tmp(n, n), m2(n, n);
  Eigen::LLT<MatrixXd> llt_s(n), llt_m(n);
  double value = 0.0;

  for (int t = 1; t <= T; ++t) {
    acc = p.omega;
    for (int a = 0; a < n_a; ++a) {
      const MatrixXd* x = nullptr;
      if (shape_.dyn == Dynamics::har) {
        const auto& src = a == 0 ? har_.yd : (a == 1 ? har_.yw : har_.ym);
        x = &src[static_cast<size_t>(t - 1)];
      } else {
        const int lag = a % shape_.P + 1;  // coef index a = k*P + (lag-1)
        x = &ypad_[static_cast<size_t>(shape_.P - 1 + t - lag)];
      }
      const MatrixXd& cmat = p.coef[static_cast<size_t>(a)];
      tmp.noalias() = cmat * (*x);
      acc.noalias() += tmp * cmat.transpose();
    }
    for (int b = n_a; b < n_c; ++b) {
      const int j = (b - n_a) % shape_.Q + 1;
      const int s = t - j;
      const MatrixXd& slag =
          s >= 1 ? fwd.sig[static_cast<size_t>(s - 1)] : init_.S0[static_cast<size_t>(-s)];
      const MatrixXd& bmat = p.coef[static_cast<size_t>(b)];
      tmp.noalias() = bmat * slag;
      acc.noalias() += tmp * bmat.transpose();
    }
    symmetrize(acc);

    llt_s.compute(acc);
    if (llt_s.info() != Eigen::Success) return false;
    const double ld_s = logdet_llt(llt_s);
    const MatrixXd& y = series_->y[static_cast<size_t>(t - 1)].m();
    double lt;
    if (!wishart) {
      m2 = acc + c * y;
      llt_m.compute(m2);
      if (llt_m.info() != Eigen::Success) return false;
      const double ld_sx = logdet_llt(llt_m);
      lt = 0.5 * nu1 * ld_s - 0.5 * (nu1 - n - 1) * ld_y_[static_cast<size_t>(t - 1)] +
           h * (ld_sx - ld_s) + lconst;
      if (with_grad) {
        const MatrixXd sinv = llt_s.solve(eye);
        const MatrixXd minv = llt_m.solve(eye);
        fwd.w[static_cast<size_t>(t - 1)] = -0.5 * nu2 * sinv + h * minv;
        const double tr_my = (minv * y).trace();
        const double denom = nu2 - n - 1;
        fwd.dnu1_t[static_cast<size_t>(t - 1)] =
            dnu1_const + 0.5 * ld_s - 0.5 * ld_y_[static_cast<size_t>(t - 1)] +
            0.5 * (ld_sx - ld_s) + h * tr_my / denom;
        fwd.dnu2_t[static_cast<size_t>(t - 1)] =
            dnu2_const + 0.5 * (ld_sx - ld_s) - h * tr_my * nu1 / (denom * denom);
      }
    } else {
      const MatrixXd siy = llt_s.solve(y);
      const double tr_sy = siy.trace();
      lt = 0.5 * nu1 * (ld_s - n * std::log(nu1)) -
           0.5 * (nu1 - n - 1) * ld_y_[static_cast<size_t>(t - 1)] + 0.5 * nu1 * tr_sy + lconst;
      if (with_grad) {
        const MatrixXd sinv = llt_s.solve(eye);
        MatrixXd wt = 0.5 * nu1 * (sinv - siy * sinv);
        symmetrize(wt);
        fwd.w[static_cast<size_t>(t - 1)] = std::move(wt);
        fwd.dnu1_t[static_cast<size_t>(t - 1)] =
            dnu1_const + 0.5 * (ld_s - ld_y_[static_cast<size_t>(t - 1)] + tr_sy);
      }
    }
    if (fwd.with_terms) fwd.terms[static_cast<size_t>(t - 1)] = lt;
    value += lt;
    fwd.sig[static_cast<size_t>(t - 1)] = acc;
  }
  value /= T;
  if (!std::isfinite(value)) return false;
  fwd.value = value;
  return true;
}

double LikelihoodContext::value(const DecodedTheta& p) const {
  Forward fwd;
  return run_forward(p, false, fwd) ? fwd.value : kInf;
}

VectorXd LikelihoodContext::per_t_terms(const DecodedTheta& p) const {
  Forward fwd;
  fwd.with_terms = true;
  if (!run_forward(p, false, fwd)) throw std::runtime_error("likelihood: non-finite evaluation");
  return Eigen::Map<const VectorXd>(fwd.terms.data(), T_);
}

std::vector<MatrixXd> LikelihoodContext::sigma_path(const DecodedTheta& p) const {
  Forward fwd;
  if (!run_forward(p, false, fwd)) throw std::runtime_error("likelihood: non-finite evaluation");
  return std::move(fwd.sig);
}

LikGrad LikelihoodContext::value_grad(const DecodedTheta& p) const {
  const int n = shape_.n;
  const int T = T_;
  LikGrad g;
  Forward fwd;
  if (!run_forward(p, true, fwd)) return g;
  g.ok = true;
  g.value = fwd.value;
  g.g_omega = MatrixXd::Zero(n, n);
  g.g_coef.assign(static_cast<size_t>(shape_.n_coef_mats()), MatrixXd::Zero(n, n));
  const int n_a = shape_.n_a_mats();
  const int n_c = shape_.n_coef_mats();

  // Adjoint recursion lambda_t = (1/T) W_t + sum_{j,k} B_kj' lambda_{t+j} B_kj,
  // run backward with a ring buffer of the next Q adjoints.
  const int q = shape_.dyn == Dynamics::bekk ? shape_.Q : 0;
  std::vector<MatrixXd> ring(static_cast<size_t>(q + 1));
  MatrixXd lam(n, n), tmp(n, n);
  double snu1 = 0.0, snu2 = 0.0;
  for (int t = T; t >= 1; --t) {
    lam = (1.0 / T) * fwd.w[static_cast<size_t>(t - 1)];
    for (int b = n_a; b < n_c; ++b) {
      const int j = (b - n_a) % shape_.Q + 1;
      if (t + j > T) continue;
      const MatrixXd& lnext = ring[static_cast<size_t>((t + j) % (q + 1))];
      const MatrixXd& bmat = p.coef[static_cast<size_t>(b)];
      tmp.noalias() = bmat.transpose() * lnext;
      lam.noalias() += tmp * bmat;
    }
    g.g_omega += lam;
    for (int a = 0; a < n_a; ++a) {
      const MatrixXd* x = nullptr;
      if (shape_.dyn == Dynamics::har) {
        const auto& src = a == 0 ? har_.yd : (a == 1 ? har_.yw : har_.ym);
        x = &src[static_cast<size_t>(t - 1)];
      } else {
        const int lag = a % shape_.P + 1;
        x = &ypad_[static_cast<size_t>(shape_.P - 1 + t - lag)];
      }
      tmp.noalias() = lam * p.coef[static_cast<size_t>(a)];
      g.g_coef[static_cast<size_t>(a)].noalias() += 2.0 * (tmp * (*x));
    }
    for (int b = n_a; b < n_c; ++b) {
      const int j = (b - n_a) % shape_.Q + 1;
      const int s = t - j;
      const MatrixXd& slag =
          s >= 1 ? fwd.sig[static_cast<size_t>(s - 1)] : init_.S0[static_cast<size_t>(-s)];
      tmp.noalias() = lam * p.coef[static_cast<size_t>(b)];
      g.g_coef[static_cast<size_t>(b)].noalias() += 2.0 * (tmp * slag);
    }
    snu1 += fwd.dnu1_t[static_cast<size_t>(t - 1)];
    snu2 += fwd.dnu2_t[static_cast<size_t>(t - 1)];
    ring[static_cast<size_t>(t % (q + 1))] = lam;
  }
  g.g_nu1 = snu1 / T;
  g.g_nu2 = std::isfinite(p.nu2) ? snu2 / T : 0.0;
  return g;
}

MatrixXd LikelihoodContext::per_t_scores(const DecodedTheta& p, bool vt,
                                         const MatrixXd& s_target) const {
  const int n = shape_.n;
  const int T = T_;
  Forward fwd;
  if (!run_forward(p, true, fwd)) throw std::runtime_error("likelihood: non-finite evaluation");

  // Coordinate basis in packed order: per-coordinate constant dOmega and a
  // single perturbed coefficient entry.
  struct Coord {
    MatrixXd domega;   // constant part of dSigma (omega block or VT chain)
    int coef = -1;     // index of the perturbed coefficient matrix
    MatrixXd dcoef;    // perturbation of that matrix
  };
  std::vector<Coord> coords;
  const MatrixXd zero = MatrixXd::Zero(n, n);
  if (!vt) {
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i) {
        Coord c;
        c.domega = zero;
        c.domega(i, j) = 1.0;
        c.domega(j, i) = 1.0;
        if (i == j) c.domega(i, j) = 1.0;
        coords.push_back(std::move(c));
      }
  }
  const int pc = shape_.per_coef();
  for (int cm = 0; cm < shape_.n_coef_mats(); ++cm) {
    for (int e = 0; e < pc; ++e) {
      Coord c;
      c.coef = cm;
      c.dcoef = zero;
      if (shape_.structure == Structure::full) {
        c.dcoef(e % n, e / n) = 1.0;  // column-major vec order
      } else {
        c.dcoef(e, e) = 1.0;
      }
      if (vt) {
        // Omega = S - sum C S C' couples coefficient moves into the intercept.
        const MatrixXd& cmat = p.coef[static_cast<size_t>(cm)];
        MatrixXd dom = -(c.dcoef * s_target * cmat.transpose() + cmat * s_target * c.dcoef.transpose());
        symmetrize(dom);
        c.domega = std::move(dom);
      } else {
        c.domega = zero;
      }
      coords.push_back(std::move(c));
    }
  }
  const int d_dyn = static_cast<int>(coords.size());
  const int d = d_dyn + shape_.n_nu();
  MatrixXd scores(T, d);

  const int q = shape_.dyn == Dynamics::bekk ? shape_.Q : 0;
  const int n_a = shape_.n_a_mats();
  const int n_c = shape_.n_coef_mats();
  // dsig[m] holds the last Q sensitivity lags for coordinate m.
  std::vector<std::vector<MatrixXd>> dsig(
      static_cast<size_t>(d_dyn),
      std::vector<MatrixXd>(static_cast<size_t>(std::max(q, 1)), MatrixXd::Zero(n, n)));
  MatrixXd dacc(n, n), tmp(n, n);

  for (int t = 1; t <= T; ++t) {
    const MatrixXd& wt = fwd.w[static_cast<size_t>(t - 1)];
    for (int m = 0; m < d_dyn; ++m) {
      const Coord& cd = coords[static_cast<size_t>(m)];
      dacc = cd.domega;
      if (cd.coef >= 0) {
        const MatrixXd* x = nullptr;
        if (cd.coef < n_a) {
          if (shape_.dyn == Dynamics::har) {
            const auto& src = cd.coef == 0 ? har_.yd : (cd.coef == 1 ? har_.yw : har_.ym);
            x = &src[static_cast<size_t>(t - 1)];
          } else {
            const int lag = cd.coef % shape_.P + 1;
            x = &ypad_[static_cast<size_t>(shape_.P - 1 + t - lag)];
          }
        } else {
          const int j = (cd.coef - n_a) % shape_.Q + 1;
          const int s = t - j;
          x = s >= 1 ? &fwd.sig[static_cast<size_t>(s - 1)] : &init_.S0[static_cast<size_t>(-s)];
        }
        const MatrixXd& cmat = p.coef[static_cast<size_t>(cd.coef)];
        tmp.noalias() = cd.dcoef * (*x);
        dacc.noalias() += tmp * cmat.transpose();
        tmp.noalias() = cmat * (*x);
        dacc.noalias() += tmp * cd.dcoef.transpose();
      }
      for (int b = n_a; b < n_c; ++b) {
        const int j = (b - n_a) % shape_.Q + 1;
        if (t - j < 1) continue;  // pre-sample state is parameter-free
        const MatrixXd& bmat = p.coef[static_cast<size_t>(b)];
        const MatrixXd& dslag = dsig[static_cast<size_t>(m)][static_cast<size_t>((t - j) % std::max(q, 1))];
        tmp.noalias() = bmat * dslag;
        dacc.noalias() += tmp * bmat.transpose();
      }
      scores(t - 1, m) = (wt.array() * dacc.array()).sum();
      if (q > 0) dsig[static_cast<size_t>(m)][static_cast<size_t>(t % q)] = dacc;
    }
    scores(t - 1, d_dyn) = fwd.dnu1_t[static_cast<size_t>(t - 1)];
    if (shape_.n_nu() == 2) scores(t - 1, d_dyn + 1) = fwd.dnu2_t[static_cast<size_t>(t - 1)];
  }
  return scores;
}

VectorXd assemble_theta_grad(const LikGrad& g, const ModelShape& shape, bool include_omega) {
  const int d = include_omega ? shape.dim() : shape.dim_u() + shape.n_nu();
  VectorXd out(d);
  int at = 0;
  if (include_omega) {
    for (int j = 0; j < shape.n; ++j)
      for (int i = j; i < shape.n; ++i) {
        out(at++) = (i == j) ? g.g_omega(i, i) : 2.0 * g.g_omega(i, j);
      }
  }
  for (int c = 0; c < shape.n_coef_mats(); ++c) {
    const MatrixXd& gc = g.g_coef[static_cast<size_t>(c)];
    if (shape.structure == Structure::full) {
      out.segment(at, shape.n * shape.n) = vec(gc);
      at += shape.n * shape.n;
    } else {
      out.segment(at, shape.n) = gc.diagonal();
      at += shape.n;
    }
  }
  out(at++) = g.g_nu1;
  if (shape.n_nu() == 2) out(at++) = g.g_nu2;
  return out;
}

VectorXd assemble_eta_grad(const LikGrad& g, const ModelShape& shape, const VectorXd& eta,
                           bool include_omega) {
  VectorXd out = assemble_theta_grad(g, shape, include_omega);
  int at = 0;
  if (include_omega) {
    MatrixXd l = MatrixXd::Zero(shape.n, shape.n);
    int k = 0;
    for (int j = 0; j < shape.n; ++j)
      for (int i = j; i < shape.n; ++i, ++k) {
        const double e = eta(k);
        l(i, j) = (i == j) ? std::exp(std::min(20.0, std::max(-20.0, e))) : e;
      }
    const MatrixXd gl = g.g_omega * l;
    for (int j = 0; j < shape.n; ++j)
      for (int i = j; i < shape.n; ++i) {
        out(at) = (i == j) ? 2.0 * gl(j, j) * l(j, j) : 2.0 * gl(i, j);
        ++at;
      }
  }
  at = (include_omega ? shape.n_omega() : 0) + shape.dim_u();
  for (int i = 0; i < shape.n_nu(); ++i, ++at) {
    const double e = std::min(20.0, std::max(-20.0, eta(at)));
    out(at) *= std::exp(e);
  }
  return out;
}

LikGrad vt_chain_adjust(const LikGrad& g, const DecodedTheta& p, const MatrixXd& s_target) {
  LikGrad out = g;
  for (size_t c = 0; c < out.g_coef.size(); ++c) {
    out.g_coef[c] -= 2.0 * (g.g_omega * p.coef[c] * s_target);
  }
  return out;
}

}  // namespace cbf
