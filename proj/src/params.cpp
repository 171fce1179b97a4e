#include "cbf/params.hpp"

#include <cmath>
#include <limits>

namespace cbf {

namespace {

constexpr double kEtaClamp = 20.0;

double clamp_eta(double e) { return std::min(kEtaClamp, std::max(-kEtaClamp, e)); }

// Writes one coefficient matrix into theta at offset; returns new offset.
int write_coef(VectorXd& theta, int at, const MatrixXd& c, const ModelShape& shape) {
  if (shape.structure == Structure::full) {
    theta.segment(at, shape.n * shape.n) = vec(c);
    return at + shape.n * shape.n;
  }
  theta.segment(at, shape.n) = c.diagonal();
  return at + shape.n;
}

MatrixXd read_coef(const VectorXd& theta, int& at, const ModelShape& shape) {
  if (shape.structure == Structure::full) {
    MatrixXd c = unvec(theta.segment(at, shape.n * shape.n), shape.n, shape.n);
    at += shape.n * shape.n;
    return c;
  }
  MatrixXd c = MatrixXd(VectorXd(theta.segment(at, shape.n)).asDiagonal());
  at += shape.n;
  return c;
}

}  // namespace

void ModelShape::validate() const {
  if (n < 1) throw std::invalid_argument("shape: n must be positive");
  if (dyn == Dynamics::bekk && (P < 0 || Q < 0 || K < 1)) {
    throw std::invalid_argument("shape: invalid orders");
  }
}

VectorXd pack(const AnySpec& spec, const ModelShape& shape) {
  shape.validate();
  VectorXd theta(shape.dim());
  int at = 0;
  if (const CbfSpec* s = std::get_if<CbfSpec>(&spec)) {
    if (shape.dyn != Dynamics::bekk) throw std::invalid_argument("pack: shape/spec dynamics mismatch");
    if (s->n != shape.n || s->P != shape.P || s->Q != shape.Q || s->K != shape.K) {
      throw std::invalid_argument("pack: shape/spec order mismatch");
    }
    theta.segment(at, shape.n_omega()) = vech(s->omega.m());
    at += shape.n_omega();
    for (const auto& row : s->A)
      for (const auto& a : row) at = write_coef(theta, at, a, shape);
    for (const auto& row : s->B)
      for (const auto& b : row) at = write_coef(theta, at, b, shape);
    theta(at++) = s->nu1;
    if (shape.n_nu() == 2) theta(at++) = s->nu2;
  } else {
    const HarSpec& h = std::get<HarSpec>(spec);
    if (shape.dyn != Dynamics::har) throw std::invalid_argument("pack: shape/spec dynamics mismatch");
    if (h.n != shape.n) throw std::invalid_argument("pack: dimension mismatch");
    theta.segment(at, shape.n_omega()) = vech(h.omega.m());
    at += shape.n_omega();
    at = write_coef(theta, at, h.Ad, shape);
    at = write_coef(theta, at, h.Aw, shape);
    at = write_coef(theta, at, h.Am, shape);
    theta(at++) = h.nu1;
    if (shape.n_nu() == 2) theta(at++) = h.nu2;
  }
  return theta;
}

AnySpec unpack(const VectorXd& theta, const ModelShape& shape) {
  shape.validate();
  if (theta.size() != shape.dim()) throw std::invalid_argument("unpack: wrong parameter count");
  int at = 0;
  SpdMatrix omega = unvech(theta.segment(at, shape.n_omega()));
  at += shape.n_omega();
  if (shape.dyn == Dynamics::bekk) {
    CbfSpec s;
    s.n = shape.n;
    s.P = shape.P;
    s.Q = shape.Q;
    s.K = shape.K;
    s.structure = shape.structure;
    s.omega = std::move(omega);
    s.A.resize(shape.K);
    for (int k = 0; k < shape.K; ++k)
      for (int i = 0; i < shape.P; ++i) s.A[k].push_back(read_coef(theta, at, shape));
    s.B.resize(shape.K);
    for (int k = 0; k < shape.K; ++k)
      for (int j = 0; j < shape.Q; ++j) s.B[k].push_back(read_coef(theta, at, shape));
    s.nu1 = theta(at++);
    s.nu2 = shape.n_nu() == 2 ? theta(at++) : std::numeric_limits<double>::infinity();
    s.validate();
    return s;
  }
  HarSpec h;
  h.n = shape.n;
  h.structure = shape.structure;
  h.omega = std::move(omega);
  h.Ad = read_coef(theta, at, shape);
  h.Aw = read_coef(theta, at, shape);
  h.Am = read_coef(theta, at, shape);
  h.nu1 = theta(at++);
  h.nu2 = shape.n_nu() == 2 ? theta(at++) : std::numeric_limits<double>::infinity();
  h.validate();
  return h;
}

void canonicalize_signs(VectorXd& theta, const ModelShape& shape, bool has_omega) {
  const int base = has_omega ? shape.n_omega() : 0;
  const int pc = shape.per_coef();
  for (int c = 0; c < shape.n_coef_mats(); ++c) {
    // Entry (0,0) is the first element of the block in both layouts.
    const int at = base + c * pc;
    if (theta(at) < 0.0) theta.segment(at, pc) = -theta.segment(at, pc);
  }
}

namespace {

void nu_to_eta(const VectorXd& theta, VectorXd& eta, int at, int count, int n) {
  for (int i = 0; i < count; ++i) {
    const double v = theta(at + i);
    if (!(v > n + 1)) throw std::invalid_argument("to_unconstrained: nu must exceed n + 1");
    eta(at + i) = clamp_eta(std::log(v - (n + 1)));
  }
}

void nu_to_natural(const VectorXd& eta, VectorXd& theta, int at, int count, int n) {
  for (int i = 0; i < count; ++i) theta(at + i) = (n + 1) + std::exp(clamp_eta(eta(at + i)));
}

}  // namespace

VectorXd to_unconstrained(const VectorXd& theta, const ModelShape& shape) {
  if (theta.size() != shape.dim()) throw std::invalid_argument("to_unconstrained: wrong parameter count");
  VectorXd eta = theta;
  const MatrixXd omega = unvech_sym(theta.head(shape.n_omega()));
  Eigen::LLT<MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("to_unconstrained: omega is not positive definite");
  }
  const MatrixXd l = llt.matrixL();
  int at = 0;
  for (int j = 0; j < shape.n; ++j)
    for (int i = j; i < shape.n; ++i) eta(at++) = (i == j) ? std::log(l(j, j)) : l(i, j);
  nu_to_eta(theta, eta, shape.dim_gamma(), shape.n_nu(), shape.n);
  return eta;
}

VectorXd to_natural(const VectorXd& eta, const ModelShape& shape) {
  if (eta.size() != shape.dim()) throw std::invalid_argument("to_natural: wrong parameter count");
  VectorXd theta = eta;
  MatrixXd l = MatrixXd::Zero(shape.n, shape.n);
  int at = 0;
  for (int j = 0; j < shape.n; ++j)
    for (int i = j; i < shape.n; ++i) l(i, j) = (i == j) ? std::exp(clamp_eta(eta(at++))) : eta(at++);
  theta.head(shape.n_omega()) = vech(l * l.transpose());
  nu_to_natural(eta, theta, shape.dim_gamma(), shape.n_nu(), shape.n);
  return theta;
}

VectorXd vt_to_unconstrained(const VectorXd& zeta, const ModelShape& shape) {
  if (zeta.size() != shape.dim_u() + shape.n_nu()) {
    throw std::invalid_argument("vt_to_unconstrained: wrong parameter count");
  }
  VectorXd eta = zeta;
  nu_to_eta(zeta, eta, shape.dim_u(), shape.n_nu(), shape.n);
  return eta;
}

VectorXd vt_to_natural(const VectorXd& eta, const ModelShape& shape) {
  if (eta.size() != shape.dim_u() + shape.n_nu()) {
    throw std::invalid_argument("vt_to_natural: wrong parameter count");
  }
  VectorXd zeta = eta;
  nu_to_natural(eta, zeta, shape.dim_u(), shape.n_nu(), shape.n);
  return zeta;
}

std::vector<MatrixXd> shape_sigma_path(const VectorXd& theta, const ModelShape& shape,
                                       const MatrixSeries& series, const InitState& init) {
  const AnySpec spec = unpack(theta, shape);
  if (const CbfSpec* s = std::get_if<CbfSpec>(&spec)) return sigma_path(*s, series, init);
  return har_sigma_path(std::get<HarSpec>(spec), series, init);
}

}  // namespace cbf
