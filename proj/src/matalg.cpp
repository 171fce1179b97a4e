#include "cbf/matalg.hpp"

#include <cmath>

namespace cbf {

SpdMatrix::SpdMatrix(const MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
  }
  MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const double scale = std::max(std::abs(lo), std::abs(hi));
  if (!(scale > 0.0) || lo <= -rel_tol * scale || !std::isfinite(scale)) {
    throw std::invalid_argument("SpdMatrix: matrix is not positive definite within tolerance");
  }
  m_ = std::move(sym);
}

void MatrixSeries::push(SpdMatrix m) {
  if (y.empty()) {
    n = m.n();
  } else if (m.n() != n) {
    throw std::invalid_argument("MatrixSeries: inconsistent matrix dimension");
  }
  y.push_back(std::move(m));
}

VectorXd vech(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("vech: matrix must be square");
  const int n = static_cast<int>(m.rows());
  VectorXd v(n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(k++) = m(i, j);
  return v;
}

namespace {
// Side length implied by a vech vector, or -1 if the length is not triangular.
int vech_dim(Eigen::Index len) {
  const int n = static_cast<int>(std::round((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  return (static_cast<Eigen::Index>(n) * (n + 1) / 2 == len && n > 0) ? n : -1;
}
}  // namespace

MatrixXd unvech_sym(const VectorXd& v) {
  const int n = vech_dim(v.size());
  if (n < 0) throw std::invalid_argument("unvech: vector length is not triangular");
  MatrixXd m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

SpdMatrix unvech(const VectorXd& v) { return SpdMatrix(unvech_sym(v)); }

VectorXd vec(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

MatrixXd unvec(const VectorXd& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw std::invalid_argument("unvec: size mismatch");
  }
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXd commutation_matrix(int n) {
  if (n < 1) throw std::invalid_argument("commutation_matrix: n must be positive");
  MatrixXd k = MatrixXd::Zero(n * n, n * n);
  // vec(A) index of entry (i,j) is j*n + i; K maps it to vec(A') index i*n + j.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i * n + j, j * n + i) = 1.0;
  return k;
}

MatrixXd sqrtm_sym(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("sqrtm: eigendecomposition failed");
  VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

SpdMatrix sqrtm_spd(const SpdMatrix& m) { return SpdMatrix(sqrtm_sym(m.m())); }

double spectral_radius(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  Eigen::EigenSolver<MatrixXd> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double mat_norm(const MatrixXd& m, MatNorm which) {
  switch (which) {
    case MatNorm::frobenius:
      return m.norm();
    case MatNorm::spectral:
      return m.jacobiSvd().singularValues()(0);
  }
  throw std::invalid_argument("mat_norm: unknown norm");
}

}  // namespace cbf
