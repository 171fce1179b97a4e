#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace cbf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative eigenvalue tolerance for accepting a matrix as SPD.
inline constexpr double kSpdRelTol = 1e-10;

// Symmetric positive definite matrix. Construction symmetrizes the input
// ((M + M') / 2, so the stored matrix is bit-for-bit symmetric) and rejects it
// unless the smallest eigenvalue exceeds -kSpdRelTol * max|eigenvalue|.
// Eigenvalues are never clamped; near-singular inputs are accepted here and
// fail later in whatever factorization needs strict positivity.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const MatrixXd& m, double rel_tol = kSpdRelTol);

  const MatrixXd& m() const { return m_; }
  int n() const { return static_cast<int>(m_.rows()); }
  bool empty() const { return m_.size() == 0; }

  double operator()(int i, int j) const { return m_(i, j); }

 private:
  MatrixXd m_;
};

// Time series of SPD matrices of a common dimension.
struct MatrixSeries {
  int n = 0;
  std::vector<SpdMatrix> y;

  int T() const { return static_cast<int>(y.size()); }
  void push(SpdMatrix m);
  const SpdMatrix& operator[](int t) const { return y[static_cast<size_t>(t)]; }
};

// vech stacks the columns of the lower triangle (diagonal included):
// order (1,1),(2,1),...,(n,1),(2,2),(3,2),... Length n(n+1)/2.
VectorXd vech(const MatrixXd& m);

// Inverse of vech as a plain symmetric matrix; no definiteness requirement.
MatrixXd unvech_sym(const VectorXd& v);

// Inverse of vech; throws std::invalid_argument if the result is not SPD.
SpdMatrix unvech(const VectorXd& v);

// Column-major vec and its inverse.
VectorXd vec(const MatrixXd& m);
MatrixXd unvec(const VectorXd& v, int rows, int cols);

// Kronecker product, row-major blocks a(i,j) * b.
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

// Commutation matrix K of size n^2 x n^2 with K * vec(A) = vec(A') for any
// n x n matrix A. K is a symmetric permutation and an involution.
MatrixXd commutation_matrix(int n);

// Symmetric square root of a PSD matrix via eigendecomposition; negative
// roundoff eigenvalues are floored at zero. sqrtm_sym skips the SPD wrapper
// for hot paths, sqrtm_spd preserves it.
MatrixXd sqrtm_sym(const MatrixXd& m);
SpdMatrix sqrtm_spd(const SpdMatrix& m);

// Largest absolute eigenvalue of a general (not necessarily symmetric)
// square matrix.
double spectral_radius(const MatrixXd& m);

enum class MatNorm { frobenius, spectral };

// Frobenius norm or spectral norm (largest singular value).
double mat_norm(const MatrixXd& m, MatNorm which);

}  // namespace cbf
