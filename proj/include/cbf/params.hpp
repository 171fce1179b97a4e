#pragma once

#include <variant>

#include "cbf/model.hpp"

namespace cbf {

enum class Family { matrix_f, wishart };
enum class Dynamics { bekk, har };

// Shape of an estimated model; fixes the parameter vector layout.
struct ModelShape {
  int n = 0;
  Dynamics dyn = Dynamics::bekk;
  int P = 1, Q = 1, K = 1;  // bekk orders; ignored for har
  Structure structure = Structure::diagonal;
  Family family = Family::matrix_f;

  int n_omega() const { return n * (n + 1) / 2; }
  int per_coef() const { return structure == Structure::full ? n * n : n; }
  int n_coef_mats() const { return dyn == Dynamics::har ? 3 : K * (P + Q); }
  int n_a_mats() const { return dyn == Dynamics::har ? 3 : K * P; }
  int n_nu() const { return family == Family::matrix_f ? 2 : 1; }
  int dim_u() const { return n_coef_mats() * per_coef(); }
  int dim_gamma() const { return n_omega() + dim_u(); }
  int dim() const { return dim_gamma() + n_nu(); }
  int lags() const { return dyn == Dynamics::har ? kHarMonth : std::max(P, Q); }
  void validate() const;
};

using AnySpec = std::variant<CbfSpec, HarSpec>;

// theta layout: vech(Omega); coefficient matrices in declaration order
// (bekk: A_k=1,i=1..P, ..., A_k=K, then B likewise; har: Ad, Aw, Am), each
// as column-major vec (full) or diagonal entries (diagonal structure);
// then nu1 and, for the matrix-F family, nu2. Wishart-family specs get
// nu2 = +inf when unpacked.
VectorXd pack(const AnySpec& spec, const ModelShape& shape);
AnySpec unpack(const VectorXd& theta, const ModelShape& shape);

// Sign canonicalization: flip any coefficient matrix whose leading diagonal
// entry is negative; the likelihood is invariant under C -> -C.
void canonicalize_signs(VectorXd& theta, const ModelShape& shape, bool has_omega = true);

// Unconstrained optimizer coordinates:
//  - Omega via its lower Cholesky factor, diagonal log-transformed,
//  - coefficient entries unchanged,
//  - nu_i = (n + 1) + exp(eta_i), eta clamped to [-20, 20].
VectorXd to_unconstrained(const VectorXd& theta, const ModelShape& shape);
VectorXd to_natural(const VectorXd& eta, const ModelShape& shape);

// VT second step operates on zeta = (coefficients, nu): same transforms
// without the Omega block.
VectorXd vt_to_unconstrained(const VectorXd& zeta, const ModelShape& shape);
VectorXd vt_to_natural(const VectorXd& eta, const ModelShape& shape);

// Conditional-mean path for a packed parameter vector (dispatches on shape).
std::vector<MatrixXd> shape_sigma_path(const VectorXd& theta, const ModelShape& shape,
                                       const MatrixSeries& series, const InitState& init);

}  // namespace cbf
