#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "qmr/types.hpp"

namespace qmr {

/// Hilbert-Schmidt inner product tr(A^dag B).
inline Complex hs_inner(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "hs_inner");
  return (a.adjoint() * b).trace();
}

inline double hs_norm(const Matrix& a) { return a.norm(); }

// ---------------------------------------------------------------------------
// OperatorSubspace: a HS-orthonormal basis spanning a subspace of operator
// space. Basis order is deterministic (input order, modified Gram-Schmidt),
// so downstream reduced models are reproducible run to run.
// ---------------------------------------------------------------------------

struct OperatorSubspace {
  Eigen::Index dim_h = 0;
  std::vector<Matrix> basis;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(basis.size()); }

  /// Coefficients of X in the basis plus the orthogonal remainder.
  std::pair<Vector, Matrix> decompose(const Matrix& x) const {
    Vector c(dim());
    Matrix rem = x;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      c(i) = hs_inner(basis[i], rem);
      rem -= c(i) * basis[i];
    }
    return {c, rem};
  }

  Matrix from_coefficients(const Vector& c) const {
    Matrix x = Matrix::Zero(dim_h, dim_h);
    for (Eigen::Index i = 0; i < dim(); ++i) x += c(i) * basis[i];
    return x;
  }

  /// Stacked vectorized basis, one column per element.
  Matrix stacked() const {
    Matrix v(dim_h * dim_h, dim());
    for (Eigen::Index i = 0; i < dim(); ++i) v.col(i) = vec(basis[i]);
    return v;
  }

  double max_orthonormality_defect() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i)
      for (Eigen::Index j = i; j < dim(); ++j) {
        Complex g = hs_inner(basis[i], basis[j]);
        worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
      }
    return worst;
  }
};

/// Projects X onto the span; grows the basis by the normalized remainder when
/// its norm exceeds tol * max(1, ||X||). Returns true if the basis grew.
inline bool absorb(OperatorSubspace& s, const Matrix& x,
                   double tolerance = tol::rank_drop) {
  Matrix rem = x;
  // Two MGS passes; the second re-orthogonalization keeps the basis clean
  // when x is nearly inside the span.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : s.basis) rem -= hs_inner(b, rem) * b;
  double thresh = tolerance * std::max(1.0, hs_norm(x));
  if (rem.norm() <= thresh) return false;
  s.basis.push_back(rem / rem.norm());
  return true;
}

inline OperatorSubspace orthonormalize(const std::vector<Matrix>& ops,
                                       double tolerance = tol::rank_drop) {
  require(!ops.empty(), "orthonormalize: empty input");
  OperatorSubspace s;
  s.dim_h = ops.front().rows();
  for (const auto& op : ops) {
    require_square(op, "orthonormalize");
    require(op.rows() == s.dim_h, "orthonormalize: mixed dimensions");
    absorb(s, op, tolerance);
  }
  return s;
}

struct ResidualResult {
  Matrix projection;
  double residual_norm = 0.0;
};

inline ResidualResult residual(const OperatorSubspace& s, const Matrix& x) {
  require(x.rows() == s.dim_h && x.cols() == s.dim_h,
          "residual: dimension mismatch");
  auto [c, rem] = s.decompose(x);
  return {x - rem, rem.norm()};
}

inline bool contains(const OperatorSubspace& s, const Matrix& x,
                     double tolerance = tol::num) {
  return residual(s, x).residual_norm <= tolerance * std::max(1.0, hs_norm(x));
}

inline bool subspace_contains(const OperatorSubspace& outer,
                              const OperatorSubspace& inner,
                              double tolerance = tol::num) {
  for (const auto& b : inner.basis)
    if (!contains(outer, b, tolerance)) return false;
  return true;
}

inline bool subspace_equal(const OperatorSubspace& s1,
                           const OperatorSubspace& s2,
                           double tolerance = tol::num) {
  require(s1.dim_h == s2.dim_h, "subspace_equal: ambient dimension mismatch");
  return s1.dim() == s2.dim() && subspace_contains(s1, s2, tolerance) &&
         subspace_contains(s2, s1, tolerance);
}

// ---------------------------------------------------------------------------
// Superoperator: matrix of a linear map on operators in the column-stacked
// vectorization.
// ---------------------------------------------------------------------------

struct Superoperator {
  Eigen::Index dim_h = 0;
  Matrix mat;  // n^2 x n^2

  static Superoperator zero(Eigen::Index n) {
    return {n, Matrix::Zero(n * n, n * n)};
  }
  static Superoperator identity_map(Eigen::Index n) {
    return {n, Matrix::Identity(n * n, n * n)};
  }

  Matrix apply(const Matrix& x) const {
    require(x.rows() == dim_h && x.cols() == dim_h,
            "Superoperator::apply: dimension mismatch");
    return unvec(mat * vec(x), dim_h);
  }

  Superoperator compose(const Superoperator& inner) const {
    require(dim_h == inner.dim_h, "Superoperator::compose: dimension mismatch");
    return {dim_h, mat * inner.mat};
  }
};

/// Superoperator of X -> A X B.
inline Superoperator sandwich_superoperator(const Matrix& a, const Matrix& b) {
  require_square(a, "sandwich");
  require_same_dim(a, b, "sandwich");
  return {a.rows(), kron(b.transpose(), a)};
}

inline Superoperator superoperator_from_map(
    const std::function<Matrix(const Matrix&)>& f, Eigen::Index n) {
  Superoperator s;
  s.dim_h = n;
  s.mat.resize(n * n, n * n);
  Matrix e = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      e(i, j) = 1.0;
      s.mat.col(i + n * j) = vec(f(e));
      e(i, j) = 0.0;
    }
  return s;
}

/// Orthogonal (HS) projector onto the subspace, as a superoperator.
inline Superoperator subspace_projector(const OperatorSubspace& s) {
  Matrix v = s.stacked();
  return {s.dim_h, v * v.adjoint()};
}

// ---------------------------------------------------------------------------
// Index gymnastics used by the Lindblad-form certificate.
// ---------------------------------------------------------------------------

/// Choi-basis form of a superoperator S: the Hermitian matrix
/// M = sum_ab s_ab vec(F_a) vec(F_b)^dag where S(O) = sum_ab s_ab F_a O F_b
/// over any HS-orthonormal Hermitian operator basis {F_a}. Entrywise,
/// M[(i + n k), (l + n j)] = S[(i + n l), (k + n j)].
inline Matrix coefficient_matrix(const Superoperator& s) {
  const Eigen::Index n = s.dim_h;
  Matrix m(n * n, n * n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index l = 0; l < n; ++l)
          m(i + n * k, l + n * j) = s.mat(i + n * l, k + n * j);
  return m;
}

/// Choi matrix sum_ij E_ij (x) Phi(E_ij) of a map given as a superoperator
/// from B(C^nin) to B(C^nout); used for complete-positivity checks.
inline Matrix choi_matrix(const Matrix& superop_mat, Eigen::Index nin,
                          Eigen::Index nout) {
  Matrix c = Matrix::Zero(nin * nout, nin * nout);
  Matrix e = Matrix::Zero(nin, nin);
  for (Eigen::Index j = 0; j < nin; ++j)
    for (Eigen::Index i = 0; i < nin; ++i) {
      e(i, j) = 1.0;
      Matrix fe = unvec(superop_mat * vec(e), nout);
      c.block(i * nout, j * nout, nout, nout) = fe;
      e(i, j) = 0.0;
    }
  return c;
}

inline double min_eigenvalue(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((hermitian + hermitian.adjoint()) / 2.0).eval(),
      Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// S preserves Hermiticity iff T conj(S) T = S with T the transpose
/// permutation (T vec(X) = vec(X^T)); returns the defect relative to ||S||.
inline double hermiticity_preservation_defect(const Superoperator& s) {
  const Eigen::Index n = s.dim_h;
  double defect2 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index k = 0; k < n; ++k) {
          Complex d = std::conj(s.mat(j + n * i, l + n * k)) -
                      s.mat(i + n * j, k + n * l);
          defect2 += std::norm(d);
        }
  double scale = std::max(1.0, s.mat.norm());
  return std::sqrt(defect2) / scale;
}

}  // namespace qmr
