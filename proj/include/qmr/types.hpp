#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmr {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Dense n x n operator on the system Hilbert space.
using Operator = Matrix;

namespace tol {
// Two orders above double-precision accumulation at n <= 64.
inline constexpr double orth = 1e-10;
inline constexpr double herm = 1e-10;
inline constexpr double rank_drop = 1e-10;
inline constexpr double psd = 1e-9;
inline constexpr double structure = 1e-8;
inline constexpr double num = 1e-10;
}  // namespace tol

inline const Complex kI{0.0, 1.0};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

inline void require_square(const Matrix& a, const std::string& what) {
  if (a.rows() != a.cols())
    throw DimensionError(what + ": matrix must be square, got " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
}

inline void require_same_dim(const Matrix& a, const Matrix& b,
                             const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(what + ": dimension mismatch");
}

// ---------------------------------------------------------------------------
// Vectorization: column-stacking, vec(X)[i + n*j] = X(i, j). Fixed once and
// used everywhere; superoperator of X -> A X B is kron(B^T, A).
// ---------------------------------------------------------------------------

inline Vector vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index n) {
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

// Pauli matrices and Pauli strings (leftmost character acts on qubit 0).

inline Matrix pauli(char c) {
  Matrix m(2, 2);
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'I':
      m << 1, 0, 0, 1;
      break;
    case 'X':
      m << 0, 1, 1, 0;
      break;
    case 'Y':
      m << 0, Complex(0, -1), Complex(0, 1), 0;
      break;
    case 'Z':
      m << 1, 0, 0, -1;
      break;
    default:
      throw ValidationError(std::string("unknown Pauli label '") + c + "'");
  }
  return m;
}

inline Matrix pauli_string(const std::string& s) {
  require(!s.empty(), "empty Pauli string");
  Matrix m = pauli(s[0]);
  for (std::size_t i = 1; i < s.size(); ++i) m = kron(m, pauli(s[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Seeded random sampling. All randomized algorithms take an explicit engine
// or seed so runs are reproducible.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline Matrix random_matrix(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline Matrix random_hermitian(Eigen::Index n, Rng& rng) {
  Matrix m = random_matrix(n, rng);
  return ((m + m.adjoint()) / 2.0).eval();
}

inline Matrix random_density(Eigen::Index n, Rng& rng) {
  Matrix g = random_matrix(n, rng);
  Matrix rho = g * g.adjoint();
  return (rho / rho.trace().real()).eval();
}

// Hermiticity / density-operator validation.

inline double hermiticity_residual(const Matrix& x) {
  double scale = std::max(1.0, x.norm());
  return (x - x.adjoint()).norm() / scale;
}

inline bool is_hermitian(const Matrix& x, double tolerance = tol::herm) {
  return hermiticity_residual(x) <= tolerance;
}

inline void validate_density(const Matrix& rho, double tol_trace = 1e-8,
                             double tol_psd = tol::psd) {
  require_square(rho, "density operator");
  require(is_hermitian(rho, 1e-8), "density operator: not self-adjoint");
  require(std::abs(rho.trace().real() - 1.0) <= tol_trace &&
              std::abs(rho.trace().imag()) <= tol_trace,
          "density operator: trace != 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(((rho + rho.adjoint()) / 2.0).eval());
  require(es.eigenvalues().minCoeff() >= -tol_psd,
          "density operator: not positive semidefinite");
}

}  // namespace qmr
