#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "qmr/operator_space.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Controlled Lindblad generators, Heisenberg picture:
//   L_u(O) = i [H_u, O] + sum_k (L_k^dag O L_k - 1/2 {L_k^dag L_k, O}),
// with H_u = H0 + sum_{ham channels} u_l H_l and each dissipator channel
// entering with its rate coefficient u_l >= 0 (affine in u; an
// amplitude-modulated noise model is entered by reparametrizing u -> u^2).
// ---------------------------------------------------------------------------

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool unconstrained() const { return !std::isfinite(lo) && !std::isfinite(hi); }
  bool contains(double v, double slack = 0.0) const {
    return v >= lo - slack && v <= hi + slack;
  }
  bool degenerate() const { return std::isfinite(lo) && std::isfinite(hi) && hi <= lo; }
};

enum class ChannelKind { hamiltonian, dissipator };

struct ControlChannel {
  ChannelKind kind = ChannelKind::hamiltonian;
  Operator op;
  std::string label;
  Interval coefficient_domain;
};

inline Matrix dissipator(const Matrix& l, const Matrix& o) {
  Matrix ldl = l.adjoint() * l;
  return l.adjoint() * o * l - 0.5 * (ldl * o + o * ldl);
}

inline Matrix hamiltonian_part(const Matrix& h, const Matrix& o) {
  return kI * (h * o - o * h);
}

struct ControlledLindbladGenerator {
  Eigen::Index dim_h = 0;
  Operator h0;
  std::vector<Operator> noise_drift;
  std::vector<ControlChannel> channels;

  Eigen::Index num_controls() const {
    return static_cast<Eigen::Index>(channels.size());
  }

  void validate() const {
    require_square(h0, "drift Hamiltonian");
    require(h0.rows() == dim_h, "drift Hamiltonian: wrong dimension");
    require(is_hermitian(h0), "drift Hamiltonian: not self-adjoint");
    for (const auto& l : noise_drift) {
      require_square(l, "drift noise operator");
      require(l.rows() == dim_h, "drift noise operator: wrong dimension");
    }
    for (const auto& ch : channels) {
      require(ch.op.rows() == dim_h && ch.op.cols() == dim_h,
              "channel '" + ch.label + "': wrong dimension");
      if (ch.kind == ChannelKind::hamiltonian)
        require(is_hermitian(ch.op),
                "channel '" + ch.label + "': Hamiltonian not self-adjoint");
      else
        require(ch.coefficient_domain.lo >= 0.0,
                "channel '" + ch.label +
                    "': dissipator coefficient domain must be within [0, inf)");
    }
  }

  void check_controls(const RealVector& u, double slack = 0.0) const {
    require(u.size() == num_controls(),
            "control vector length does not match channel count");
    for (Eigen::Index l = 0; l < num_controls(); ++l)
      require(channels[l].coefficient_domain.contains(u(l), slack),
              "control u[" + std::to_string(l) + "] outside coefficient domain");
  }

  /// Drift part L_0(O) (u = 0).
  Matrix apply_drift(const Matrix& o) const {
    Matrix out = hamiltonian_part(h0, o);
    for (const auto& l : noise_drift) out += dissipator(l, o);
    return out;
  }

  /// Channel part K_l(O).
  Matrix apply_channel(Eigen::Index l, const Matrix& o) const {
    const auto& ch = channels[static_cast<std::size_t>(l)];
    return ch.kind == ChannelKind::hamiltonian ? hamiltonian_part(ch.op, o)
                                               : dissipator(ch.op, o);
  }

  Matrix apply(const RealVector& u, const Matrix& o) const {
    require(o.rows() == dim_h && o.cols() == dim_h,
            "apply_generator: dimension mismatch");
    check_controls(u);
    Matrix out = apply_drift(o);
    for (Eigen::Index l = 0; l < num_controls(); ++l)
      if (u(l) != 0.0) out += u(l) * apply_channel(l, o);
    return out;
  }
};

struct AffineSuperoperators {
  Superoperator drift;
  std::vector<Superoperator> channel_parts;

  Superoperator at(const RealVector& u) const {
    Superoperator s = drift;
    for (std::size_t l = 0; l < channel_parts.size(); ++l)
      s.mat += u(static_cast<Eigen::Index>(l)) * channel_parts[l].mat;
    return s;
  }
};

/// L_u = drift + sum_l u_l * channel_parts[l].
inline AffineSuperoperators affine_superoperators(
    const ControlledLindbladGenerator& gen) {
  AffineSuperoperators out;
  out.drift = superoperator_from_map(
      [&](const Matrix& o) { return gen.apply_drift(o); }, gen.dim_h);
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l)
    out.channel_parts.push_back(superoperator_from_map(
        [&](const Matrix& o) { return gen.apply_channel(l, o); }, gen.dim_h));
  return out;
}

// ---------------------------------------------------------------------------
// Lindblad-form certificate (GKS parametrization). A superoperator S is a
// Lindblad generator iff it annihilates the identity, preserves Hermiticity,
// and its Kossakowski matrix -- the coefficient matrix over a traceless
// HS-orthonormal basis -- is positive semidefinite.
// ---------------------------------------------------------------------------

struct LindbladCertificate {
  bool is_unital = false;
  double unitality_residual = 0.0;
  double hermiticity_defect = 0.0;
  double kossakowski_min_eigenvalue = 0.0;
  bool passes = false;
  Operator hamiltonian;          // traceless gauge
  std::vector<Operator> noise_ops;
  double reconstruction_residual = 0.0;
};

namespace detail {

/// Deflates the identity direction out of the Hermitian coefficient matrix,
/// leaving the traceless-sector Kossakowski spectrum (plus a zero eigenvalue
/// in the deflated direction).
inline Matrix deflated_coefficient_matrix(const Superoperator& s) {
  const Eigen::Index n = s.dim_h;
  Matrix m = coefficient_matrix(s);
  m = ((m + m.adjoint()) / 2.0).eval();
  Vector v = vec(identity(n)) / std::sqrt(static_cast<double>(n));
  Vector mv = m * v;
  Complex vmv = v.dot(mv);
  m -= v * mv.adjoint();
  m -= mv * v.adjoint();
  m += vmv * v * v.adjoint();
  return m;
}

}  // namespace detail

struct ExtractionOptions {
  double noise_cut = 1e-12;  // relative eigenvalue cutoff for noise directions
};

inline LindbladCertificate is_lindblad(const Superoperator& s,
                                       double tolerance = tol::psd,
                                       const ExtractionOptions& opt = {}) {
  require_square(s.mat, "is_lindblad");
  const Eigen::Index n = s.dim_h;
  LindbladCertificate cert;

  double scale = std::max(s.mat.cwiseAbs().maxCoeff(), 1e-300);
  cert.unitality_residual = (s.mat * vec(identity(n))).norm() / scale;
  cert.is_unital = cert.unitality_residual <= tolerance;
  cert.hermiticity_defect = hermiticity_preservation_defect(s);

  Matrix m = detail::deflated_coefficient_matrix(s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  cert.kossakowski_min_eigenvalue = es.eigenvalues().minCoeff() / scale;

  cert.passes = cert.is_unital && cert.hermiticity_defect <= tolerance &&
                cert.kossakowski_min_eigenvalue >= -tolerance;
  if (!cert.passes) return cert;

  // Noise operators from the positive spectrum: eigenvector w with eigenvalue
  // lambda gives L = sqrt(lambda) unvec(w)^dag, ordered by decreasing lambda,
  // phase fixed by making the largest-magnitude entry real positive.
  const auto& lam = es.eigenvalues();
  double cut =
      opt.noise_cut * std::max({lam.cwiseAbs().maxCoeff(), scale, 1e-300});
  for (Eigen::Index a = lam.size() - 1; a >= 0; --a) {
    if (lam(a) <= cut) break;
    Matrix l = std::sqrt(lam(a)) * unvec(es.eigenvectors().col(a), n).adjoint();
    Eigen::Index pi = 0, pj = 0;
    l.cwiseAbs().maxCoeff(&pi, &pj);
    Complex ph = l(pi, pj) / std::abs(l(pi, pj));
    cert.noise_ops.push_back((l / ph).eval());
  }

  // What remains after subtracting the dissipators is a commutator i[H, .];
  // recover H by contracting the superoperator matrix.
  Matrix rest = s.mat;
  for (const auto& l : cert.noise_ops) {
    Matrix ld = l.adjoint();
    Matrix ldl = ld * l;
    rest -= kron(l.transpose(), ld).eval();
    rest += 0.5 * kron(Matrix::Identity(n, n), ldl);
    rest += 0.5 * kron(ldl.transpose(), Matrix::Identity(n, n));
  }
  Matrix h(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) {
      Complex acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) acc += rest(i + n * j, k + n * j);
      h(i, k) = acc / (kI * static_cast<double>(n));
    }
  h -= (h.trace() / static_cast<double>(n)) * Matrix::Identity(n, n);
  cert.hamiltonian = ((h + h.adjoint()) / 2.0).eval();

  // Round trip: rebuild the superoperator from (H, noise) and compare.
  Matrix rebuilt = kron(Matrix::Identity(n, n), kI * cert.hamiltonian) -
                   kron((kI * cert.hamiltonian).transpose(), Matrix::Identity(n, n));
  for (const auto& l : cert.noise_ops) {
    Matrix ld = l.adjoint();
    Matrix ldl = ld * l;
    rebuilt += kron(l.transpose(), ld);
    rebuilt -= 0.5 * kron(Matrix::Identity(n, n), ldl);
    rebuilt -= 0.5 * kron(ldl.transpose(), Matrix::Identity(n, n));
  }
  cert.reconstruction_residual = (rebuilt - s.mat).norm() / scale;
  return cert;
}

struct HamiltonianNoise {
  Operator hamiltonian;
  std::vector<Operator> noise_ops;
};

inline HamiltonianNoise extract_hamiltonian_and_noise(
    const Superoperator& s, double tolerance = tol::psd) {
  LindbladCertificate cert = is_lindblad(s, tolerance);
  require(cert.passes, "extract_hamiltonian_and_noise: certificate failed "
                       "(Kossakowski min eigenvalue " +
                           std::to_string(cert.kossakowski_min_eigenvalue) + ")");
  return {cert.hamiltonian, cert.noise_ops};
}

/// Superoperator of the full generator built from (H, {L_k}).
inline Superoperator generator_superoperator(const Operator& h,
                                             const std::vector<Operator>& noise) {
  const Eigen::Index n = h.rows();
  Matrix m = kron(Matrix::Identity(n, n), kI * h) -
             kron((kI * h).transpose(), Matrix::Identity(n, n));
  for (const auto& l : noise) {
    Matrix ldl = l.adjoint() * l;
    m += kron(l.transpose(), l.adjoint());
    m -= 0.5 * kron(Matrix::Identity(n, n), ldl);
    m -= 0.5 * kron(ldl.transpose(), Matrix::Identity(n, n));
  }
  return {n, m};
}

}  // namespace qmr
