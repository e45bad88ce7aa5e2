#pragma once

#include "qmr/propagation.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Central-spin benchmark family: one controlled qubit (index 0) coupled by
// Ising terms to N bath qubits, with z-dephasing noise on the bath. Controls
// are sigma_x and sigma_z Hamiltonian channels on the central spin. The
// observable algebra generated by the central Pauli operators is the direct
// sum over bath configurations of 2x2 factors, so the model reduces from
// dimension 2^(N+1) to a 2 * 2^N block structure.
// ---------------------------------------------------------------------------

struct CentralSpinParams {
  int n_bath = 2;
  // couplings(j, k), j <= k, indices 0..N: (0,k) central-bath, (k,k) bath
  // local field, (j,k) bath-bath. Symmetric part below diagonal is ignored.
  Eigen::MatrixXd couplings;
  std::vector<double> gamma;  // bath dephasing amplitudes, size N
  // Optional dissipator control channel sigma_x on bath spin 1, which is not
  // compatible with the central-observable reduction (used as a negative
  // control in tests and the drift-reduction path).
  bool add_bath_flip_channel = false;

  int n_qubits() const { return n_bath + 1; }
  Eigen::Index dim() const { return Eigen::Index(1) << n_qubits(); }

  void validate() const {
    require(n_bath >= 1, "central-spin: n_bath >= 1 required");
    require(couplings.rows() == n_bath + 1 && couplings.cols() == n_bath + 1,
            "central-spin: couplings must be (N+1) x (N+1)");
    require(static_cast<int>(gamma.size()) == n_bath,
            "central-spin: gamma must have one entry per bath spin");
  }
};

/// Seeded pseudo-random parameter set with O(1) couplings and dephasing.
inline CentralSpinParams random_central_spin(int n_bath, std::uint64_t seed) {
  CentralSpinParams p;
  p.n_bath = n_bath;
  p.couplings = Eigen::MatrixXd::Zero(n_bath + 1, n_bath + 1);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  for (int j = 0; j <= n_bath; ++j)
    for (int k = std::max(j, 1); k <= n_bath; ++k)
      p.couplings(j, k) = unif(rng);
  for (int k = 0; k < n_bath; ++k) p.gamma.push_back(unif(rng));
  return p;
}

/// Single-site Pauli on qubit `site` of an n-qubit register (qubit 0 is the
/// leftmost / most significant factor).
inline Matrix site_pauli(char axis, int site, int n_qubits) {
  std::string s(static_cast<std::size_t>(n_qubits), 'i');
  s[static_cast<std::size_t>(site)] = axis;
  return pauli_string(s);
}

inline ControlledLindbladGenerator central_spin_generator(
    const CentralSpinParams& p) {
  p.validate();
  const int nq = p.n_qubits();
  const Eigen::Index n = p.dim();

  ControlledLindbladGenerator gen;
  gen.dim_h = n;
  gen.h0 = Matrix::Zero(n, n);
  for (int k = 1; k <= p.n_bath; ++k) {
    gen.h0 += p.couplings(k, k) * site_pauli('z', k, nq);
    gen.h0 += p.couplings(0, k) * site_pauli('z', 0, nq) * site_pauli('z', k, nq);
    for (int j = 1; j < k; ++j)
      gen.h0 +=
          p.couplings(j, k) * site_pauli('z', j, nq) * site_pauli('z', k, nq);
  }
  for (int k = 1; k <= p.n_bath; ++k)
    gen.noise_drift.push_back(p.gamma[static_cast<std::size_t>(k - 1)] *
                              site_pauli('z', k, nq));

  gen.channels.push_back({ChannelKind::hamiltonian, site_pauli('x', 0, nq),
                          "u_x", Interval{}});
  gen.channels.push_back({ChannelKind::hamiltonian, site_pauli('z', 0, nq),
                          "u_z", Interval{}});
  if (p.add_bath_flip_channel)
    gen.channels.push_back({ChannelKind::dissipator, site_pauli('x', 1, nq),
                            "bath_flip",
                            Interval{0.0, std::numeric_limits<double>::infinity()}});
  gen.validate();
  return gen;
}

inline std::vector<std::pair<std::string, Operator>> central_spin_observables(
    const CentralSpinParams& p) {
  const int nq = p.n_qubits();
  return {{"sx0", site_pauli('x', 0, nq)},
          {"sy0", site_pauli('y', 0, nq)},
          {"sz0", site_pauli('z', 0, nq)}};
}

/// Effective z-field on the central spin for bath configuration q: bath spin
/// k contributes +-J_0k according to bit (N - k) of q (bit value 0 <-> up).
inline double central_spin_beta(const CentralSpinParams& p, Eigen::Index q) {
  double beta = 0.0;
  for (int k = 1; k <= p.n_bath; ++k) {
    int bit = static_cast<int>((q >> (p.n_bath - k)) & 1);
    beta += p.couplings(0, k) * (bit == 0 ? 1.0 : -1.0);
  }
  return beta;
}

/// Independent closed-form oracle for the central observables. Conditioned on
/// a bath configuration q, the central spin undergoes pure unitary evolution
/// with H_q(u) = (beta_q + u_z) sigma_z + u_x sigma_x; bath dephasing never
/// touches bath-diagonal sectors. Valid only for the model without the
/// bath-flip channel.
inline Trajectory analytic_central_spin(const CentralSpinParams& p,
                                        const Matrix& rho,
                                        const ControlSchedule& schedule) {
  p.validate();
  require(!p.add_bath_flip_channel,
          "analytic oracle: bath-flip channel not supported");
  schedule.validate(2);
  validate_density(rho);
  require(rho.rows() == p.dim(), "analytic oracle: state dimension mismatch");

  const Eigen::Index nbath_dim = Eigen::Index(1) << p.n_bath;
  const Matrix sx = pauli('x'), sy = pauli('y'), sz = pauli('z');

  // Conditional 2x2 central-spin blocks rho_q(s, s') = rho(s*2^N + q, s'*2^N + q).
  std::vector<Matrix> blocks;
  for (Eigen::Index q = 0; q < nbath_dim; ++q) {
    Matrix b(2, 2);
    for (Eigen::Index s = 0; s < 2; ++s)
      for (Eigen::Index sp = 0; sp < 2; ++sp)
        b(s, sp) = rho(s * nbath_dim + q, sp * nbath_dim + q);
    blocks.push_back(b);
  }

  Trajectory traj;
  traj.values.resize(3);
  auto record = [&](double t) {
    traj.times.push_back(t);
    Complex ex = 0, ey = 0, ez = 0;
    for (const auto& b : blocks) {
      ex += (b * sx).trace();
      ey += (b * sy).trace();
      ez += (b * sz).trace();
    }
    traj.values[0].push_back(ex.real());
    traj.values[1].push_back(ey.real());
    traj.values[2].push_back(ez.real());
  };
  record(0.0);

  double t = 0.0;
  for (const auto& seg : schedule.segments) {
    if (seg.duration == 0.0) continue;
    const int steps = schedule.samples_per_segment;
    const double dt = seg.duration / steps;
    std::vector<Matrix> u_q;
    for (Eigen::Index q = 0; q < nbath_dim; ++q) {
      Matrix h = (central_spin_beta(p, q) + seg.u(1)) * sz + seg.u(0) * sx;
      u_q.push_back((Complex(0, -1) * dt * h).exp());
    }
    for (int step = 1; step <= steps; ++step) {
      for (Eigen::Index q = 0; q < nbath_dim; ++q)
        blocks[static_cast<std::size_t>(q)] =
            u_q[static_cast<std::size_t>(q)] *
            blocks[static_cast<std::size_t>(q)] *
            u_q[static_cast<std::size_t>(q)].adjoint();
      record(t + step * dt);
    }
    t += seg.duration;
  }
  return traj;
}

}  // namespace qmr
