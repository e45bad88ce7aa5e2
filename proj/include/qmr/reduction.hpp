#pragma once

#include "qmr/algebra.hpp"
#include "qmr/krylov.hpp"
#include "qmr/lindblad.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Reduction maps: the CP unital projector P(X) = U^dag [sum_k tr_G(W_k X
// W_k^dag)/dG_k (x) 1_G,k] U and its factors R (compress) and J (embed).
// Heisenberg-first: state-side maps are HS-adjoints, never re-derived.
// ---------------------------------------------------------------------------

/// Partial trace over the minor (G) index of an (dF*dG) x (dF*dG) matrix.
inline Matrix trace_out_multiplicity(const Matrix& m, Eigen::Index dF,
                                     Eigen::Index dG) {
  Matrix out = Matrix::Zero(dF, dF);
  for (Eigen::Index f1 = 0; f1 < dF; ++f1)
    for (Eigen::Index f2 = 0; f2 < dF; ++f2)
      for (Eigen::Index g = 0; g < dG; ++g)
        out(f1, f2) += m(f1 * dG + g, f2 * dG + g);
  return out;
}

struct ReductionMaps {
  WedderburnStructure wedderburn;
  std::vector<Matrix> w;                      // coisometries W_k ((dF*dG) x n)
  Eigen::Index dim_reduced = 0;               // n_check = sum_k dF_k
  std::vector<Eigen::Index> reduced_offsets;  // block starts in H_check

  Eigen::Index dim_full() const { return wedderburn.dim_h; }
  std::size_t num_blocks() const { return wedderburn.blocks.size(); }
  Eigen::Index dF(std::size_t k) const { return wedderburn.blocks[k].dF; }
  Eigen::Index dG(std::size_t k) const { return wedderburn.blocks[k].dG; }

  Matrix block(const Matrix& x_reduced, std::size_t k) const {
    return x_reduced.block(reduced_offsets[k], reduced_offsets[k], dF(k), dF(k));
  }

  double off_block_norm(const Matrix& x_reduced) const {
    Matrix strip = x_reduced;
    for (std::size_t k = 0; k < num_blocks(); ++k)
      strip.block(reduced_offsets[k], reduced_offsets[k], dF(k), dF(k))
          .setZero();
    return strip.norm();
  }
};

inline ReductionMaps build_reduction_maps(const WedderburnStructure& ws) {
  ReductionMaps maps;
  maps.wedderburn = ws;
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < ws.blocks.size(); ++k) {
    maps.w.push_back(ws.w(k));
    const Matrix& wk = maps.w.back();
    require((wk * wk.adjoint() - identity(wk.rows())).norm() <= 1e-8,
            "build_reduction_maps: W_k is not a coisometry");
    maps.reduced_offsets.push_back(at);
    at += ws.blocks[k].dF;
  }
  maps.dim_reduced = at;
  return maps;
}

/// R(X) = sum_k tr_G(W_k X W_k^dag)/dG_k, block-diagonal on H_check. Unital, CP.
inline Matrix map_R(const ReductionMaps& maps, const Matrix& x) {
  require(x.rows() == maps.dim_full() && x.cols() == maps.dim_full(),
          "map_R: dimension mismatch");
  Matrix out = Matrix::Zero(maps.dim_reduced, maps.dim_reduced);
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    Matrix compressed = maps.w[k] * x * maps.w[k].adjoint();
    out.block(maps.reduced_offsets[k], maps.reduced_offsets[k], maps.dF(k),
              maps.dF(k)) =
        trace_out_multiplicity(compressed, maps.dF(k), maps.dG(k)) /
        static_cast<double>(maps.dG(k));
  }
  return out;
}

/// J(X_check) = sum_k W_k^dag (X_k (x) 1_G,k) W_k. Unital, CP, injective on
/// block-diagonal operators; rejects inputs with off-block content.
inline Matrix map_J(const ReductionMaps& maps, const Matrix& x_reduced,
                    double tolerance = tol::num) {
  require(x_reduced.rows() == maps.dim_reduced &&
              x_reduced.cols() == maps.dim_reduced,
          "map_J: dimension mismatch");
  require(maps.off_block_norm(x_reduced) <=
              tolerance * std::max(1.0, x_reduced.norm()),
          "map_J: input is not block-diagonal");
  Matrix out = Matrix::Zero(maps.dim_full(), maps.dim_full());
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    Matrix xk = maps.block(x_reduced, k);
    out += maps.w[k].adjoint() * kron(xk, identity(maps.dG(k))) * maps.w[k];
  }
  return out;
}

/// Pinched embedding: like map_J but silently discards off-block content.
/// Used to build superoperator representations on all of B(H_check).
inline Matrix map_J_pinched(const ReductionMaps& maps, const Matrix& x_reduced) {
  Matrix out = Matrix::Zero(maps.dim_full(), maps.dim_full());
  for (std::size_t k = 0; k < maps.num_blocks(); ++k)
    out += maps.w[k].adjoint() *
           kron(maps.block(x_reduced, k), identity(maps.dG(k))) * maps.w[k];
  return out;
}

/// State-side map J^dag(rho) = sum_k tr_G(W_k rho W_k^dag): trace preserving
/// and CP; the reduced state paired with reduced observables.
inline Matrix map_state(const ReductionMaps& maps, const Matrix& rho) {
  validate_density(rho);
  Matrix out = Matrix::Zero(maps.dim_reduced, maps.dim_reduced);
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    Matrix compressed = maps.w[k] * rho * maps.w[k].adjoint();
    out.block(maps.reduced_offsets[k], maps.reduced_offsets[k], maps.dF(k),
              maps.dF(k)) = trace_out_multiplicity(compressed, maps.dF(k), maps.dG(k));
  }
  return out;
}

inline Matrix projector_apply(const ReductionMaps& maps, const Matrix& x) {
  return map_J_pinched(maps, map_R(maps, x));
}

inline Superoperator projector_superoperator(const ReductionMaps& maps) {
  return superoperator_from_map(
      [&](const Matrix& x) { return projector_apply(maps, x); }, maps.dim_full());
}

/// Rectangular superoperator matrices of R and (pinched) J.
inline Matrix r_superoperator_matrix(const ReductionMaps& maps) {
  const Eigen::Index n = maps.dim_full(), r = maps.dim_reduced;
  Matrix m(r * r, n * n);
  Matrix e = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      e(i, j) = 1.0;
      m.col(i + n * j) = vec(map_R(maps, e));
      e(i, j) = 0.0;
    }
  return m;
}

inline Matrix j_superoperator_matrix(const ReductionMaps& maps) {
  const Eigen::Index n = maps.dim_full(), r = maps.dim_reduced;
  Matrix m(n * n, r * r);
  Matrix e = Matrix::Zero(r, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < r; ++i) {
      e(i, j) = 1.0;
      m.col(i + r * j) = vec(map_J_pinched(maps, e));
      e(i, j) = 0.0;
    }
  return m;
}

// ---------------------------------------------------------------------------
// Projector certificate.
// ---------------------------------------------------------------------------

struct ProjectorReport {
  double idempotence = 0.0;
  double unitality = 0.0;
  double self_adjointness = 0.0;
  double projector_choi_min = 0.0;
  double r_choi_min = 0.0;
  double j_choi_min = 0.0;
  double state_map_trace_defect = 0.0;
  double image_defect = 0.0;       // ||P v - v|| over the algebra basis
  double image_rank_defect = 0.0;  // |tr P - dim A|
  double observable_projector_defect = 0.0;  // ||P Pi_O - Pi_O||
  bool ok(double tolerance = tol::psd) const {
    return idempotence <= tolerance && unitality <= tolerance &&
           self_adjointness <= tolerance && projector_choi_min >= -tolerance &&
           r_choi_min >= -tolerance && j_choi_min >= -tolerance &&
           state_map_trace_defect <= tolerance && image_defect <= tolerance &&
           image_rank_defect <= tolerance &&
           observable_projector_defect <= tolerance;
  }
};

inline ProjectorReport verify_projector(
    const ReductionMaps& maps, const OperatorSubspace& algebra,
    const OperatorSubspace* observable_space = nullptr) {
  ProjectorReport rep;
  const Eigen::Index n = maps.dim_full(), r = maps.dim_reduced;
  Superoperator p = projector_superoperator(maps);
  double scale = std::max(1.0, p.mat.norm());
  rep.idempotence = (p.mat * p.mat - p.mat).norm() / scale;
  rep.unitality = (p.apply(identity(n)) - identity(n)).norm();
  rep.self_adjointness = (p.mat - p.mat.adjoint()).norm() / scale;
  rep.projector_choi_min = min_eigenvalue(choi_matrix(p.mat, n, n));

  Matrix rm = r_superoperator_matrix(maps);
  Matrix jm = j_superoperator_matrix(maps);
  rep.r_choi_min = min_eigenvalue(choi_matrix(rm, n, r));
  rep.j_choi_min = min_eigenvalue(choi_matrix(jm, r, n));

  // J^dag trace preservation, checked through the adjoint of J's matrix.
  Matrix jdag = jm.adjoint();
  rep.state_map_trace_defect =
      (jdag.adjoint() * vec(identity(r)) - vec(identity(n))).norm();

  Matrix va = algebra.stacked();
  rep.image_defect = (p.mat * va - va).norm();
  rep.image_rank_defect =
      std::abs(p.mat.trace().real() - static_cast<double>(algebra.dim())) +
      std::abs(p.mat.trace().imag());

  if (observable_space) {
    Matrix vo = observable_space->stacked();
    rep.observable_projector_defect = (p.mat * (vo * vo.adjoint()) - vo * vo.adjoint()).norm();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reduced generator. The raw compression R L J is exact on the block-diagonal
// algebra but its zero extension off it is not conditionally CP, so the
// emitted generator is reassembled from per-sector CP data:
//   * inter-block components of R L J are CP maps (the Hamiltonian and
//     anticommutator terms cannot couple blocks), yielding jump operators
//     supported on single off-diagonal block positions;
//   * the within-block remainders, after restoring the leakage
//     anticommutator, are ordinary Lindblad generators on each factor.
// The result is a genuine Lindblad generator on B(H_check) that agrees with
// R L J on every block-diagonal operator.
// ---------------------------------------------------------------------------

struct ReducedGeneratorPart {
  Operator hamiltonian;             // block-diagonal on H_check, traceless
  std::vector<Operator> noise_ops;  // block-position supported
  double agreement_residual = 0.0;  // vs R L J on the block-diagonal algebra
  double min_cp_eigenvalue = 0.0;   // over sector Choi / block Kossakowski
  bool cp_ok = false;

  Matrix apply(const Matrix& x) const {
    Matrix out = hamiltonian_part(hamiltonian, x);
    for (const auto& l : noise_ops) out += dissipator(l, x);
    return out;
  }
  Superoperator superoperator() const {
    return generator_superoperator(hamiltonian, noise_ops);
  }
};

namespace detail {

/// Action of a generator part of the original model compressed through the
/// reduction: X_check (block-diagonal) -> R(g(J(X_check))), tabulated on the
/// matrix-unit basis of each block.
struct CompressedAction {
  // y[k] has dF_k^2 columns: vec of R(g(J(E_ab at block k)))) with column
  // index a + dF_k*b.
  std::vector<Matrix> y;
};

template <typename MapFn>
CompressedAction compress_action(const ReductionMaps& maps, const MapFn& g) {
  CompressedAction act;
  const Eigen::Index r = maps.dim_reduced;
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    const Eigen::Index d = maps.dF(k);
    Matrix yk(r * r, d * d);
    Matrix e = Matrix::Zero(r, r);
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index a = 0; a < d; ++a) {
        e(maps.reduced_offsets[k] + a, maps.reduced_offsets[k] + b) = 1.0;
        yk.col(a + d * b) = vec(map_R(maps, g(map_J_pinched(maps, e))));
        e(maps.reduced_offsets[k] + a, maps.reduced_offsets[k] + b) = 0.0;
      }
    act.y.push_back(std::move(yk));
  }
  return act;
}

inline CompressedAction combine(const CompressedAction& drift,
                                const std::vector<CompressedAction>& parts,
                                const RealVector& u) {
  CompressedAction out = drift;
  for (std::size_t l = 0; l < parts.size(); ++l) {
    double ul = u(static_cast<Eigen::Index>(l));
    if (ul == 0.0) continue;
    for (std::size_t k = 0; k < out.y.size(); ++k) out.y[k] += ul * parts[l].y[k];
  }
  return out;
}

/// Raw compressed generator matrix applied to a block-diagonal operator.
inline Matrix apply_compressed(const ReductionMaps& maps,
                               const CompressedAction& act, const Matrix& x) {
  const Eigen::Index r = maps.dim_reduced;
  Vector acc = Vector::Zero(r * r);
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    const Eigen::Index d = maps.dF(k);
    Matrix xk = maps.block(x, k);
    acc += act.y[k] * Eigen::Map<const Vector>(xk.data(), d * d);
  }
  return unvec(acc, r);
}

}  // namespace detail

/// Rebuilds the compressed action as an explicit Lindblad generator on
/// B(H_check). `tolerance` bounds how negative sector CP spectra may be.
inline ReducedGeneratorPart lindbladize_compressed(
    const ReductionMaps& maps, const detail::CompressedAction& act,
    double tolerance = tol::psd) {
  ReducedGeneratorPart part;
  const Eigen::Index r = maps.dim_reduced;
  const std::size_t nb = maps.num_blocks();
  part.hamiltonian = Matrix::Zero(r, r);
  part.min_cp_eigenvalue = 0.0;

  double scale = 1e-300;
  for (const auto& yk : act.y) scale = std::max(scale, yk.cwiseAbs().maxCoeff());

  // Per-destination leakage L^dag L accumulators.
  std::vector<Matrix> leakage(nb);
  for (std::size_t j = 0; j < nb; ++j)
    leakage[j] = Matrix::Zero(maps.dF(j), maps.dF(j));

  // Inter-block sectors: component (dst j) <- (src k) of the compressed map
  // must be CP; its Choi eigenpairs give jump operators at block position
  // (k, j) of H_check.
  for (std::size_t k = 0; k < nb; ++k) {
    const Eigen::Index dk = maps.dF(k);
    for (std::size_t j = 0; j < nb; ++j) {
      if (j == k) continue;
      const Eigen::Index dj = maps.dF(j);
      Matrix choi = Matrix::Zero(dk * dj, dk * dj);
      for (Eigen::Index b = 0; b < dk; ++b)
        for (Eigen::Index a = 0; a < dk; ++a) {
          Matrix img = unvec(act.y[k].col(a + dk * b), r);
          choi.block(a * dj, b * dj, dj, dj) = maps.block(img, j);
        }
      if (choi.norm() <= 1e-13 * scale * dk * dj) continue;
      choi = ((choi + choi.adjoint()) / 2.0).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> es(choi);
      part.min_cp_eigenvalue =
          std::min(part.min_cp_eigenvalue, es.eigenvalues().minCoeff() / scale);
      for (Eigen::Index m = 0; m < es.eigenvalues().size(); ++m) {
        double lam = es.eigenvalues()(m);
        if (lam <= 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
          continue;
        // Kraus A: F_k -> F_j with A(p, i) = w(i*dj + p).
        Matrix kraus(dj, dk);
        for (Eigen::Index i = 0; i < dk; ++i)
          for (Eigen::Index p = 0; p < dj; ++p)
            kraus(p, i) = std::sqrt(lam) * es.eigenvectors().col(m)(i * dj + p);
        Matrix jump = Matrix::Zero(r, r);
        jump.block(maps.reduced_offsets[k], maps.reduced_offsets[j], dk, dj) =
            kraus.adjoint();
        part.noise_ops.push_back(jump);
        leakage[j] += kraus * kraus.adjoint();
      }
    }
  }

  // Within-block remainders: restore the leakage anticommutator, then run the
  // standard GKS extraction on each factor.
  for (std::size_t j = 0; j < nb; ++j) {
    const Eigen::Index dj = maps.dF(j);
    Matrix block_super(dj * dj, dj * dj);
    for (Eigen::Index b = 0; b < dj; ++b)
      for (Eigen::Index a = 0; a < dj; ++a) {
        Matrix img = unvec(act.y[j].col(a + dj * b), r);
        Matrix e = Matrix::Zero(dj, dj);
        e(a, b) = 1.0;
        Matrix rem = maps.block(img, j) + 0.5 * (leakage[j] * e + e * leakage[j]);
        block_super.col(a + dj * b) = vec(rem);
      }
    Superoperator s{dj, block_super};
    LindbladCertificate cert = is_lindblad(s, tolerance);
    part.min_cp_eigenvalue =
        std::min(part.min_cp_eigenvalue, cert.kossakowski_min_eigenvalue);
    if (!cert.passes) continue;  // reported through min_cp_eigenvalue
    part.hamiltonian.block(maps.reduced_offsets[j], maps.reduced_offsets[j], dj,
                           dj) = cert.hamiltonian;
    for (const auto& l : cert.noise_ops) {
      Matrix lift = Matrix::Zero(r, r);
      lift.block(maps.reduced_offsets[j], maps.reduced_offsets[j], dj, dj) = l;
      part.noise_ops.push_back(lift);
    }
  }
  part.hamiltonian -= (part.hamiltonian.trace() / static_cast<double>(r)) *
                      Matrix::Identity(r, r);
  part.cp_ok = part.min_cp_eigenvalue >= -tolerance;

  // Agreement audit: the rebuilt generator must reproduce the compressed
  // action on every block matrix unit.
  double worst = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const Eigen::Index dk = maps.dF(k);
    for (Eigen::Index b = 0; b < dk; ++b)
      for (Eigen::Index a = 0; a < dk; ++a) {
        Matrix e = Matrix::Zero(r, r);
        e(maps.reduced_offsets[k] + a, maps.reduced_offsets[k] + b) = 1.0;
        Matrix expected = unvec(act.y[k].col(a + dk * b), r);
        worst = std::max(worst, (part.apply(e) - expected).norm() / scale);
      }
  }
  part.agreement_residual = worst;
  return part;
}

// ---------------------------------------------------------------------------
// Reduced model assembly and certificates.
// ---------------------------------------------------------------------------

struct ReducedChannel {
  ChannelKind kind = ChannelKind::hamiltonian;
  std::string label;
  Interval coefficient_domain;
  ReducedGeneratorPart part;
};

struct SampledCertificate {
  RealVector u;
  double unitality_residual = 0.0;
  double min_cp_eigenvalue = 0.0;
  double agreement_residual = 0.0;
  double extraction_residual = 0.0;  // rebuild vs emitted superoperator
  bool global_certificate = false;   // full GKS check on B(H_check) was run
  bool passes = false;
  Operator hamiltonian;
  std::vector<Operator> noise_ops;
};

struct ReducedModel {
  ReductionMaps maps;
  ReducedGeneratorPart drift;
  std::vector<ReducedChannel> channels;
  std::vector<std::pair<std::string, Operator>> observables;
  std::vector<SampledCertificate> certificates;
  bool all_certificates_pass = false;
  bool reduction_achieved = false;  // n_check < n or nontrivial block structure

  Eigen::Index dim_reduced() const { return maps.dim_reduced; }

  AffineSuperoperators affine_superoperators() const {
    AffineSuperoperators out;
    out.drift = drift.superoperator();
    for (const auto& ch : channels)
      out.channel_parts.push_back(ch.part.superoperator());
    return out;
  }

  Matrix apply(const RealVector& u, const Matrix& x) const {
    Matrix out = drift.apply(x);
    for (std::size_t l = 0; l < channels.size(); ++l) {
      double ul = u(static_cast<Eigen::Index>(l));
      if (ul != 0.0) out += ul * channels[l].part.apply(x);
    }
    return out;
  }
};

struct ReductionOptions {
  double cp_tolerance = tol::psd;
  std::uint64_t seed = 0;
  int random_u_samples = 8;
  // Beyond this reduced dimension the global n^2 x n^2 GKS certificate is
  // replaced by the per-sector one (same content, assembled blockwise).
  Eigen::Index global_certificate_max_dim = 16;
  double unbounded_sample = 1.0;  // stand-in vertex for unbounded domains
};

namespace detail {

inline std::vector<RealVector> certificate_samples(
    const std::vector<ControlChannel>& channels, const ReductionOptions& opt) {
  const Eigen::Index m = static_cast<Eigen::Index>(channels.size());
  std::vector<RealVector> samples;
  samples.push_back(RealVector::Zero(m));
  if (m == 0) return samples;

  auto lo_of = [&](Eigen::Index l) {
    const Interval& d = channels[static_cast<std::size_t>(l)].coefficient_domain;
    return std::isfinite(d.lo) ? d.lo
                               : (channels[static_cast<std::size_t>(l)].kind ==
                                          ChannelKind::dissipator
                                      ? 0.0
                                      : -opt.unbounded_sample);
  };
  auto hi_of = [&](Eigen::Index l) {
    const Interval& d = channels[static_cast<std::size_t>(l)].coefficient_domain;
    return std::isfinite(d.hi) ? d.hi : lo_of(l) + 2.0 * opt.unbounded_sample;
  };

  // Vertices of the coefficient box (capped), plus the midpoint.
  if (m <= 4) {
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      RealVector u(m);
      for (Eigen::Index l = 0; l < m; ++l)
        u(l) = (mask >> l) & 1u ? hi_of(l) : lo_of(l);
      samples.push_back(u);
    }
  } else {
    RealVector lo(m), hi(m);
    for (Eigen::Index l = 0; l < m; ++l) lo(l) = lo_of(l), hi(l) = hi_of(l);
    samples.push_back(lo);
    samples.push_back(hi);
  }
  RealVector mid(m);
  for (Eigen::Index l = 0; l < m; ++l) mid(l) = 0.5 * (lo_of(l) + hi_of(l));
  samples.push_back(mid);

  Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < opt.random_u_samples; ++i) {
    RealVector u(m);
    for (Eigen::Index l = 0; l < m; ++l)
      u(l) = lo_of(l) + unif(rng) * (hi_of(l) - lo_of(l));
    samples.push_back(u);
  }
  return samples;
}

}  // namespace detail

inline ReducedModel reduce_generator(const ControlledLindbladGenerator& gen,
                                     const ReductionMaps& maps,
                                     const OperatorSubspace& omega,
                                     const ReductionOptions& opt = {}) {
  ReducedModel model;
  model.maps = maps;
  model.reduction_achieved =
      maps.dim_reduced < gen.dim_h || maps.num_blocks() > 1;

  auto drift_act = detail::compress_action(
      maps, [&](const Matrix& x) { return gen.apply_drift(x); });
  std::vector<detail::CompressedAction> channel_acts;
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l)
    channel_acts.push_back(detail::compress_action(
        maps, [&](const Matrix& x) { return gen.apply_channel(l, x); }));

  model.drift = lindbladize_compressed(maps, drift_act, opt.cp_tolerance);
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l) {
    const auto& ch = gen.channels[static_cast<std::size_t>(l)];
    ReducedChannel rch;
    rch.kind = ch.kind;
    rch.label = ch.label;
    rch.coefficient_domain = ch.coefficient_domain;
    rch.part = lindbladize_compressed(maps, channel_acts[static_cast<std::size_t>(l)],
                                      opt.cp_tolerance);
    model.channels.push_back(std::move(rch));
  }

  for (const auto& o : omega.basis)
    model.observables.emplace_back("", map_R(maps, o));

  // Lindblad certificates for the drift and a sample of admissible u.
  model.all_certificates_pass = true;
  for (const auto& u : detail::certificate_samples(gen.channels, opt)) {
    SampledCertificate cert;
    cert.u = u;
    auto combined = detail::combine(drift_act, channel_acts, u);
    ReducedGeneratorPart assembled =
        lindbladize_compressed(maps, combined, opt.cp_tolerance);
    cert.min_cp_eigenvalue = assembled.min_cp_eigenvalue;
    cert.agreement_residual = assembled.agreement_residual;
    cert.hamiltonian = assembled.hamiltonian;
    cert.noise_ops = assembled.noise_ops;

    Superoperator s = assembled.superoperator();
    double scale = std::max(s.mat.cwiseAbs().maxCoeff(), 1e-300);
    cert.unitality_residual =
        (s.mat * vec(identity(maps.dim_reduced))).norm() / scale;
    cert.passes = assembled.cp_ok &&
                  cert.unitality_residual <= opt.cp_tolerance &&
                  cert.agreement_residual <= 1e-8;
    if (maps.dim_reduced <= opt.global_certificate_max_dim) {
      cert.global_certificate = true;
      LindbladCertificate full = is_lindblad(s, opt.cp_tolerance);
      cert.unitality_residual = full.unitality_residual;
      cert.min_cp_eigenvalue =
          std::min(cert.min_cp_eigenvalue, full.kossakowski_min_eigenvalue);
      cert.extraction_residual = full.reconstruction_residual;
      cert.passes = cert.passes && full.passes;
      if (full.passes) {
        cert.hamiltonian = full.hamiltonian;
        cert.noise_ops = full.noise_ops;
      }
    }
    model.all_certificates_pass = model.all_certificates_pass && cert.passes;
    model.certificates.push_back(std::move(cert));
  }
  return model;
}

}  // namespace qmr
