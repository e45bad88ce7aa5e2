#pragma once

#include "qmr/algebra.hpp"
#include "qmr/lindblad.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Krylov observable subspace: the smallest subspace containing the target
// observables Omega and invariant under every admissible generator. With an
// admissible set that affinely spans R^m this is equivalent to invariance
// under the finite generating set {L_0, K_1, ..., K_m}.
// ---------------------------------------------------------------------------

struct ObservableSpaceReport {
  OperatorSubspace space;
  int iterations = 0;
  std::vector<std::pair<int, Eigen::Index>> growth_log;
  double invariance_residual = 0.0;
  bool converged = true;
  bool identity_adjoined = false;
};

inline void validate_affine_span(const ControlledLindbladGenerator& gen) {
  for (const auto& ch : gen.channels)
    require(!ch.coefficient_domain.degenerate(),
            "channel '" + ch.label +
                "': admissible set does not affinely span R^m (single-point "
                "coefficient domain); supply explicit generator samples to "
                "observable_space_parametric instead");
}

namespace detail {

using GeneratorSet = std::vector<std::function<Matrix(const Matrix&)>>;

inline GeneratorSet generating_set(const ControlledLindbladGenerator& gen) {
  GeneratorSet gens;
  gens.push_back([&gen](const Matrix& o) { return gen.apply_drift(o); });
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l)
    gens.push_back([&gen, l](const Matrix& o) { return gen.apply_channel(l, o); });
  return gens;
}

/// Breadth-first worklist closure of `seed` under the given maps. Order is
/// deterministic: (basis index, generator index).
inline ObservableSpaceReport invariant_closure(const GeneratorSet& gens,
                                               OperatorSubspace seed,
                                               double tolerance,
                                               Eigen::Index max_dim) {
  ObservableSpaceReport rep;
  rep.space = std::move(seed);
  rep.growth_log.emplace_back(0, rep.space.dim());
  Eigen::Index next = 0;
  while (next < rep.space.dim()) {
    Eigen::Index frontier_end = rep.space.dim();
    ++rep.iterations;
    for (; next < frontier_end; ++next) {
      for (const auto& g : gens) {
        Matrix y = g(rep.space.basis[next]);
        absorb(rep.space, y, tolerance);
        if (rep.space.dim() > max_dim) {
          rep.converged = false;
          rep.growth_log.emplace_back(rep.iterations, rep.space.dim());
          return rep;
        }
      }
    }
    rep.growth_log.emplace_back(rep.iterations, rep.space.dim());
  }
  // Invariance audit at termination.
  for (const auto& g : gens)
    for (const auto& b : rep.space.basis) {
      Matrix y = g(b);
      double r = residual(rep.space, y).residual_norm /
                 std::max(1.0, hs_norm(y));
      rep.invariance_residual = std::max(rep.invariance_residual, r);
    }
  return rep;
}

}  // namespace detail

inline OperatorSubspace adjoin_identity(const OperatorSubspace& omega,
                                        bool* adjoined = nullptr) {
  OperatorSubspace s = omega;
  bool grew = absorb(s, identity(s.dim_h), tol::rank_drop);
  if (adjoined) *adjoined = grew;
  return s;
}

inline ObservableSpaceReport observable_space(
    const ControlledLindbladGenerator& gen, const OperatorSubspace& omega,
    double tolerance = tol::rank_drop, Eigen::Index max_dim = -1) {
  require(omega.dim_h == gen.dim_h, "observable_space: dimension mismatch");
  validate_affine_span(gen);
  if (max_dim < 0) max_dim = gen.dim_h * gen.dim_h;
  bool adjoined = false;
  auto rep = detail::invariant_closure(detail::generating_set(gen),
                                       adjoin_identity(omega, &adjoined),
                                       tolerance, max_dim);
  rep.identity_adjoined = adjoined;
  return rep;
}

/// Small-n oracle: builds the associative superoperator algebra generated by
/// {L_0, K_l} by product closure on vectorized n^2 x n^2 matrices, then spans
/// Omega together with its image under every algebra element. O(n^6); guarded.
inline OperatorSubspace observable_space_superalg_oracle(
    const ControlledLindbladGenerator& gen, const OperatorSubspace& omega,
    double tolerance = tol::rank_drop, Eigen::Index max_dim = -1) {
  require(gen.dim_h <= 8, "superoperator-algebra oracle is capped at n <= 8");
  validate_affine_span(gen);
  const Eigen::Index n = gen.dim_h;
  if (max_dim < 0) max_dim = n * n;

  AffineSuperoperators parts = affine_superoperators(gen);
  std::vector<Matrix> gens{parts.drift.mat};
  for (const auto& k : parts.channel_parts) gens.push_back(k.mat);

  // Associative closure with a rank-based fixpoint over vectorized matrices.
  OperatorSubspace alg;  // elements are n^2 x n^2, ambient dim n^2
  alg.dim_h = n * n;
  std::vector<Matrix> elements;
  for (const auto& g : gens)
    if (absorb(alg, g, tolerance)) elements.push_back(alg.basis.back());
  std::size_t next = 0;
  while (next < elements.size()) {
    Matrix x = elements[next++];
    for (const auto& g : gens) {
      for (const Matrix& p : {Matrix(g * x), Matrix(x * g)})
        if (absorb(alg, p, tolerance)) elements.push_back(alg.basis.back());
    }
  }

  OperatorSubspace out = adjoin_identity(omega);
  for (const auto& f : elements)
    for (Eigen::Index i = 0; i < omega.dim() && out.dim() <= max_dim; ++i)
      absorb(out, unvec(f * vec(omega.basis[i]), n), tolerance);
  // Identity is in Omega, so images of the closure elements themselves cover
  // span{F(O)}; also close images of the grown basis for safety.
  Eigen::Index k = 0;
  while (k < out.dim() && out.dim() <= max_dim) {
    for (const auto& f : elements) absorb(out, unvec(f * vec(out.basis[k]), n), tolerance);
    ++k;
  }
  return out;
}

/// Parametric shortcut: O~ = span of the union over sampled controls u of the
/// time-independent Krylov spaces of L_u. Always a subspace of the full
/// observable space (asserted by the caller through residual checks).
inline OperatorSubspace observable_space_parametric(
    const ControlledLindbladGenerator& gen, const OperatorSubspace& omega,
    const std::vector<RealVector>& sample_controls,
    double tolerance = tol::rank_drop) {
  require(!sample_controls.empty(), "observable_space_parametric: no samples");
  OperatorSubspace out = adjoin_identity(omega);
  Eigen::Index max_dim = gen.dim_h * gen.dim_h;
  for (const auto& u : sample_controls) {
    gen.check_controls(u);
    detail::GeneratorSet one{[&gen, u](const Matrix& o) { return gen.apply(u, o); }};
    out = detail::invariant_closure(one, std::move(out), tolerance, max_dim).space;
  }
  return out;
}

/// Frame algebra F = alg({H_u} U {L_u} U {O_j}): the unital *-algebra
/// generated by every Hamiltonian, every noise operator and every target
/// observable. L_u-invariant by construction (invariant-algebra bound).
inline OperatorSubspace frame_algebra(const ControlledLindbladGenerator& gen,
                                      const OperatorSubspace& omega,
                                      double tolerance = tol::rank_drop,
                                      Eigen::Index max_dim = -1) {
  if (max_dim < 0) max_dim = gen.dim_h * gen.dim_h;
  std::vector<Matrix> seed{identity(gen.dim_h), gen.h0};
  for (const auto& l : gen.noise_drift) seed.push_back(l);
  for (const auto& ch : gen.channels) seed.push_back(ch.op);
  for (const auto& b : omega.basis) seed.push_back(b);
  return algebra_closure(orthonormalize(seed, tolerance), tolerance, max_dim);
}

// ---------------------------------------------------------------------------
// Drift-reduction sufficient condition: if the drift-only Krylov space O_0 is
// invariant under the designated control parts, alg(O) = alg(O_0) and the
// reduction may be carried out on the cheaper alg(O_0).
// ---------------------------------------------------------------------------

struct DriftReductionReport {
  bool holds = false;            // O_0 invariant under every designated part
  bool holds_on_algebra = false; // alg(O_0) invariant (extended condition)
  OperatorSubspace o0;
  double max_residual = 0.0;
  double max_algebra_residual = 0.0;
};

inline DriftReductionReport check_drift_reduction(
    const ControlledLindbladGenerator& gen, const OperatorSubspace& omega,
    const std::vector<Eigen::Index>& control_part_channels,
    double tolerance = tol::num) {
  DriftReductionReport rep;
  // L_0 part: drift plus every channel not designated as L'_u.
  detail::GeneratorSet base;
  base.push_back([&gen](const Matrix& o) { return gen.apply_drift(o); });
  std::vector<bool> designated(gen.channels.size(), false);
  for (auto l : control_part_channels) designated[static_cast<std::size_t>(l)] = true;
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l)
    if (!designated[static_cast<std::size_t>(l)])
      base.push_back([&gen, l](const Matrix& o) { return gen.apply_channel(l, o); });

  rep.o0 = detail::invariant_closure(base, adjoin_identity(omega), tolerance,
                                     gen.dim_h * gen.dim_h)
               .space;

  auto invariance_defect = [&](const OperatorSubspace& s) {
    double worst = 0.0;
    for (Eigen::Index l : control_part_channels)
      for (const auto& b : s.basis) {
        Matrix y = gen.apply_channel(l, b);
        worst = std::max(worst, residual(s, y).residual_norm /
                                    std::max(1.0, hs_norm(y)));
      }
    return worst;
  };

  rep.max_residual = invariance_defect(rep.o0);
  rep.holds = rep.max_residual <= tolerance;
  if (!rep.holds) {
    OperatorSubspace a0 = algebra_closure(rep.o0, tolerance, gen.dim_h * gen.dim_h);
    rep.max_algebra_residual = invariance_defect(a0);
    rep.holds_on_algebra = rep.max_algebra_residual <= tolerance;
  } else {
    rep.holds_on_algebra = true;
    rep.max_algebra_residual = rep.max_residual;
  }
  return rep;
}

/// Two states are indistinguishable given the expectations in Omega iff their
/// difference is orthogonal to the observable space.
inline bool indistinguishable(const Matrix& rho1, const Matrix& rho2,
                              const OperatorSubspace& o_space,
                              double tolerance = tol::num) {
  validate_density(rho1);
  validate_density(rho2);
  require(rho1.rows() == o_space.dim_h, "indistinguishable: dimension mismatch");
  Matrix diff = rho1 - rho2;
  return residual(o_space, diff).projection.norm() <= tolerance;
}

}  // namespace qmr
