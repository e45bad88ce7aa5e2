#pragma once

#include <algorithm>
#include <numeric>

#include "qmr/operator_space.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Closure of an operator subspace to a unital *-algebra, commutants, and the
// Wedderburn decomposition A = U^dag (sum_k B(H_F,k) (x) 1_G,k) U.
// ---------------------------------------------------------------------------

/// Smallest subspace containing S and the identity, closed under adjoints and
/// operator products. Worklist fixpoint over pairwise products.
inline OperatorSubspace algebra_closure(const OperatorSubspace& s,
                                        double tolerance = tol::rank_drop,
                                        Eigen::Index max_dim = -1) {
  const Eigen::Index n = s.dim_h;
  if (max_dim < 0) max_dim = n * n;
  OperatorSubspace a;
  a.dim_h = n;
  absorb(a, identity(n), tolerance);
  for (const auto& b : s.basis) {
    absorb(a, b, tolerance);
    absorb(a, b.adjoint(), tolerance);
  }
  // Products involving at least one element at index >= `frontier` are new.
  Eigen::Index frontier = 0;
  while (frontier < a.dim()) {
    Eigen::Index end = a.dim();
    for (Eigen::Index i = 0; i < end; ++i)
      for (Eigen::Index j = frontier; j < end; ++j) {
        // Both product orders, so pairing every element with the frontier
        // covers all new pairs.
        for (const Matrix& p :
             {Matrix(a.basis[i] * a.basis[j]), Matrix(a.basis[j] * a.basis[i])}) {
          if (absorb(a, p, tolerance)) {
            absorb(a, a.basis.back().adjoint(), tolerance);
            require(a.dim() <= max_dim, "algebra_closure: max_dim exceeded");
          }
        }
      }
    frontier = end;
  }
  return a;
}

/// Max residual of pairwise products and adjoints outside the span; a closed
/// *-algebra has defect ~0.
inline double closure_defect(const OperatorSubspace& a,
                             double scale_floor = 1.0) {
  double worst = 0.0;
  for (const auto& b : a.basis)
    worst = std::max(worst, residual(a, Matrix(b.adjoint())).residual_norm);
  for (const auto& x : a.basis)
    for (const auto& y : a.basis) {
      Matrix p = x * y;
      worst = std::max(worst, residual(a, p).residual_norm /
                                  std::max(scale_floor, hs_norm(p)));
    }
  return worst;
}

inline bool is_star_closed(const OperatorSubspace& a,
                           double tolerance = tol::num) {
  return closure_defect(a) <= tolerance;
}

/// Commutant {X : [X, B] = 0 for all B in A}, via the null space of the
/// positive semidefinite form sum_i C_i^dag C_i with C_i = 1 (x) B_i - B_i^T (x) 1.
inline OperatorSubspace commutant(const OperatorSubspace& a,
                                  double tolerance = tol::num) {
  require(is_star_closed(a, std::max(tolerance, tol::structure)),
          "commutant: input is not a *-closed algebra");
  const Eigen::Index n = a.dim_h;
  Matrix m = Matrix::Zero(n * n, n * n);
  const Matrix id = identity(n);
  for (const auto& b : a.basis) {
    // C^dag C expanded into four Kronecker terms; avoids n^2 x n^2 products.
    Matrix bdb = b.adjoint() * b;
    m += kron(id, bdb) + kron(bdb.transpose(), id);
    m -= kron(b.transpose(), b.adjoint()) + kron(b.conjugate(), b);
  }
  m = ((m + m.adjoint()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  double cut = std::max(tolerance * std::max(1.0, es.eigenvalues().maxCoeff()),
                        1e-14);
  std::vector<Matrix> null_ops;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) <= cut)
      null_ops.push_back(unvec(es.eigenvectors().col(i), n));
  require(!null_ops.empty(), "commutant: empty (identity should always commute)");
  return orthonormalize(null_ops);
}

/// Intersection of two subspaces via principal vectors of V1^dag V2.
inline OperatorSubspace subspace_intersection(const OperatorSubspace& s1,
                                              const OperatorSubspace& s2,
                                              double tolerance = 1e-8) {
  require(s1.dim_h == s2.dim_h, "subspace_intersection: dimension mismatch");
  Matrix g = s1.stacked().adjoint() * s2.stacked();
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU);
  std::vector<Matrix> ops;
  Matrix v1 = s1.stacked();
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) >= 1.0 - tolerance)
      ops.push_back(unvec(v1 * svd.matrixU().col(i), s1.dim_h));
  require(!ops.empty(), "subspace_intersection: empty intersection");
  return orthonormalize(ops);
}

// ---------------------------------------------------------------------------
// WedderburnStructure
// ---------------------------------------------------------------------------

struct WedderburnBlock {
  Eigen::Index dF = 0;  // factor carrying the algebra
  Eigen::Index dG = 0;  // multiplicity
};

struct WedderburnStructure {
  Eigen::Index dim_h = 0;
  Matrix u;  // rows are the adapted basis: U A U^dag block diagonal
  std::vector<WedderburnBlock> blocks;

  std::vector<Eigen::Index> block_offsets() const {  // offsets in H
    std::vector<Eigen::Index> off;
    Eigen::Index acc = 0;
    for (const auto& b : blocks) {
      off.push_back(acc);
      acc += b.dF * b.dG;
    }
    return off;
  }
  Eigen::Index dim_reduced() const {
    Eigen::Index acc = 0;
    for (const auto& b : blocks) acc += b.dF;
    return acc;
  }
  Eigen::Index algebra_dim() const {
    Eigen::Index acc = 0;
    for (const auto& b : blocks) acc += b.dF * b.dF;
    return acc;
  }
  /// Coisometry W_k: rows of U belonging to block k.
  Matrix w(std::size_t k) const {
    auto off = block_offsets();
    const auto& b = blocks[k];
    return u.middleRows(off[k], b.dF * b.dG);
  }
};

struct StructureVerification {
  bool ok = false;
  double max_residual = 0.0;
};

/// Residual of M against the nearest dF (x) dG block of the form A (x) 1_G.
inline double factor_residual(const Matrix& m, Eigen::Index dF, Eigen::Index dG,
                              Matrix* factor = nullptr) {
  // Average the dG diagonal dF-blocks (index order: F major, G minor).
  Matrix avg = Matrix::Zero(dF, dF);
  for (Eigen::Index g = 0; g < dG; ++g)
    for (Eigen::Index f1 = 0; f1 < dF; ++f1)
      for (Eigen::Index f2 = 0; f2 < dF; ++f2)
        avg(f1, f2) += m(f1 * dG + g, f2 * dG + g);
  avg /= static_cast<double>(dG);
  if (factor) *factor = avg;
  Matrix model = Matrix::Zero(dF * dG, dF * dG);
  for (Eigen::Index g = 0; g < dG; ++g)
    for (Eigen::Index f1 = 0; f1 < dF; ++f1)
      for (Eigen::Index f2 = 0; f2 < dF; ++f2)
        model(f1 * dG + g, f2 * dG + g) = avg(f1, f2);
  return (m - model).norm();
}

inline StructureVerification verify_structure(const OperatorSubspace& a,
                                              const WedderburnStructure& w,
                                              double tolerance = tol::structure) {
  StructureVerification v;
  require(a.dim_h == w.dim_h, "verify_structure: dimension mismatch");
  const Eigen::Index n = w.dim_h;
  v.max_residual = (w.u.adjoint() * w.u - identity(n)).norm();

  Eigen::Index total = 0, alg_dim = 0;
  for (const auto& b : w.blocks) {
    total += b.dF * b.dG;
    alg_dim += b.dF * b.dF;
  }
  if (total != n || alg_dim != a.dim()) {
    v.ok = false;
    v.max_residual = std::max(v.max_residual, 1.0);
    return v;
  }

  auto off = w.block_offsets();
  for (const auto& basis_el : a.basis) {
    Matrix rot = w.u * basis_el * w.u.adjoint();
    Matrix strip = rot;
    for (std::size_t k = 0; k < w.blocks.size(); ++k) {
      const Eigen::Index nk = w.blocks[k].dF * w.blocks[k].dG;
      v.max_residual = std::max(
          v.max_residual, factor_residual(rot.block(off[k], off[k], nk, nk),
                                          w.blocks[k].dF, w.blocks[k].dG));
      strip.block(off[k], off[k], nk, nk).setZero();
    }
    v.max_residual = std::max(v.max_residual, strip.norm());
  }
  v.ok = v.max_residual <= tolerance;
  return v;
}

// ---------------------------------------------------------------------------
// Randomized Wedderburn decomposition. Every randomized step ends in a
// verified certificate, so sampling failures are reported, never silent.
// ---------------------------------------------------------------------------

namespace detail {

/// Hermitian spanning set of a *-closed subspace, orthonormalized.
inline OperatorSubspace hermitian_basis(const OperatorSubspace& s,
                                        double tolerance = tol::rank_drop) {
  std::vector<Matrix> ops;
  for (const auto& b : s.basis) {
    ops.push_back(((b + b.adjoint()) / 2.0).eval());
    ops.push_back(((b - b.adjoint()) / (2.0 * kI)).eval());
  }
  return orthonormalize(ops, tolerance);
}

inline Matrix random_element(const OperatorSubspace& herm_basis, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x = Matrix::Zero(herm_basis.dim_h, herm_basis.dim_h);
  for (const auto& b : herm_basis.basis) x += g(rng) * b;
  return ((x + x.adjoint()) / 2.0).eval();
}

/// Clusters sorted eigenvalues with a gap tolerance relative to the spectral
/// range; returns [start, end) index pairs.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> cluster_eigenvalues(
    const RealVector& lam, double rel_gap = 1e-8) {
  double range = lam.maxCoeff() - lam.minCoeff();
  double gap = rel_gap * std::max(range, 1e-300) + 1e-13;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cl;
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= lam.size(); ++i) {
    if (i == lam.size() || lam(i) - lam(i - 1) > gap) {
      cl.emplace_back(start, i);
      start = i;
    }
  }
  return cl;
}

/// Orthonormal basis of the range of a (near-)projector, taking columns in
/// index order so that projectors aligned with the computational basis keep
/// its gauge.
inline Matrix range_basis(const Matrix& p, Eigen::Index rank,
                          double tolerance = 1e-6) {
  std::vector<Vector> cols;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Vector c = p.col(j);
    for (const auto& q : cols) c -= q.dot(c) * q;
    for (const auto& q : cols) c -= q.dot(c) * q;
    if (c.norm() > tolerance) cols.push_back(c.normalized());
    if (static_cast<Eigen::Index>(cols.size()) == rank) break;
  }
  require(static_cast<Eigen::Index>(cols.size()) == rank,
          "range_basis: rank deficiency");
  Matrix q(p.rows(), rank);
  for (Eigen::Index j = 0; j < rank; ++j) q.col(j) = cols[static_cast<std::size_t>(j)];
  return q;
}

}  // namespace detail

inline WedderburnStructure wedderburn(const OperatorSubspace& a,
                                      double tolerance = tol::structure,
                                      std::uint64_t seed = 0,
                                      int max_resamples = 5) {
  require(is_star_closed(a, std::max(tolerance, tol::structure)),
          "wedderburn: input is not a *-closed algebra");
  require(contains(a, identity(a.dim_h), 1e-8), "wedderburn: algebra not unital");
  const Eigen::Index n = a.dim_h;
  Rng rng(seed);

  OperatorSubspace aprime = commutant(a);
  OperatorSubspace center = subspace_intersection(a, aprime);
  OperatorSubspace center_h = detail::hermitian_basis(center);
  const Eigen::Index num_blocks = center.dim();

  // Minimal central projections from the spectral clusters of a generic
  // self-adjoint central element.
  std::vector<Matrix> projections;
  for (int attempt = 0;; ++attempt) {
    require(attempt < max_resamples,
            "wedderburn: failed to separate central eigenvalues after max resamples");
    Matrix z = detail::random_element(center_h, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(z);
    auto clusters = detail::cluster_eigenvalues(es.eigenvalues());
    if (static_cast<Eigen::Index>(clusters.size()) != num_blocks) continue;
    projections.clear();
    for (auto [s, e] : clusters) {
      Matrix v = es.eigenvectors().middleCols(s, e - s);
      projections.push_back(v * v.adjoint());
    }
    break;
  }

  struct BlockData {
    Eigen::Index dF = 0, dG = 0, first_index = 0;
    Matrix columns;  // n x (dF*dG), adapted basis columns, F major / G minor
  };
  std::vector<BlockData> data;

  for (const auto& p : projections) {
    BlockData bd;
    Eigen::Index nk = static_cast<Eigen::Index>(std::lround(p.trace().real()));
    Matrix q = detail::range_basis(p, nk);
    // Lowest occupied original index, for canonical block ordering.
    RealVector occupancy = p.diagonal().cwiseAbs().real();
    for (Eigen::Index i = 0; i < n; ++i)
      if (occupancy(i) > 1e-6) {
        bd.first_index = i;
        break;
      }

    // Compress the algebra to the block and find its relative commutant.
    std::vector<Matrix> compressed;
    for (const auto& b : a.basis) compressed.push_back(Matrix(q.adjoint() * b * q));
    OperatorSubspace ak = orthonormalize(compressed);
    Eigen::Index dF = static_cast<Eigen::Index>(std::lround(std::sqrt(
        static_cast<double>(ak.dim()))));
    require(dF * dF == ak.dim(),
            "wedderburn: compressed block dimension is not a perfect square");
    require(nk % dF == 0, "wedderburn: block size not divisible by dF");
    bd.dF = dF;
    bd.dG = nk / dF;

    if (bd.dG == 1) {
      bd.columns = q;  // keep the projector-range gauge
      data.push_back(std::move(bd));
      continue;
    }

    OperatorSubspace ck = commutant(ak);
    require(ck.dim() == bd.dG * bd.dG, "wedderburn: relative commutant dimension");
    OperatorSubspace ck_h = detail::hermitian_basis(ck);

    // Generic commutant element: its eigenspaces are the dG multiplicity
    // copies, each of dimension dF.
    for (int attempt = 0;; ++attempt) {
      require(attempt < max_resamples,
              "wedderburn: failed to separate multiplicity eigenspaces");
      Matrix y = detail::random_element(ck_h, rng);
      Eigen::SelfAdjointEigenSolver<Matrix> es(y);
      auto clusters = detail::cluster_eigenvalues(es.eigenvalues());
      if (static_cast<Eigen::Index>(clusters.size()) != bd.dG) continue;
      bool sizes_ok = true;
      for (auto [s, e] : clusters) sizes_ok &= (e - s == dF);
      if (!sizes_ok) continue;

      std::vector<Matrix> eig_bases;
      for (auto [s, e] : clusters)
        eig_bases.push_back(Matrix(es.eigenvectors().middleCols(s, e - s)));

      // Partial isometries between the first eigenspace and the others:
      // polar factors of compressed random commutant elements stay inside
      // the (von Neumann) commutant.
      Matrix yr = detail::random_element(ck_h, rng) +
                  kI * detail::random_element(ck_h, rng);
      bool ok = true;
      std::vector<Matrix> frames{eig_bases[0]};
      for (Eigen::Index g = 1; g < bd.dG; ++g) {
        Matrix s_g = eig_bases[static_cast<std::size_t>(g)].adjoint() * yr *
                     eig_bases[0];
        Eigen::JacobiSVD<Matrix> svd(s_g, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.singularValues().minCoeff() <
            1e-8 * std::max(1.0, svd.singularValues().maxCoeff())) {
          ok = false;
          break;
        }
        frames.push_back(Matrix(eig_bases[static_cast<std::size_t>(g)] *
                                svd.matrixU() * svd.matrixV().adjoint()));
      }
      if (!ok) continue;

      // Column (f*dG + g) of the block basis is frame g's f-th vector.
      bd.columns.resize(n, nk);
      for (Eigen::Index f = 0; f < dF; ++f)
        for (Eigen::Index g = 0; g < bd.dG; ++g)
          bd.columns.col(f * bd.dG + g) = q * frames[static_cast<std::size_t>(g)].col(f);
      break;
    }
    data.push_back(std::move(bd));
  }

  // Canonical ordering: decreasing dF, then decreasing dG, then lowest
  // occupied original index.
  std::sort(data.begin(), data.end(), [](const BlockData& x, const BlockData& y) {
    if (x.dF != y.dF) return x.dF > y.dF;
    if (x.dG != y.dG) return x.dG > y.dG;
    return x.first_index < y.first_index;
  });

  WedderburnStructure w;
  w.dim_h = n;
  Matrix cols(n, n);
  Eigen::Index at = 0;
  for (const auto& bd : data) {
    w.blocks.push_back({bd.dF, bd.dG});
    cols.middleCols(at, bd.dF * bd.dG) = bd.columns;
    at += bd.dF * bd.dG;
  }
  w.u = cols.adjoint();

  StructureVerification v = verify_structure(a, w, tolerance);
  require(v.ok, "wedderburn: structure certificate failed (residual " +
                    std::to_string(v.max_residual) + ")");
  return w;
}

}  // namespace qmr
