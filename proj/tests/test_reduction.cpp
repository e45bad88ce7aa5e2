#include <catch2/catch_amalgamated.hpp>

#include "qmr/central_spin.hpp"
#include "qmr/pipeline.hpp"
#include "qmr/propagation.hpp"
#include "qmr/reduction.hpp"

using namespace qmr;

namespace {

OperatorSubspace full_matrix_algebra(Eigen::Index n) {
  std::vector<Matrix> b;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = 1.0;
      b.push_back(e);
    }
  return orthonormalize(b);
}

OperatorSubspace diagonal_algebra(Eigen::Index n) {
  std::vector<Matrix> b;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix e = Matrix::Zero(n, n);
    e(i, i) = 1.0;
    b.push_back(e);
  }
  return orthonormalize(b);
}

OperatorSubspace central_spin_frame(int n_bath) {
  const Eigen::Index nb = Eigen::Index(1) << n_bath;
  std::vector<Matrix> gens;
  for (char axis : {'i', 'x', 'y', 'z'})
    for (Eigen::Index q = 0; q < nb; ++q) {
      Matrix e = Matrix::Zero(nb, nb);
      e(q, q) = 1.0;
      gens.push_back(kron(pauli(axis), e));
    }
  return orthonormalize(gens);
}

// Identify which bath configuration a 2x2 block corresponds to by locating
// the support of its coisometry row.
Eigen::Index block_bath_index(const ReductionMaps& maps, std::size_t k) {
  Eigen::Index q = 0;
  maps.w[k].row(0).cwiseAbs().maxCoeff(&q);
  return q;
}

}  // namespace

TEST_CASE("projector: full algebra gives the identity map") {
  auto a = full_matrix_algebra(3);
  auto ws = wedderburn(a);
  auto maps = build_reduction_maps(ws);
  CHECK(maps.dim_reduced == 3);
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    Matrix x = random_matrix(3, rng);
    CHECK((projector_apply(maps, x) - x).norm() < 1e-10);
  }
}

TEST_CASE("projector: diagonal algebra pinches") {
  auto maps = build_reduction_maps(wedderburn(diagonal_algebra(4)));
  CHECK(maps.dim_reduced == 4);
  Rng rng(5);
  Matrix x = random_matrix(4, rng);
  Matrix p = projector_apply(maps, x);
  CHECK((p - Matrix(x.diagonal().asDiagonal())).norm() < 1e-10);
}

TEST_CASE("projector: central spin frame is a sector pinching") {
  auto frame = central_spin_frame(2);
  auto maps = build_reduction_maps(wedderburn(frame));
  CHECK(maps.num_blocks() == 4);
  CHECK(maps.dim_reduced == 8);  // no dimension drop, only block structure
  Rng rng(9);
  Matrix x = random_matrix(8, rng);
  Matrix expected = Matrix::Zero(8, 8);
  for (std::size_t k = 0; k < maps.num_blocks(); ++k)
    expected += maps.w[k].adjoint() * (maps.w[k] * x * maps.w[k].adjoint()) *
                maps.w[k];
  CHECK((projector_apply(maps, x) - expected).norm() < 1e-10);
  // Idempotence and unitality.
  CHECK((projector_apply(maps, expected) - expected).norm() < 1e-10);
  CHECK((projector_apply(maps, identity(8)) - identity(8)).norm() < 1e-10);
}

TEST_CASE("map_R unitality and adjoint duality") {
  auto frame = central_spin_frame(1);
  auto maps = build_reduction_maps(wedderburn(frame));
  CHECK((map_R(maps, identity(4)) -
         Matrix::Identity(maps.dim_reduced, maps.dim_reduced))
            .norm() < 1e-10);

  // dG = 1 everywhere: plain duality <R(X), Y> = <X, J(Y)>.
  Rng rng(13);
  Matrix x = random_matrix(4, rng);
  Matrix y = Matrix::Zero(maps.dim_reduced, maps.dim_reduced);
  for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
    Eigen::Index off = maps.reduced_offsets[k], d = maps.dF(k);
    y.block(off, off, d, d) = random_matrix(d, rng);
  }
  CHECK(std::abs(hs_inner(map_R(maps, x), y) - hs_inner(x, map_J(maps, y))) <
        1e-10);
}

TEST_CASE("adjoint duality with multiplicity carries block weights") {
  // Algebra {X (x) 1_2}: one block with dF = 2, dG = 2.
  std::vector<Matrix> gens;
  for (char axis : {'i', 'x', 'y', 'z'})
    gens.push_back(kron(pauli(axis), identity(2)));
  auto a = algebra_closure(orthonormalize(gens));
  auto maps = build_reduction_maps(wedderburn(a));
  REQUIRE(maps.num_blocks() == 1);
  CHECK(maps.dG(0) == 2);
  Rng rng(17);
  Matrix x = random_matrix(4, rng);
  Matrix y = random_matrix(2, rng);
  double weighted = 2.0 * hs_inner(map_R(maps, x), y).real();
  CHECK(std::abs(weighted - hs_inner(x, map_J(maps, y)).real()) < 1e-10);
  CHECK(std::abs(hs_inner(map_R(maps, x), y).imag() * 2.0 -
                 hs_inner(x, map_J(maps, y)).imag()) < 1e-10);

  // R o J is the identity on the reduced space.
  CHECK((map_R(maps, map_J(maps, y)) - y).norm() < 1e-10);
}

TEST_CASE("map_J embeds isometrically up to multiplicity and rejects cross-block input") {
  auto maps = build_reduction_maps(wedderburn(central_spin_frame(1)));
  REQUIRE(maps.num_blocks() == 2);
  Rng rng(19);
  Matrix y = Matrix::Zero(4, 4);
  y.block(0, 0, 2, 2) = random_matrix(2, rng);
  y.block(2, 2, 2, 2) = random_matrix(2, rng);
  Matrix j = map_J(maps, y);
  CHECK(std::abs(j.norm() - y.norm()) < 1e-10);  // dG = 1: isometric
  CHECK((map_R(maps, j) - y).norm() < 1e-10);

  Matrix bad = y;
  bad(0, 3) = 0.5;  // couples the two sectors
  CHECK_THROWS_AS(map_J(maps, bad), ValidationError);
}

TEST_CASE("map_state preserves trace and positivity") {
  auto maps = build_reduction_maps(wedderburn(central_spin_frame(2)));
  Rng rng(23);
  for (int t = 0; t < 5; ++t) {
    Matrix rho = random_density(8, rng);
    Matrix r = map_state(maps, rho);
    CHECK(std::abs(r.trace().real() - 1.0) < 1e-10);
    CHECK(min_eigenvalue(r) > -1e-10);
    // Expectation values of embedded observables agree.
    Matrix y = Matrix::Zero(8, 8);
    for (std::size_t k = 0; k < maps.num_blocks(); ++k) {
      Eigen::Index off = maps.reduced_offsets[k], d = maps.dF(k);
      y.block(off, off, d, d) = random_hermitian(d, rng);
    }
    Complex full = (rho * map_J(maps, y)).trace();
    Complex red = (r * y).trace();
    CHECK(std::abs(full - red) < 1e-9);
  }
}

TEST_CASE("verify_projector accepts the real thing and flags corruption") {
  auto frame = central_spin_frame(1);
  auto ws = wedderburn(frame);
  auto maps = build_reduction_maps(ws);
  auto rep = verify_projector(maps, frame);
  CHECK(rep.ok());

  // A broken coisometry is rejected at construction.
  WedderburnStructure bad = ws;
  bad.u.row(1).setZero();
  CHECK_THROWS_AS(build_reduction_maps(bad), ValidationError);

  // A wrong unitary (valid coisometry, wrong subspace) fails verification:
  // the identity groups {e0,e1} per block, but the sectors are {e0,e2},{e1,e3}.
  WedderburnStructure shuffled = ws;
  shuffled.u = Matrix::Identity(4, 4);
  auto bad_maps = build_reduction_maps(shuffled);
  // The rotated projector no longer fixes the frame algebra.
  auto bad_rep = verify_projector(bad_maps, frame);
  CHECK_FALSE(bad_rep.ok());
}

TEST_CASE("reduce_generator: trivial reduction reproduces the generator") {
  Rng rng(31);
  ControlledLindbladGenerator gen;
  gen.dim_h = 3;
  gen.h0 = random_hermitian(3, rng);
  gen.noise_drift.push_back(0.5 * random_matrix(3, rng));
  gen.channels.push_back(
      {ChannelKind::hamiltonian, random_hermitian(3, rng), "u0", Interval{}});
  gen.channels.push_back(
      {ChannelKind::dissipator, 0.4 * random_matrix(3, rng), "u1", {0.0, 2.0}});

  auto maps = build_reduction_maps(wedderburn(full_matrix_algebra(3)));
  auto omega = orthonormalize({identity(3), random_hermitian(3, rng)});
  auto model = reduce_generator(gen, maps, omega);
  CHECK(model.all_certificates_pass);
  CHECK_FALSE(model.reduction_achieved);

  RealVector u(2);
  u << 0.7, 1.3;
  for (int t = 0; t < 5; ++t) {
    Matrix x = random_hermitian(3, rng);
    Matrix full = gen.apply(u, map_J(maps, map_R(maps, x)));
    Matrix red = model.apply(u, map_R(maps, x));
    CHECK((map_R(maps, full) - red).norm() < 1e-10);
  }
}

TEST_CASE("reduce_generator: central spin produces per-sector qubit models") {
  auto p = random_central_spin(2, 42);
  auto gen = central_spin_generator(p);
  PipelineOptions opt;
  auto res = reduce_model(
      gen, {identity(8), site_pauli('x', 0, 3), site_pauli('y', 0, 3),
            site_pauli('z', 0, 3)},
      opt);
  const auto& model = res.model;
  REQUIRE(model.maps.num_blocks() == 4);
  CHECK(model.reduction_achieved);
  CHECK(model.all_certificates_pass);

  // Drift Hamiltonian: beta_q sigma_z on sector q; dissipators vanish.
  for (std::size_t k = 0; k < model.maps.num_blocks(); ++k) {
    Eigen::Index q = block_bath_index(model.maps, k);
    Eigen::Index off = model.maps.reduced_offsets[k];
    Matrix hq = model.drift.hamiltonian.block(off, off, 2, 2);
    CHECK((hq - central_spin_beta(p, q) * pauli('z')).norm() < 1e-8);
  }
  double noise_norm = 0.0;
  for (const auto& l : model.drift.noise_ops) noise_norm += l.norm();
  CHECK(noise_norm < 1e-8);

  // Control channels: direct sums of sigma_x and sigma_z.
  REQUIRE(model.channels.size() == 2);
  Matrix sx_sum = Matrix::Zero(8, 8), sz_sum = Matrix::Zero(8, 8);
  for (int b = 0; b < 4; ++b) {
    sx_sum.block(2 * b, 2 * b, 2, 2) = pauli('x');
    sz_sum.block(2 * b, 2 * b, 2, 2) = pauli('z');
  }
  CHECK((model.channels[0].part.hamiltonian - sx_sum).norm() < 1e-8);
  CHECK((model.channels[1].part.hamiltonian - sz_sum).norm() < 1e-8);
}

TEST_CASE("reduce_generator: genuine dimension reduction with certificates") {
  // Everything lives in {X (x) 1_2}: reduces 4 -> 2.
  Rng rng(37);
  ControlledLindbladGenerator gen;
  gen.dim_h = 4;
  gen.h0 = kron(pauli('z'), identity(2));
  gen.noise_drift.push_back(0.3 * kron(pauli('x'), identity(2)));
  gen.channels.push_back({ChannelKind::hamiltonian,
                          kron(pauli('x'), identity(2)), "hx", Interval{}});
  gen.channels.push_back({ChannelKind::dissipator,
                          Matrix(0.5 * kron(random_matrix(2, rng), identity(2))),
                          "d0",
                          {0.0, 2.0}});

  auto res =
      reduce_model(gen, {identity(4), kron(pauli('z'), identity(2))}, {});
  const auto& model = res.model;
  CHECK(model.dim_reduced() == 2);
  CHECK(model.reduction_achieved);
  CHECK(model.all_certificates_pass);
  for (const auto& cert : model.certificates) {
    CHECK(cert.passes);
    CHECK(cert.min_cp_eigenvalue > -1e-9);
    CHECK(cert.agreement_residual < 1e-9);
  }

  // Trajectories agree exactly between full and reduced model.
  ControlSchedule sched;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 4; ++s)
    sched.segments.push_back(
        {0.3 + 0.2 * unif(rng),
         (RealVector(2) << 2.0 * unif(rng) - 1.0, 1.5 * unif(rng)).finished()});
  Matrix rho = random_density(4, rng);
  std::vector<Operator> obs;
  for (const auto& [label, o] : model.observables)
    obs.push_back(map_J(model.maps, o));
  auto cmp = compare_full_reduced(gen, model, obs, rho, sched);
  CHECK(cmp.passes);
  CHECK(cmp.max_deviation < 1e-8);
}

TEST_CASE("reduced generator certificates catch injected violations") {
  auto p = random_central_spin(1, 7);
  auto gen = central_spin_generator(p);
  auto res = reduce_model(
      gen, {identity(4), site_pauli('x', 0, 2), site_pauli('z', 0, 2)}, {});
  auto model = res.model;
  REQUIRE(model.all_certificates_pass);

  // Corrupt the drift so the compressed action no longer matches.
  model.drift.hamiltonian(0, 0) += 0.1;
  model.drift.hamiltonian(1, 1) -= 0.1;
  Matrix x = site_pauli('x', 0, 1);
  Matrix lifted = map_J(model.maps, model.apply(RealVector::Zero(2), map_R(model.maps, kron(x, identity(2)))));
  Matrix truth = gen.apply(RealVector::Zero(2), kron(x, identity(2)));
  CHECK((lifted - truth).norm() > 1e-3);
}
