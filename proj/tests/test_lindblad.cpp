#include <catch2/catch_amalgamated.hpp>

#include "qmr/lindblad.hpp"

using namespace qmr;

namespace {

ControlledLindbladGenerator random_generator(Eigen::Index n, int channels,
                                             Rng& rng) {
  ControlledLindbladGenerator gen;
  gen.dim_h = n;
  gen.h0 = random_hermitian(n, rng);
  gen.noise_drift.push_back(0.3 * random_matrix(n, rng));
  for (int l = 0; l < channels; ++l) {
    ControlChannel ch;
    if (l % 2 == 0) {
      ch.kind = ChannelKind::hamiltonian;
      ch.op = random_hermitian(n, rng);
    } else {
      ch.kind = ChannelKind::dissipator;
      ch.op = 0.5 * random_matrix(n, rng);
      ch.coefficient_domain = {0.0, 2.0};
    }
    ch.label = "c" + std::to_string(l);
    gen.channels.push_back(std::move(ch));
  }
  return gen;
}

RealVector random_controls(const ControlledLindbladGenerator& gen, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RealVector u(gen.num_controls());
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l) {
    const auto& d = gen.channels[static_cast<std::size_t>(l)].coefficient_domain;
    double lo = std::isfinite(d.lo) ? d.lo : -1.0;
    double hi = std::isfinite(d.hi) ? d.hi : 1.0;
    u(l) = lo + unif(rng) * (hi - lo);
  }
  return u;
}

}  // namespace

TEST_CASE("generator application basics") {
  // Pure Hamiltonian sigma_z on sigma_x: i[sz, sx] = -2 sy.
  ControlledLindbladGenerator gen;
  gen.dim_h = 2;
  gen.h0 = pauli('z');
  gen.validate();
  CHECK((gen.apply_drift(pauli('x')) + 2.0 * pauli('y')).norm() < 1e-14);

  // Pure dephasing L = sigma_z on sigma_x: sz sx sz = -sx -> -2 sx.
  ControlledLindbladGenerator deph;
  deph.dim_h = 2;
  deph.h0 = Matrix::Zero(2, 2);
  deph.noise_drift.push_back(pauli('z'));
  CHECK((deph.apply_drift(pauli('x')) + 2.0 * pauli('x')).norm() < 1e-14);

  // Unitality on a random generator.
  Rng rng(23);
  auto g = random_generator(4, 3, rng);
  CHECK(g.apply(random_controls(g, rng), identity(4)).norm() < 1e-12);
}

TEST_CASE("affine superoperators match direct application") {
  ControlledLindbladGenerator none;
  none.dim_h = 2;
  none.h0 = pauli('z');
  CHECK(affine_superoperators(none).channel_parts.empty());

  ControlledLindbladGenerator one;
  one.dim_h = 2;
  one.h0 = Matrix::Zero(2, 2);
  one.channels.push_back({ChannelKind::hamiltonian, pauli('x'), "x", {}});
  auto parts = affine_superoperators(one);
  auto direct = superoperator_from_map(
      [](const Matrix& o) { return hamiltonian_part(pauli('x'), o); }, 2);
  CHECK((parts.channel_parts[0].mat - direct.mat).norm() < 1e-13);

  Rng rng(31);
  auto gen = random_generator(3, 2, rng);
  auto aff = affine_superoperators(gen);
  RealVector u = random_controls(gen, rng);
  auto lu = aff.at(u);
  for (int i = 0; i < 20; ++i) {
    Matrix o = random_matrix(3, rng);
    CHECK((lu.apply(o) - gen.apply(u, o)).norm() < 1e-11);
  }
}

TEST_CASE("self-adjointness preservation") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    auto gen = random_generator(3, 2, rng);
    Matrix o = random_hermitian(3, rng);
    Matrix y = gen.apply(random_controls(gen, rng), o);
    CHECK((y - y.adjoint()).norm() < 1e-11);
  }
}

TEST_CASE("is_lindblad: Hamiltonian generators pass with zero Kossakowski") {
  Rng rng(9);
  Matrix h = random_hermitian(4, rng);
  auto s = generator_superoperator(h, {});
  auto cert = is_lindblad(s);
  CHECK(cert.passes);
  CHECK(cert.kossakowski_min_eigenvalue > -1e-12);
  CHECK(cert.unitality_residual < 1e-12);
  CHECK((cert.hamiltonian - (h - h.trace() / 4.0 * identity(4))).norm() < 1e-9);
}

TEST_CASE("is_lindblad: sign-flipped dissipator fails") {
  double gamma = 0.7;
  auto s = superoperator_from_map(
      [&](const Matrix& o) {
        return Matrix(-gamma * dissipator(pauli('z'), o));
      },
      2);
  auto cert = is_lindblad(s);
  CHECK_FALSE(cert.passes);
  // The dephasing Kossakowski weight flips to -gamma (rate units of the
  // normalized traceless basis F = sigma_z / sqrt(2): coefficient 2*gamma).
  CHECK(cert.kossakowski_min_eigenvalue < -gamma);
}

TEST_CASE("is_lindblad: random noise models round trip") {
  Rng rng(57);
  for (Eigen::Index n : {2, 3, 4, 6}) {
    Matrix h = random_hermitian(n, rng);
    std::vector<Matrix> noise;
    for (int k = 0; k < 3; ++k) noise.push_back(0.6 * random_matrix(n, rng));
    auto s = generator_superoperator(h, noise);
    auto cert = is_lindblad(s);
    CHECK(cert.passes);
    CHECK(cert.kossakowski_min_eigenvalue > -1e-12);
    CHECK(cert.reconstruction_residual < 1e-10);

    // Rebuild from the extracted operators; must be the same superoperator.
    auto rebuilt = generator_superoperator(cert.hamiltonian, cert.noise_ops);
    CHECK((rebuilt.mat - s.mat).norm() < 1e-10 * std::max(1.0, s.mat.norm()));
  }
}

TEST_CASE("extraction gauge: single dephasing channel") {
  double gamma = 0.35;
  Matrix l = std::sqrt(gamma) * pauli('z');
  auto s = generator_superoperator(Matrix::Zero(2, 2), {l});
  auto [h, noise] = extract_hamiltonian_and_noise(s);
  CHECK(h.norm() < 1e-10);
  REQUIRE(noise.size() == 1);
  CHECK(std::abs(hs_inner(noise[0], noise[0]).real() - 2.0 * gamma) < 1e-10);
}

TEST_CASE("extraction gauge: pure sigma_z Hamiltonian") {
  auto s = generator_superoperator(pauli('z'), {});
  auto [h, noise] = extract_hamiltonian_and_noise(s);
  CHECK((h - pauli('z')).norm() < 1e-10);
  CHECK(noise.empty());
}

TEST_CASE("channel validation") {
  ControlledLindbladGenerator gen;
  gen.dim_h = 2;
  gen.h0 = pauli('x');
  gen.channels.push_back({ChannelKind::dissipator, pauli('z'), "bad", {-1.0, 1.0}});
  CHECK_THROWS_AS(gen.validate(), ValidationError);

  gen.channels[0].coefficient_domain = {0.0, 1.0};
  gen.validate();
  RealVector u(1);
  u << 2.0;
  CHECK_THROWS_AS(gen.check_controls(u), ValidationError);
}
