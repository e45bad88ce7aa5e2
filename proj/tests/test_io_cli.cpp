#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qmr/model_io.hpp"
#include "qmr/pipeline.hpp"
#include "qmr/propagation.hpp"

using namespace qmr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "qmr_io_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  fs::path log = temp_dir() / "cli_output.txt";
  std::string cmd =
      std::string(QMR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(status);
}

ControlledLindbladGenerator sample_generator() {
  ControlledLindbladGenerator gen;
  gen.dim_h = 2;
  gen.h0 = 0.5 * pauli('z');
  gen.noise_drift.push_back(0.3 * pauli('z'));
  gen.channels.push_back(
      {ChannelKind::hamiltonian, pauli('x'), "drive", {-1.0, 1.0}});
  gen.channels.push_back(
      {ChannelKind::dissipator, 0.4 * pauli('y'), "pump",
       {0.0, std::numeric_limits<double>::infinity()}});
  return gen;
}

}  // namespace

TEST_CASE("model JSON round trip") {
  auto gen = sample_generator();
  auto j = model_to_json(gen);
  auto back = model_from_json(j);
  CHECK(back.dim_h == gen.dim_h);
  CHECK((back.h0 - gen.h0).norm() < 1e-14);
  REQUIRE(back.noise_drift.size() == 1);
  CHECK((back.noise_drift[0] - gen.noise_drift[0]).norm() < 1e-14);
  REQUIRE(back.channels.size() == 2);
  CHECK(back.channels[0].label == "drive");
  CHECK(back.channels[1].coefficient_domain.lo == 0.0);
  CHECK(std::isinf(back.channels[1].coefficient_domain.hi));
  CHECK((back.channels[1].op - gen.channels[1].op).norm() < 1e-14);
}

TEST_CASE("pauli-string matrices in model input") {
  json j;
  j["format_version"] = 1;
  j["hamiltonian"] = {{"pauli", json::array({{{"string", "ZI"}, {"coeff", 0.7}},
                                             {{"string", "XX"}, {"coeff", -0.2}}})}};
  auto gen = model_from_json(j);
  Matrix expected = 0.7 * pauli_string("ZI") - 0.2 * pauli_string("XX");
  CHECK(gen.dim_h == 4);
  CHECK((gen.h0 - expected).norm() < 1e-14);
  CHECK((pauli_string("ZI") - kron(pauli('z'), identity(2))).norm() < 1e-14);
}

TEST_CASE("schedule and state round trips") {
  ControlSchedule sched;
  sched.samples_per_segment = 3;
  sched.segments.push_back({0.5, (RealVector(2) << 0.1, -0.7).finished()});
  sched.segments.push_back({0.25, (RealVector(2) << 1.0, 0.0).finished()});
  auto back = schedule_from_json(schedule_to_json(sched));
  CHECK(back.samples_per_segment == 3);
  REQUIRE(back.segments.size() == 2);
  CHECK(back.segments[1].duration == 0.25);
  CHECK((back.segments[0].u - sched.segments[0].u).norm() == 0.0);

  Rng rng(2);
  Matrix rho = random_density(3, rng);
  CHECK((state_from_json(state_to_json(rho)) - rho).norm() < 1e-14);
}

TEST_CASE("observables round trip and validation") {
  std::vector<std::pair<std::string, Operator>> obs = {
      {"sx", pauli('x')}, {"sz", pauli('z')}};
  auto back = observables_from_json(observables_to_json(obs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].first == "sx");
  CHECK((back[1].second - pauli('z')).norm() < 1e-14);

  json bad = json::array();
  bad.push_back({{"label", "raiser"},
                 {"operator", io_detail::matrix_to_json(
                                  (Matrix(2, 2) << 0, 1, 0, 0).finished())}});
  CHECK_THROWS_AS(observables_from_json(bad), ValidationError);
}

TEST_CASE("reduced model JSON round trip preserves the dynamics") {
  ControlledLindbladGenerator gen;
  gen.dim_h = 4;
  gen.h0 = kron(pauli('z'), identity(2));
  gen.noise_drift.push_back(0.3 * kron(pauli('x'), identity(2)));
  gen.channels.push_back({ChannelKind::hamiltonian,
                          kron(pauli('x'), identity(2)), "hx", Interval{}});
  auto res = reduce_model(gen, {identity(4), kron(pauli('z'), identity(2))}, {});
  auto back = reduced_model_from_json(reduced_model_to_json(res.model));

  CHECK(back.dim_reduced() == res.model.dim_reduced());
  CHECK(back.maps.num_blocks() == res.model.maps.num_blocks());
  CHECK((back.drift.hamiltonian - res.model.drift.hamiltonian).norm() < 1e-12);
  REQUIRE(back.observables.size() == res.model.observables.size());

  Rng rng(11);
  Matrix x = random_hermitian(back.dim_reduced(), rng);
  RealVector u(1);
  u << 0.6;
  CHECK((back.apply(u, x) - res.model.apply(u, x)).norm() < 1e-11);
}

TEST_CASE("format validation diagnostics") {
  json j;
  j["kind"] = "controlled_lindblad_model";
  CHECK_THROWS_AS(model_from_json(j), ValidationError);  // no format_version
  j["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(j), ValidationError);

  json s;
  s["format_version"] = 1;
  s["rho"] = io_detail::matrix_to_json(pauli('x'));  // not a density matrix
  CHECK_THROWS_AS(state_from_json(s), ValidationError);

  json m;
  m["format_version"] = 1;
  m["hamiltonian"] = {{"pauli", json::array({{{"string", "Q"}, {"coeff", 1.0}}})}};
  CHECK_THROWS_AS(model_from_json(m), ValidationError);
}

TEST_CASE("cli: full round trip on the central-spin benchmark") {
  fs::path dir = temp_dir();
  fs::path model = dir / "model.json";
  fs::path reduced = dir / "reduced.json";
  fs::path sched = dir / "sched.json";
  fs::path state = dir / "state.json";
  fs::path traj = dir / "traj.json";

  std::string out;
  REQUIRE(run_cli("gen-central-spin --n 1 --seed 3 --out " + model.string(),
                  &out) == 0);
  CHECK(out.find("dim = 4") != std::string::npos);

  REQUIRE(run_cli("reduce " + model.string() + " --seed 5 --out " +
                      reduced.string(),
                  &out) == 0);
  CHECK(out.find("pass") != std::string::npos);
  CHECK(out.find("FAIL") == std::string::npos);

  // Simulate both representations on the same schedule and state.
  ControlSchedule cs;
  cs.samples_per_segment = 4;
  cs.segments.push_back({0.4, (RealVector(2) << 0.8, -0.3).finished()});
  cs.segments.push_back({0.3, (RealVector(2) << 0.0, 1.1).finished()});
  save_json(sched.string(), schedule_to_json(cs));
  Rng rng(8);
  save_json(state.string(), state_to_json(random_density(4, rng)));

  REQUIRE(run_cli("simulate " + model.string() + " --schedule " +
                      sched.string() + " --state " + state.string() +
                      " --out " + traj.string(),
                  &out) == 0);
  json jt = load_json(traj.string());
  REQUIRE(jt["series"].size() == 3);
  auto full_vals = jt["series"][0]["values"].get<std::vector<double>>();

  fs::path traj2 = dir / "traj_reduced.json";
  REQUIRE(run_cli("simulate " + reduced.string() + " --schedule " +
                      sched.string() + " --state " + state.string() +
                      " --out " + traj2.string(),
                  &out) == 0);
  auto red_vals =
      load_json(traj2.string())["series"][0]["values"].get<std::vector<double>>();
  REQUIRE(red_vals.size() == full_vals.size());
  for (std::size_t i = 0; i < full_vals.size(); ++i)
    CHECK(full_vals[i] == Catch::Approx(red_vals[i]).margin(1e-9));

  REQUIRE(run_cli("compare " + model.string() + " " + reduced.string() +
                      " --states 2 --schedules 2 --segments 10 --seed 7",
                  &out) == 0);
  CHECK(out.find("PASS") != std::string::npos);

  REQUIRE(run_cli("check " + model.string(), &out) == 0);
  CHECK(out.find("dim F = 8") != std::string::npos);
  CHECK(out.find("reducible via F: yes") != std::string::npos);
}

TEST_CASE("cli: exit codes") {
  fs::path dir = temp_dir();
  // Validation failure: missing file.
  CHECK(run_cli("reduce " + (dir / "does_not_exist.json").string()) == 2);

  // Validation failure: malformed document.
  fs::path broken = dir / "broken.json";
  {
    std::ofstream out(broken);
    out << "{\"format_version\": 1}\n";
  }
  CHECK(run_cli("reduce " + broken.string()) == 2);

  // Comparison failure: reduced model from a different system.
  fs::path model_a = dir / "a.json";
  fs::path model_b = dir / "b.json";
  fs::path reduced_b = dir / "b_reduced.json";
  REQUIRE(run_cli("gen-central-spin --n 1 --seed 3 --out " + model_a.string()) == 0);
  REQUIRE(run_cli("gen-central-spin --n 1 --seed 4 --out " + model_b.string()) == 0);
  REQUIRE(run_cli("reduce " + model_b.string() + " --out " + reduced_b.string()) == 0);
  CHECK(run_cli("compare " + model_a.string() + " " + reduced_b.string() +
                " --states 1 --schedules 1 --segments 5") == 3);
}
