// qmr: exact model reduction of controlled Lindblad dynamics.
//
// Subcommands: reduce, simulate, compare, check, gen-central-spin.
// Exit codes: 0 success, 2 validation error, 3 certificate/comparison failure,
// 4 non-convergence.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "qmr/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCertificate = 3;
constexpr int kExitNonConvergence = 4;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("QMR_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw qmr::ValidationError("QMR_SEED must be an unsigned integer");
    }
  }
  return 1;
}

std::vector<qmr::Operator> omega_operators(
    const std::vector<std::pair<std::string, qmr::Operator>>& obs) {
  std::vector<qmr::Operator> out;
  for (const auto& [label, o] : obs) out.push_back(o);
  return out;
}

/// Loads a model file; observables may live in the model document under
/// "observables" or in a separate file given with --obs.
std::pair<qmr::ControlledLindbladGenerator,
          std::vector<std::pair<std::string, qmr::Operator>>>
load_model_with_observables(const std::string& model_path,
                            const std::string& obs_path) {
  qmr::json j = qmr::load_json(model_path);
  auto gen = qmr::model_from_json(j);
  std::vector<std::pair<std::string, qmr::Operator>> obs;
  if (!obs_path.empty())
    obs = qmr::observables_from_json(qmr::load_json(obs_path));
  else if (j.contains("observables"))
    obs = qmr::observables_from_json(j["observables"]);
  else
    throw qmr::ValidationError(
        "no observables: add an 'observables' array to the model or pass --obs");
  for (const auto& [label, o] : obs)
    if (o.rows() != gen.dim_h)
      throw qmr::ValidationError("observable '" + label +
                                 "' has the wrong dimension");
  return {std::move(gen), std::move(obs)};
}

qmr::ControlSchedule random_schedule(const qmr::ControlledLindbladGenerator& gen,
                                     int segments, qmr::Rng& rng) {
  std::uniform_real_distribution<double> dur(0.02, 0.15);
  std::uniform_real_distribution<double> amp(-1.5, 1.5);
  qmr::ControlSchedule sched;
  sched.samples_per_segment = 2;
  for (int s = 0; s < segments; ++s) {
    qmr::ScheduleSegment seg;
    seg.duration = dur(rng);
    seg.u.resize(gen.num_controls());
    for (Eigen::Index l = 0; l < gen.num_controls(); ++l) {
      const auto& d = gen.channels[static_cast<std::size_t>(l)].coefficient_domain;
      double lo = std::isfinite(d.lo) ? d.lo : -1.5;
      double hi = std::isfinite(d.hi) ? d.hi : 1.5;
      hi = std::min(hi, lo + 3.0);
      seg.u(l) = lo + (amp(rng) + 1.5) / 3.0 * (hi - lo);
    }
    sched.segments.push_back(std::move(seg));
  }
  return sched;
}

int cmd_reduce(const std::string& model_path, const std::string& obs_path,
               const std::string& path_name, double tolerance,
               std::uint64_t seed, const std::string& out_path,
               const std::string& report_path) {
  auto [gen, obs] = load_model_with_observables(model_path, obs_path);
  qmr::PipelineOptions opt;
  opt.tolerance = tolerance;
  opt.seed = seed;
  if (path_name == "auto")
    opt.path = qmr::ReductionPath::automatic;
  else if (path_name == "frame")
    opt.path = qmr::ReductionPath::frame;
  else if (path_name == "drift")
    opt.path = qmr::ReductionPath::drift;
  else
    throw qmr::ValidationError("--path must be auto, frame or drift");

  qmr::PipelineResult res;
  try {
    res = qmr::reduce_model(gen, omega_operators(obs), opt);
  } catch (const qmr::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  }
  for (std::size_t k = 0; k < obs.size(); ++k)
    res.model.observables[k].first = obs[k].first;

  std::cout << "n = " << gen.dim_h << ", n_reduced = " << res.model.dim_reduced()
            << "\n"
            << "dim O = " << res.dim_observable
            << ", dim alg = " << res.dim_algebra
            << ", dim F = " << res.dim_frame << "\n"
            << "path: " << res.path_used << "\nblocks:";
  for (const auto& b : res.model.maps.wedderburn.blocks)
    std::cout << " (" << b.dF << "," << b.dG << ")";
  std::cout << "\nprojector certificate: "
            << (res.projector_report.ok() ? "pass" : "FAIL")
            << "\nLindblad certificates ("
            << res.model.certificates.size() << " sampled u): "
            << (res.model.all_certificates_pass ? "pass" : "FAIL") << "\n";
  for (const auto& w : res.warnings) std::cout << "warning: " << w << "\n";

  if (!out_path.empty()) qmr::save_json(out_path, qmr::reduced_model_to_json(res.model));
  if (!report_path.empty())
    qmr::save_json(report_path, qmr::pipeline_report_to_json(res, gen));
  if (!res.model.all_certificates_pass || !res.projector_report.ok())
    return kExitCertificate;
  return kExitOk;
}

int cmd_simulate(const std::string& model_path, const std::string& sched_path,
                 const std::string& state_path, const std::string& obs_path,
                 const std::string& out_path) {
  qmr::json jm = qmr::load_json(model_path);
  qmr::ControlSchedule sched = qmr::schedule_from_json(qmr::load_json(sched_path));
  qmr::Matrix rho = qmr::state_from_json(qmr::load_json(state_path));

  qmr::Trajectory traj;
  std::vector<std::string> labels;
  if (jm.value("kind", "") == "reduced_lindblad_model") {
    qmr::ReducedModel model = qmr::reduced_model_from_json(jm);
    if (rho.rows() != model.maps.dim_full())
      throw qmr::ValidationError(
          "state dimension does not match the reduced model's full space");
    traj = qmr::reduced_expectation_trajectory(model, rho, sched);
    for (const auto& [label, o] : model.observables) labels.push_back(label);
  } else {
    auto [gen, obs] = load_model_with_observables(model_path, obs_path);
    if (rho.rows() != gen.dim_h)
      throw qmr::ValidationError("state dimension does not match the model");
    traj = qmr::expectation_trajectory(gen, rho, omega_operators(obs), sched);
    for (const auto& [label, o] : obs) labels.push_back(label);
  }
  qmr::json out = qmr::trajectory_to_json(traj, labels);
  if (out_path.empty())
    std::cout << out.dump(2) << "\n";
  else
    qmr::save_json(out_path, out);
  return kExitOk;
}

int cmd_compare(const std::string& model_path, const std::string& reduced_path,
                const std::string& obs_path, int num_schedules, int num_states,
                int segments, std::uint64_t seed, double rel_tol) {
  auto [gen, obs] = load_model_with_observables(model_path, obs_path);
  qmr::ReducedModel model =
      qmr::reduced_model_from_json(qmr::load_json(reduced_path));
  if (model.maps.dim_full() != gen.dim_h)
    throw qmr::ValidationError(
        "reduced model was not derived from this model (dimension mismatch)");
  if (model.observables.size() != obs.size())
    throw qmr::ValidationError(
        "reduced model was not derived from these observables (count mismatch)");

  qmr::Rng rng(seed);
  double worst = 0.0;
  double full_time = 0.0, reduced_time = 0.0;
  bool all_pass = true;
  for (int i = 0; i < num_states; ++i) {
    qmr::Matrix rho = qmr::random_density(gen.dim_h, rng);
    for (int s = 0; s < num_schedules; ++s) {
      auto sched = random_schedule(gen, segments, rng);
      auto rep = qmr::compare_full_reduced(gen, model, omega_operators(obs),
                                           rho, sched, rel_tol);
      worst = std::max(worst, rep.max_deviation);
      full_time += rep.full.wall_seconds;
      reduced_time += rep.reduced.wall_seconds;
      all_pass = all_pass && rep.passes;
    }
  }
  std::cout << "max deviation = " << worst << " over " << num_states << " x "
            << num_schedules << " runs (" << segments << " segments each)\n"
            << "full propagation " << full_time << " s, reduced " << reduced_time
            << " s\n"
            << (all_pass ? "PASS" : "FAIL") << "\n";
  return all_pass ? kExitOk : kExitCertificate;
}

int cmd_check(const std::string& model_path, const std::string& obs_path,
              const std::string& props, const std::string& split,
              double tolerance) {
  auto [gen, obs] = load_model_with_observables(model_path, obs_path);
  auto omega = qmr::orthonormalize(omega_operators(obs), tolerance);

  bool want3 = props.find('3') != std::string::npos;
  bool want4 = props.find('4') != std::string::npos;
  if (want3) {
    auto frame = qmr::frame_algebra(gen, omega, tolerance);
    std::cout << "dim F = " << frame.dim() << " (ambient " << gen.dim_h * gen.dim_h
              << "); reducible via F: "
              << (frame.dim() < gen.dim_h * gen.dim_h ? "yes" : "no") << "\n";
  }
  if (want4) {
    std::vector<Eigen::Index> designated;
    if (split.empty()) {
      designated = qmr::default_designated(gen);
    } else {
      std::stringstream ss(split);
      std::string tok;
      while (std::getline(ss, tok, ','))
        designated.push_back(static_cast<Eigen::Index>(std::stol(tok)));
    }
    if (designated.empty()) {
      std::cout << "drift check: no designated channels (use --split)\n";
    } else {
      auto rep = qmr::check_drift_reduction(gen, omega, designated, tolerance);
      std::cout << "dim O0 = " << rep.o0.dim() << "\n"
                << "drift invariance: " << (rep.holds ? "holds" : "fails")
                << " (residual " << rep.max_residual << ")";
      if (!rep.holds)
        std::cout << "; on alg(O0): "
                  << (rep.holds_on_algebra ? "holds" : "fails") << " (residual "
                  << rep.max_algebra_residual << ")";
      std::cout << "\n";
    }
  }
  return kExitOk;
}

int cmd_gen_central_spin(int n_bath, std::uint64_t seed,
                         const std::string& bath_flip,
                         const std::string& out_path) {
  qmr::CentralSpinParams p = qmr::random_central_spin(n_bath, seed);
  auto gen = qmr::central_spin_generator(p);
  if (bath_flip == "single") {
    gen.channels.push_back({qmr::ChannelKind::dissipator,
                            qmr::site_pauli('x', 1, p.n_qubits()), "bath_flip",
                            {0.0, std::numeric_limits<double>::infinity()}});
  } else if (bath_flip == "collective") {
    qmr::Matrix sum = qmr::Matrix::Zero(p.dim(), p.dim());
    for (int k = 1; k <= n_bath; ++k) sum += qmr::site_pauli('x', k, p.n_qubits());
    gen.channels.push_back({qmr::ChannelKind::dissipator, sum,
                            "bath_flip_collective",
                            {0.0, std::numeric_limits<double>::infinity()}});
  } else if (bath_flip != "none") {
    throw qmr::ValidationError("--bath-flip must be none, single or collective");
  }
  qmr::json j = qmr::model_to_json(gen);
  j["observables"] = qmr::observables_to_json(qmr::central_spin_observables(p));
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    qmr::save_json(out_path, j);
  std::cout << "central-spin model: N = " << n_bath << ", dim = " << p.dim()
            << ", channels = " << gen.channels.size() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact model reduction of controlled Lindblad dynamics"};
  app.require_subcommand(1);

  std::string model_path, obs_path, out_path, report_path, sched_path,
      state_path, reduced_path;
  std::string path_name = "auto", props = "34", split, bath_flip = "none";
  double tolerance = qmr::tol::num, rel_tol = 1e-8;
  std::uint64_t seed = 0;
  int num_schedules = 3, num_states = 3, segments = 20, n_bath = 2;

  auto* reduce = app.add_subcommand("reduce", "Compute a certified reduced model");
  reduce->add_option("model", model_path)->required();
  reduce->add_option("--obs", obs_path);
  reduce->add_option("--path", path_name)->check(CLI::IsMember({"auto", "frame", "drift"}));
  reduce->add_option("--tol", tolerance);
  reduce->add_option("--seed", seed);
  reduce->add_option("--out", out_path);
  reduce->add_option("--report", report_path);

  auto* simulate = app.add_subcommand("simulate", "Propagate expectation trajectories");
  simulate->add_option("model", model_path)->required();
  simulate->add_option("--schedule", sched_path)->required();
  simulate->add_option("--state", state_path)->required();
  simulate->add_option("--obs", obs_path);
  simulate->add_option("--out", out_path);

  auto* compare = app.add_subcommand("compare", "Full-vs-reduced trajectory comparison");
  compare->add_option("model", model_path)->required();
  compare->add_option("reduced", reduced_path)->required();
  compare->add_option("--obs", obs_path);
  compare->add_option("--schedules", num_schedules);
  compare->add_option("--states", num_states);
  compare->add_option("--segments", segments);
  compare->add_option("--seed", seed);
  compare->add_option("--rel-tol", rel_tol);

  auto* check = app.add_subcommand("check", "Reducibility checks (frame algebra, drift invariance)");
  check->add_option("model", model_path)->required();
  check->add_option("--obs", obs_path);
  check->add_option("--props", props);
  check->add_option("--split", split);
  check->add_option("--tol", tolerance);

  auto* gencs = app.add_subcommand("gen-central-spin", "Emit a central-spin benchmark model");
  gencs->add_option("--n", n_bath)->required();
  gencs->add_option("--seed", seed);
  gencs->add_option("--bath-flip", bath_flip)->check(CLI::IsMember({"none", "single", "collective"}));
  gencs->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed == 0) seed = default_seed();
    if (reduce->parsed())
      return cmd_reduce(model_path, obs_path, path_name, tolerance, seed,
                        out_path, report_path);
    if (simulate->parsed())
      return cmd_simulate(model_path, sched_path, state_path, obs_path, out_path);
    if (compare->parsed())
      return cmd_compare(model_path, reduced_path, obs_path, num_schedules,
                         num_states, segments, seed, rel_tol);
    if (check->parsed())
      return cmd_check(model_path, obs_path, props, split, tolerance);
    if (gencs->parsed())
      return cmd_gen_central_spin(n_bath, seed, bath_flip, out_path);
  } catch (const qmr::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
