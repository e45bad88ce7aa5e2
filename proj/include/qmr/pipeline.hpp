#pragma once

#include "qmr/model_io.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// End-to-end reduction pipeline: observable space -> *-algebra -> Wedderburn
// -> reduction maps -> certified reduced generator, with a reduction report.
// ---------------------------------------------------------------------------

enum class ReductionPath { automatic, frame, drift };

inline std::string to_string(ReductionPath p) {
  switch (p) {
    case ReductionPath::automatic: return "auto";
    case ReductionPath::frame: return "frame";
    case ReductionPath::drift: return "drift";
  }
  return "?";
}

struct PipelineOptions {
  ReductionPath path = ReductionPath::automatic;
  double tolerance = tol::num;
  std::uint64_t seed = 1;
  ReductionOptions reduction;
  // Channel indices treated as the controlled perturbation for the drift
  // path; empty means "all dissipator channels".
  std::vector<Eigen::Index> drift_designated;
};

struct PipelineResult {
  ReducedModel model;
  OperatorSubspace observable_space;   // O (or O_0 on the drift path)
  OperatorSubspace algebra;            // the algebra reduced onto
  ObservableSpaceReport krylov_report;
  ProjectorReport projector_report;
  Eigen::Index dim_frame = 0;          // dim of the frame algebra F
  Eigen::Index dim_observable = 0;
  Eigen::Index dim_algebra = 0;
  std::string path_used;               // "alg(O)", "F", or "alg(O0)"
  bool drift_path_holds = false;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

inline std::vector<Eigen::Index> default_designated(
    const ControlledLindbladGenerator& gen) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index l = 0; l < gen.num_controls(); ++l)
    if (gen.channels[static_cast<std::size_t>(l)].kind == ChannelKind::dissipator)
      out.push_back(l);
  return out;
}

inline PipelineResult reduce_model(const ControlledLindbladGenerator& gen,
                                   const std::vector<Operator>& omega,
                                   const PipelineOptions& opt = {}) {
  auto t0 = std::chrono::steady_clock::now();
  gen.validate();
  require(!omega.empty(), "reduce_model: no target observables");
  PipelineResult res;
  OperatorSubspace omega_space = orthonormalize(omega, opt.tolerance);
  require(omega_space.dim_h == gen.dim_h, "reduce_model: dimension mismatch");

  OperatorSubspace frame = frame_algebra(gen, omega_space, opt.tolerance);
  res.dim_frame = frame.dim();

  switch (opt.path) {
    case ReductionPath::frame: {
      // Frame-algebra route: cheap invariant algebra, possibly larger.
      res.krylov_report = observable_space(gen, omega_space, opt.tolerance);
      res.observable_space = res.krylov_report.space;
      res.algebra = frame;
      res.path_used = "F";
      break;
    }
    case ReductionPath::drift: {
      auto designated = opt.drift_designated.empty() ? default_designated(gen)
                                                     : opt.drift_designated;
      DriftReductionReport drift =
          check_drift_reduction(gen, omega_space, designated, opt.tolerance);
      res.drift_path_holds = drift.holds || drift.holds_on_algebra;
      if (!res.drift_path_holds)
        throw ValidationError(
            "drift path requested but the designated channels do not leave "
            "the drift observable space (or its algebra) invariant");
      res.observable_space = drift.o0;
      res.algebra = algebra_closure(drift.o0, opt.tolerance);
      res.path_used = "alg(O0)";
      break;
    }
    case ReductionPath::automatic: {
      // Try the drift-invariance route first; fall back to alg(O).
      auto designated = opt.drift_designated.empty() ? default_designated(gen)
                                                     : opt.drift_designated;
      if (!designated.empty()) {
        DriftReductionReport drift =
            check_drift_reduction(gen, omega_space, designated, opt.tolerance);
        res.drift_path_holds = drift.holds || drift.holds_on_algebra;
        if (res.drift_path_holds) {
          res.observable_space = drift.o0;
          res.algebra = algebra_closure(drift.o0, opt.tolerance);
          res.path_used = "alg(O0)";
        }
      }
      if (res.path_used.empty()) {
        res.krylov_report = observable_space(gen, omega_space, opt.tolerance);
        if (!res.krylov_report.converged)
          throw ConvergenceError("observable-space iteration did not converge");
        res.observable_space = res.krylov_report.space;
        res.algebra = algebra_closure(res.observable_space, opt.tolerance);
        res.path_used = "alg(O)";
      }
      break;
    }
  }
  res.dim_observable = res.observable_space.dim();
  res.dim_algebra = res.algebra.dim();

  WedderburnStructure ws = wedderburn(res.algebra, tol::structure, opt.seed);
  ReductionMaps maps = build_reduction_maps(ws);
  if (maps.dim_reduced == gen.dim_h && maps.num_blocks() <= 1)
    res.warnings.push_back("no reduction achieved: reduced dimension equals n");

  res.projector_report = verify_projector(maps, res.algebra, &res.observable_space);
  if (!res.projector_report.ok())
    throw ValidationError("projector certificate failed");

  ReductionOptions ropt = opt.reduction;
  ropt.seed = opt.seed;
  res.model = reduce_generator(gen, maps, omega_space, ropt);
  // Attach the raw (un-orthonormalized) targets as the reduced observables.
  res.model.observables.clear();
  for (std::size_t k = 0; k < omega.size(); ++k)
    res.model.observables.emplace_back("O" + std::to_string(k),
                                       map_R(maps, omega[k]));

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline json pipeline_report_to_json(const PipelineResult& res,
                                    const ControlledLindbladGenerator& gen) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "reduction_report";
  j["dim_full"] = gen.dim_h;
  j["dim_reduced"] = res.model.dim_reduced();
  j["dim_observable_space"] = res.dim_observable;
  j["dim_algebra"] = res.dim_algebra;
  j["dim_frame_algebra"] = res.dim_frame;
  j["path"] = res.path_used;
  j["drift_path_holds"] = res.drift_path_holds;
  json blocks = json::array();
  for (const auto& b : res.model.maps.wedderburn.blocks)
    blocks.push_back(json{{"dF", b.dF}, {"dG", b.dG}});
  j["blocks"] = std::move(blocks);
  j["projector"] = {
      {"idempotence", res.projector_report.idempotence},
      {"unitality", res.projector_report.unitality},
      {"self_adjointness", res.projector_report.self_adjointness},
      {"choi_min_eigenvalue", res.projector_report.projector_choi_min},
      {"image_defect", res.projector_report.image_defect},
      {"ok", res.projector_report.ok()}};
  j["all_certificates_pass"] = res.model.all_certificates_pass;
  j["warnings"] = res.warnings;
  j["wall_seconds"] = res.wall_seconds;
  return j;
}

}  // namespace qmr
