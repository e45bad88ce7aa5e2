#pragma once

#include <chrono>
#include <map>

#include <unsupported/Eigen/MatrixFunctions>

#include "qmr/reduction.hpp"

namespace qmr {

// ---------------------------------------------------------------------------
// Piecewise-constant control schedules and Heisenberg-picture propagation by
// exact matrix exponentials of the vectorized generator.
// ---------------------------------------------------------------------------

struct ScheduleSegment {
  double duration = 0.0;
  RealVector u;
};

struct ControlSchedule {
  std::vector<ScheduleSegment> segments;
  // Evenly spaced output times within each segment (including its endpoint).
  int samples_per_segment = 8;

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration;
    return t;
  }
  void validate(Eigen::Index num_controls) const {
    require(!segments.empty(), "schedule: at least one segment required");
    for (const auto& s : segments) {
      require(s.duration >= 0.0 && std::isfinite(s.duration),
              "schedule: segment durations must be finite and nonnegative");
      require(s.u.size() == num_controls,
              "schedule: control vector size mismatch");
    }
    require(samples_per_segment >= 1, "schedule: samples_per_segment >= 1");
  }
};

struct Trajectory {
  std::vector<double> times;
  // values[o][t] = <O_o(t)> for observable o at times[t].
  std::vector<std::vector<double>> values;
  double wall_seconds = 0.0;
};

namespace detail {

/// Per-segment Heisenberg step operators e^{L_u * dt} on coefficient vectors,
/// cached across calls with identical (segment, generator) data.
class SegmentPropagator {
 public:
  SegmentPropagator(const AffineSuperoperators& affine,
                    const ControlSchedule& schedule)
      : affine_(affine), schedule_(schedule) {}

  // Step operator for substep `dt` of segment `seg`.
  const Matrix& step(std::size_t seg, double dt) {
    auto key = std::make_pair(seg, dt);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Matrix gen = affine_.at(schedule_.segments[seg].u).mat;
    Matrix e = (gen * dt).exp();
    return cache_.emplace(key, std::move(e)).first->second;
  }

 private:
  const AffineSuperoperators& affine_;
  const ControlSchedule& schedule_;
  std::map<std::pair<std::size_t, double>, Matrix> cache_;
};

}  // namespace detail

/// Heisenberg trajectories <O(t)> = tr(rho * e^{L_{u_1} t_1}...(O)) for each
/// observable, sampled on a uniform grid within each schedule segment.
inline Trajectory expectation_trajectory(const AffineSuperoperators& affine,
                                         const Matrix& rho,
                                         const std::vector<Operator>& observables,
                                         const ControlSchedule& schedule) {
  require(!observables.empty(), "trajectory: no observables given");
  const Eigen::Index n = observables.front().rows();
  require(rho.rows() == n && rho.cols() == n, "trajectory: state dim mismatch");
  schedule.validate(static_cast<Eigen::Index>(affine.channel_parts.size()));

  auto t0 = std::chrono::steady_clock::now();
  Trajectory traj;
  traj.values.resize(observables.size());

  // Heisenberg evolution is time-ordered from the state side: the operator at
  // time t within segment s is e^{L_1 t_1} ... e^{L_{s-1} t_{s-1}} e^{L_s dt}
  // applied to O, so we track the accumulated row map acting on vec(O).
  std::vector<Vector> obs_vec;
  for (const auto& o : observables) {
    require(o.rows() == n && o.cols() == n, "trajectory: observable dim mismatch");
    obs_vec.push_back(vec(o));
  }
  Vector rho_vec = vec(Matrix(rho.adjoint()));  // tr(rho X) = <vec(rho), vec(X)>

  detail::SegmentPropagator props(affine, schedule);

  traj.times.push_back(0.0);
  for (std::size_t o = 0; o < observables.size(); ++o)
    traj.values[o].push_back((rho_vec.adjoint() * obs_vec[o]).value().real());

  // <O(t)> = <(M_1...M_s)^dag vec(rho^dag), vec(O)> with M_j the Heisenberg
  // segment exponentials, so the running state-side vector absorbs one
  // adjoint step per substep.
  Vector w = rho_vec;
  double t = 0.0;
  for (std::size_t s = 0; s < schedule.segments.size(); ++s) {
    const double dur = schedule.segments[s].duration;
    if (dur == 0.0) continue;
    const int steps = schedule.samples_per_segment;
    const double dt = dur / steps;
    Matrix e_dag = props.step(s, dt).adjoint();
    for (int q = 1; q <= steps; ++q) {
      w = e_dag * w;
      traj.times.push_back(t + q * dt);
      for (std::size_t o = 0; o < observables.size(); ++o)
        traj.values[o].push_back((w.adjoint() * obs_vec[o]).value().real());
    }
    t += dur;
  }
  traj.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return traj;
}

inline Trajectory expectation_trajectory(const ControlledLindbladGenerator& gen,
                                         const Matrix& rho,
                                         const std::vector<Operator>& observables,
                                         const ControlSchedule& schedule) {
  return expectation_trajectory(affine_superoperators(gen), rho, observables,
                                schedule);
}

/// Reduced-side trajectory: propagates rho_check = J^dag(rho) against the
/// reduced observables under the reduced generator.
inline Trajectory reduced_expectation_trajectory(const ReducedModel& model,
                                                 const Matrix& rho,
                                                 const ControlSchedule& schedule) {
  std::vector<Operator> obs;
  for (const auto& [label, o] : model.observables) obs.push_back(o);
  return expectation_trajectory(model.affine_superoperators(),
                                map_state(model.maps, rho), obs, schedule);
}

// ---------------------------------------------------------------------------
// Full-versus-reduced comparison.
// ---------------------------------------------------------------------------

struct ComparisonReport {
  Trajectory full;
  Trajectory reduced;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passes = false;
  double speedup = 0.0;  // full wall time / reduced wall time
};

inline ComparisonReport compare_full_reduced(
    const ControlledLindbladGenerator& gen, const ReducedModel& model,
    const std::vector<Operator>& observables, const Matrix& rho,
    const ControlSchedule& schedule, double rel_tol = 1e-8) {
  require(observables.size() == model.observables.size(),
          "compare: observable count mismatch with reduced model");
  ComparisonReport rep;
  rep.full = expectation_trajectory(gen, rho, observables, schedule);
  rep.reduced = reduced_expectation_trajectory(model, rho, schedule);

  double scale = 0.0;
  for (const auto& o : observables) scale = std::max(scale, o.cwiseAbs().maxCoeff());
  rep.tolerance = rel_tol * (1.0 + scale);
  for (std::size_t o = 0; o < rep.full.values.size(); ++o)
    for (std::size_t i = 0; i < rep.full.values[o].size(); ++i)
      rep.max_deviation = std::max(
          rep.max_deviation,
          std::abs(rep.full.values[o][i] - rep.reduced.values[o][i]));
  rep.passes = rep.max_deviation <= rep.tolerance;
  rep.speedup = rep.reduced.wall_seconds > 0.0
                    ? rep.full.wall_seconds / rep.reduced.wall_seconds
                    : 0.0;
  return rep;
}

}  // namespace qmr
