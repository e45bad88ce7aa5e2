#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qmr/central_spin.hpp"

namespace qmr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON formats (see docs/formats.md). Complex scalars are [re, im]; matrices
// are row-major nested arrays of complex scalars, or {"pauli": [...]} sums of
// Pauli strings with real coefficients. All documents carry format_version 1.
// ---------------------------------------------------------------------------

inline constexpr int kFormatVersion = 1;

namespace io_detail {

inline json complex_to_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  throw ValidationError(where + ": expected number or [re, im] pair");
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (j.is_object() && j.contains("pauli")) {
    const json& terms = j["pauli"];
    if (!terms.is_array() || terms.empty())
      throw ValidationError(where + ": 'pauli' must be a nonempty array");
    Matrix out;
    for (const auto& term : terms) {
      if (!term.is_object() || !term.contains("string") || !term.contains("coeff"))
        throw ValidationError(where + ": each pauli term needs 'string' and 'coeff'");
      Matrix p = pauli_string(term["string"].get<std::string>());
      Complex c = complex_from_json(term["coeff"], where + ".coeff");
      if (out.size() == 0)
        out = c * p;
      else {
        if (out.rows() != p.rows())
          throw ValidationError(where + ": inconsistent pauli string lengths");
        out += c * p;
      }
    }
    return out;
  }
  if (!j.is_array() || j.empty())
    throw ValidationError(where + ": expected nonempty matrix (array of rows)");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(where + ": ragged matrix rows");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = complex_from_json(row[static_cast<std::size_t>(k)],
                                  where + "[" + std::to_string(i) + "]");
  }
  return m;
}

inline double interval_bound(const json& j, const std::string& where) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ValidationError(where + ": bound string must be 'inf', '+inf' or '-inf'");
  }
  if (j.is_number()) return j.get<double>();
  throw ValidationError(where + ": expected number or infinity string");
}

inline json interval_to_json(const Interval& d) {
  auto bound = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  return json::array({bound(d.lo), bound(d.hi)});
}

inline void expect_version(const json& j, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
      j["format_version"].get<int>() != kFormatVersion)
    throw ValidationError(what + ": missing or unsupported format_version (expected " +
                          std::to_string(kFormatVersion) + ")");
}

}  // namespace io_detail

// ------------------------------- model --------------------------------------

inline json model_to_json(const ControlledLindbladGenerator& gen) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "controlled_lindblad_model";
  j["dim"] = gen.dim_h;
  j["hamiltonian"] = io_detail::matrix_to_json(gen.h0);
  j["noise"] = json::array();
  for (const auto& l : gen.noise_drift) j["noise"].push_back(io_detail::matrix_to_json(l));
  j["channels"] = json::array();
  for (const auto& ch : gen.channels) {
    json c;
    c["kind"] = ch.kind == ChannelKind::hamiltonian ? "hamiltonian" : "dissipator";
    c["label"] = ch.label;
    c["operator"] = io_detail::matrix_to_json(ch.op);
    c["coefficient_domain"] = io_detail::interval_to_json(ch.coefficient_domain);
    j["channels"].push_back(std::move(c));
  }
  return j;
}

inline ControlledLindbladGenerator model_from_json(const json& j) {
  io_detail::expect_version(j, "model");
  if (!j.contains("hamiltonian")) throw ValidationError("model: missing 'hamiltonian'");
  ControlledLindbladGenerator gen;
  gen.h0 = io_detail::matrix_from_json(j["hamiltonian"], "model.hamiltonian");
  gen.dim_h = gen.h0.rows();
  if (j.contains("dim") && j["dim"].get<Eigen::Index>() != gen.dim_h)
    throw ValidationError("model: 'dim' disagrees with the Hamiltonian size");
  if (j.contains("noise"))
    for (std::size_t k = 0; k < j["noise"].size(); ++k)
      gen.noise_drift.push_back(io_detail::matrix_from_json(
          j["noise"][k], "model.noise[" + std::to_string(k) + "]"));
  if (j.contains("channels"))
    for (std::size_t l = 0; l < j["channels"].size(); ++l) {
      const json& c = j["channels"][l];
      const std::string where = "model.channels[" + std::to_string(l) + "]";
      if (!c.is_object() || !c.contains("kind") || !c.contains("operator"))
        throw ValidationError(where + ": needs 'kind' and 'operator'");
      ControlChannel ch;
      std::string kind = c["kind"].get<std::string>();
      if (kind == "hamiltonian")
        ch.kind = ChannelKind::hamiltonian;
      else if (kind == "dissipator")
        ch.kind = ChannelKind::dissipator;
      else
        throw ValidationError(where + ": kind must be 'hamiltonian' or 'dissipator'");
      ch.op = io_detail::matrix_from_json(c["operator"], where + ".operator");
      if (c.contains("label")) ch.label = c["label"].get<std::string>();
      if (c.contains("coefficient_domain")) {
        const json& d = c["coefficient_domain"];
        if (!d.is_array() || d.size() != 2)
          throw ValidationError(where + ": coefficient_domain must be [lo, hi]");
        ch.coefficient_domain.lo = io_detail::interval_bound(d[0], where + ".lo");
        ch.coefficient_domain.hi = io_detail::interval_bound(d[1], where + ".hi");
      } else if (ch.kind == ChannelKind::dissipator) {
        ch.coefficient_domain = {0.0, std::numeric_limits<double>::infinity()};
      }
      gen.channels.push_back(std::move(ch));
    }
  gen.validate();
  return gen;
}

// ---------------------------- observables -----------------------------------

inline json observables_to_json(
    const std::vector<std::pair<std::string, Operator>>& obs) {
  json arr = json::array();
  for (const auto& [label, o] : obs) {
    json e;
    e["label"] = label;
    e["operator"] = io_detail::matrix_to_json(o);
    arr.push_back(std::move(e));
  }
  return arr;
}

inline std::vector<std::pair<std::string, Operator>> observables_from_json(
    const json& j) {
  if (!j.is_array() || j.empty())
    throw ValidationError("observables: expected a nonempty array");
  std::vector<std::pair<std::string, Operator>> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string where = "observables[" + std::to_string(k) + "]";
    const json& e = j[k];
    if (!e.is_object() || !e.contains("operator"))
      throw ValidationError(where + ": needs 'operator'");
    std::string label = e.contains("label") ? e["label"].get<std::string>()
                                            : "O" + std::to_string(k);
    Matrix o = io_detail::matrix_from_json(e["operator"], where + ".operator");
    require_square(o, where);
    if (!is_hermitian(o)) throw ValidationError(where + ": not self-adjoint");
    out.emplace_back(std::move(label), std::move(o));
  }
  return out;
}

// ------------------------------ state ---------------------------------------

inline json state_to_json(const Matrix& rho) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "density_matrix";
  j["rho"] = io_detail::matrix_to_json(rho);
  return j;
}

inline Matrix state_from_json(const json& j) {
  io_detail::expect_version(j, "state");
  if (!j.contains("rho")) throw ValidationError("state: missing 'rho'");
  Matrix rho = io_detail::matrix_from_json(j["rho"], "state.rho");
  validate_density(rho);
  return rho;
}

// ----------------------------- schedule -------------------------------------

inline json schedule_to_json(const ControlSchedule& sched) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "control_schedule";
  j["samples_per_segment"] = sched.samples_per_segment;
  j["segments"] = json::array();
  for (const auto& s : sched.segments) {
    json e;
    e["duration"] = s.duration;
    e["u"] = std::vector<double>(s.u.data(), s.u.data() + s.u.size());
    j["segments"].push_back(std::move(e));
  }
  return j;
}

inline ControlSchedule schedule_from_json(const json& j) {
  io_detail::expect_version(j, "schedule");
  if (!j.contains("segments") || !j["segments"].is_array() || j["segments"].empty())
    throw ValidationError("schedule: missing nonempty 'segments'");
  ControlSchedule sched;
  if (j.contains("samples_per_segment"))
    sched.samples_per_segment = j["samples_per_segment"].get<int>();
  for (std::size_t s = 0; s < j["segments"].size(); ++s) {
    const json& e = j["segments"][s];
    const std::string where = "schedule.segments[" + std::to_string(s) + "]";
    if (!e.is_object() || !e.contains("duration") || !e.contains("u"))
      throw ValidationError(where + ": needs 'duration' and 'u'");
    ScheduleSegment seg;
    seg.duration = e["duration"].get<double>();
    auto uv = e["u"].get<std::vector<double>>();
    seg.u = Eigen::Map<RealVector>(uv.data(), static_cast<Eigen::Index>(uv.size()));
    sched.segments.push_back(std::move(seg));
  }
  return sched;
}

// --------------------------- reduced model ----------------------------------

inline json reduced_part_to_json(const ReducedGeneratorPart& part) {
  json j;
  j["hamiltonian"] = io_detail::matrix_to_json(part.hamiltonian);
  j["noise"] = json::array();
  for (const auto& l : part.noise_ops) j["noise"].push_back(io_detail::matrix_to_json(l));
  j["agreement_residual"] = part.agreement_residual;
  j["min_cp_eigenvalue"] = part.min_cp_eigenvalue;
  return j;
}

inline ReducedGeneratorPart reduced_part_from_json(const json& j,
                                                   const std::string& where) {
  ReducedGeneratorPart part;
  part.hamiltonian = io_detail::matrix_from_json(j.at("hamiltonian"), where);
  for (const auto& l : j.at("noise"))
    part.noise_ops.push_back(io_detail::matrix_from_json(l, where + ".noise"));
  part.agreement_residual = j.value("agreement_residual", 0.0);
  part.min_cp_eigenvalue = j.value("min_cp_eigenvalue", 0.0);
  part.cp_ok = part.min_cp_eigenvalue >= -tol::psd;
  return part;
}

inline json reduced_model_to_json(const ReducedModel& model) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "reduced_lindblad_model";
  j["dim_full"] = model.maps.dim_full();
  j["dim_reduced"] = model.dim_reduced();
  j["reduction_achieved"] = model.reduction_achieved;
  j["all_certificates_pass"] = model.all_certificates_pass;

  json blocks = json::array();
  for (const auto& b : model.maps.wedderburn.blocks)
    blocks.push_back(json{{"dF", b.dF}, {"dG", b.dG}});
  j["blocks"] = std::move(blocks);
  j["unitary"] = io_detail::matrix_to_json(model.maps.wedderburn.u);

  j["drift"] = reduced_part_to_json(model.drift);
  j["channels"] = json::array();
  for (const auto& ch : model.channels) {
    json c;
    c["kind"] = ch.kind == ChannelKind::hamiltonian ? "hamiltonian" : "dissipator";
    c["label"] = ch.label;
    c["coefficient_domain"] = io_detail::interval_to_json(ch.coefficient_domain);
    c["part"] = reduced_part_to_json(ch.part);
    j["channels"].push_back(std::move(c));
  }
  j["observables"] = json::array();
  for (const auto& [label, o] : model.observables) {
    json e;
    e["label"] = label;
    e["operator"] = io_detail::matrix_to_json(o);
    j["observables"].push_back(std::move(e));
  }
  json certs = json::array();
  for (const auto& c : model.certificates) {
    json e;
    e["u"] = std::vector<double>(c.u.data(), c.u.data() + c.u.size());
    e["unitality_residual"] = c.unitality_residual;
    e["min_cp_eigenvalue"] = c.min_cp_eigenvalue;
    e["agreement_residual"] = c.agreement_residual;
    e["global_certificate"] = c.global_certificate;
    e["passes"] = c.passes;
    certs.push_back(std::move(e));
  }
  j["certificates"] = std::move(certs);
  return j;
}

inline ReducedModel reduced_model_from_json(const json& j) {
  io_detail::expect_version(j, "reduced model");
  ReducedModel model;
  WedderburnStructure ws;
  ws.u = io_detail::matrix_from_json(j.at("unitary"), "reduced.unitary");
  ws.dim_h = ws.u.rows();
  for (const auto& b : j.at("blocks"))
    ws.blocks.push_back({b.at("dF").get<Eigen::Index>(), b.at("dG").get<Eigen::Index>()});
  model.maps = build_reduction_maps(ws);
  model.reduction_achieved = j.value("reduction_achieved", true);
  model.all_certificates_pass = j.value("all_certificates_pass", false);
  model.drift = reduced_part_from_json(j.at("drift"), "reduced.drift");
  for (const auto& c : j.at("channels")) {
    ReducedChannel ch;
    std::string kind = c.at("kind").get<std::string>();
    ch.kind = kind == "hamiltonian" ? ChannelKind::hamiltonian : ChannelKind::dissipator;
    ch.label = c.value("label", "");
    const json& d = c.at("coefficient_domain");
    ch.coefficient_domain.lo = io_detail::interval_bound(d.at(0), "reduced.domain.lo");
    ch.coefficient_domain.hi = io_detail::interval_bound(d.at(1), "reduced.domain.hi");
    ch.part = reduced_part_from_json(c.at("part"), "reduced.channel");
    model.channels.push_back(std::move(ch));
  }
  for (const auto& e : j.at("observables"))
    model.observables.emplace_back(
        e.value("label", ""),
        io_detail::matrix_from_json(e.at("operator"), "reduced.observable"));
  return model;
}

// ---------------------------- trajectories ----------------------------------

inline json trajectory_to_json(const Trajectory& traj,
                               const std::vector<std::string>& labels) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "trajectory";
  j["times"] = traj.times;
  j["wall_seconds"] = traj.wall_seconds;
  json series = json::array();
  for (std::size_t o = 0; o < traj.values.size(); ++o) {
    json e;
    e["label"] = o < labels.size() ? labels[o] : "O" + std::to_string(o);
    e["values"] = traj.values[o];
    series.push_back(std::move(e));
  }
  j["series"] = std::move(series);
  return j;
}

// ------------------------------- files --------------------------------------

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": JSON parse error: " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace qmr
