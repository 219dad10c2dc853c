#include "rdv/report_io.hpp"

#include "yaml_util.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace rdv {

std::string dump_report(const SynthesisReport& r) {
  YAML::Emitter out;
  yaml::configure(out);
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << r.kind;
  out << YAML::Key << "status" << YAML::Value << sdp::to_string(r.status);
  out << YAML::Key << "bound_name" << YAML::Value << r.bound_name;
  out << YAML::Key << "bound" << YAML::Value << r.bound;
  if (r.bound_name == "gamma") out << YAML::Key << "gamma_min" << YAML::Value << r.gamma_min;
  out << YAML::Key << "iterations" << YAML::Value << r.iterations;
  out << YAML::Key << "solve_seconds" << YAML::Value << r.solve_seconds;
  if (r.has_gain()) {
    out << YAML::Key << "epsilon" << YAML::Value << r.epsilon;
    out << YAML::Key << "K" << YAML::Value;
    yaml::emit_matrix(out, r.K);
    out << YAML::Key << "X" << YAML::Value;
    yaml::emit_matrix(out, r.X);
    out << YAML::Key << "Y" << YAML::Value;
    yaml::emit_matrix(out, r.Y);
    const auto& v = r.verification;
    out << YAML::Key << "verification" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "spectral_abscissa_nominal" << YAML::Value << v.nominal_abscissa;
    out << YAML::Key << "spectral_abscissa_worst" << YAML::Value << v.worst_abscissa;
    out << YAML::Key << "worst_mean_anomaly_rad" << YAML::Value << v.worst_mean_anomaly;
    out << YAML::Key << "mean_anomaly_samples" << YAML::Value << v.samples;
    out << YAML::Key << "pre_schur_max_eigenvalue" << YAML::Value << v.pre_schur_max_eigenvalue;
    out << YAML::Key << "lmi_residuals" << YAML::Value << YAML::BeginMap;
    for (const auto& [label, value] : v.lmi_residuals) out << YAML::Key << label << YAML::Value << value;
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::Key << "warnings" << YAML::Value << YAML::BeginSeq;
  for (const auto& w : r.warnings) out << w;
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string dump_gains(const GainSet& gains) {
  YAML::Emitter out;
  yaml::configure(out);
  out << YAML::BeginMap;
  for (const auto& [name, K] : gains) {
    out << YAML::Key << name << YAML::Value;
    yaml::emit_matrix(out, K);
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

GainSet parse_gains(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("gains: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("gains: expected a mapping of names to matrices");
  GainSet g;
  for (const auto& kv : root) {
    const auto name = kv.first.as<std::string>();
    g[name] = yaml::as_matrix(kv.second, "gains." + name);
  }
  return g;
}

GainSet load_gains(const std::filesystem::path& path) { return parse_gains(read_file(path)); }

Mat36 gain_3x6(const GainSet& gains, const std::string& key) {
  const auto it = gains.find(key);
  if (it == gains.end()) throw ConfigError("gains: no entry '" + key + "'");
  if (it->second.rows() != 3 || it->second.cols() != 6) throw ConfigError("gains: '" + key + "' must be 3x6");
  if (!it->second.allFinite()) throw ConfigError("gains: '" + key + "' must be finite");
  return it->second;
}

std::string dump_min_thrust(const MinThrustResult& r) {
  YAML::Emitter out;
  yaml::configure(out);
  out << YAML::BeginMap;
  out << YAML::Key << "min_feasible_thrust_N" << YAML::Value << r.u_min;
  out << YAML::Key << "monotone" << YAML::Value << r.monotone();
  out << YAML::Key << "probes" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : r.probes) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "u_max_N" << YAML::Value << p.u_max;
    out << YAML::Key << "feasible" << YAML::Value << p.feasible;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string dump_comparison(const CostComparison& c, const std::string& label_a, const std::string& label_b) {
  YAML::Emitter out;
  yaml::configure(out);
  out << YAML::BeginMap;
  out << YAML::Key << "a" << YAML::Value << label_a;
  out << YAML::Key << "b" << YAML::Value << label_b;
  out << YAML::Key << "terminal_J_total_a" << YAML::Value << c.terminal_a;
  out << YAML::Key << "terminal_J_total_b" << YAML::Value << c.terminal_b;
  out << YAML::Key << "lower" << YAML::Value << (c.a_lower ? label_a : label_b);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw std::runtime_error("cannot write " + tmp.string());
    o << content;
    if (!o) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rdv
