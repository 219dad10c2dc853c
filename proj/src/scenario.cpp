#include "rdv/scenario.hpp"

#include "yaml_util.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rdv {

namespace {

using yaml::as_double;
using yaml::check_keys;
using yaml::require;

double number(const YAML::Node& node, const std::string& where, const char* key) {
  return as_double(require(node, where, key), where + "." + key);
}

Eigen::MatrixXd weight(const YAML::Node& v, const std::string& where, Eigen::Index dim) {
  if (v.IsScalar() && v.as<std::string>() == "identity") return Eigen::MatrixXd::Identity(dim, dim);
  if (dim == 1 && v.IsScalar()) return Eigen::MatrixXd::Constant(1, 1, as_double(v, where));
  Eigen::MatrixXd M = yaml::as_matrix(v, where);
  if (M.rows() != dim || M.cols() != dim)
    throw ConfigError(where + ": expected " + std::to_string(dim) + "x" + std::to_string(dim));
  return M;
}

void emit_weight(YAML::Emitter& out, const Eigen::MatrixXd& M) {
  if (M.isIdentity(0.0))
    out << "identity";
  else if (M.size() == 1)
    out << M(0, 0);
  else
    yaml::emit_matrix(out, M);
}

template <class E>
E parse_enum(const YAML::Node& v, const std::string& where, std::initializer_list<E> options) {
  const auto s = v.as<std::string>();
  for (E e : options)
    if (s == to_string(e)) return e;
  throw ConfigError(where + ": unknown value '" + s + "'");
}

}  // namespace

void Scenario::validate() const {
  orbit.validate();
  chaser.validate();
  if (!x0.finite()) throw ConfigError("initial_state must be finite");
  disturbance.validate();
  sim.validate();
  auto psd = [](const Eigen::MatrixXd& M, const char* name) {
    if (!M.allFinite() || !M.isApprox(M.transpose(), 1e-12))
      throw ConfigError(std::string(name) + " must be finite and symmetric");
    if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff() <= 0.0)
      throw ConfigError(std::string(name) + " must be positive definite");
  };
  psd(Q_p, "Q_p");
  psd(R_p, "R_p");
  psd(Q_q, "Q_q");
  if (!(R_q > 0.0) || !std::isfinite(R_q)) throw ConfigError("R_q must be positive");
}

Mat6 Scenario::Q() const {
  Mat6 Q = Mat6::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) Q(kInPlaneIdx[i], kInPlaneIdx[j]) = Q_p(i, j);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) Q(kOutOfPlaneIdx[i], kOutOfPlaneIdx[j]) = Q_q(i, j);
  return Q;
}

Mat3 Scenario::R() const {
  Mat3 R = Mat3::Zero();
  R.topLeftCorner<2, 2>() = R_p;
  R(2, 2) = R_q;
  return R;
}

Scenario Scenario::reference() {
  Scenario s;
  s.orbit = {kEarthMu, 7082.253e3, 0.05, 0.0};
  s.chaser = {500.0, 15.0, 15.0, 5.0};
  s.x0 = {-5000.0, 5000.0, 0.0, 5.0, -5.0, 0.0};
  s.disturbance.terms = {{4.3, 1.059e-3, 0.0}, {0.5, 0.1059, 0.0}};
  s.sim.duration = 10000.0;
  s.sim.step = 0.1;
  s.sim.record_every = 1.0;
  return s;
}

bool operator==(const Scenario& a, const Scenario& b) {
  auto same_terms = [&] {
    if (a.disturbance.terms.size() != b.disturbance.terms.size()) return false;
    for (size_t i = 0; i < a.disturbance.terms.size(); ++i) {
      const auto& x = a.disturbance.terms[i];
      const auto& y = b.disturbance.terms[i];
      if (x.amplitude != y.amplitude || x.omega != y.omega || x.phase != y.phase) return false;
    }
    return true;
  };
  // a is stored in km, so allow the conversion's rounding.
  const bool same_a =
      std::abs(a.orbit.a - b.orbit.a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(a.orbit.a);
  return a.orbit.mu == b.orbit.mu && same_a && a.orbit.e == b.orbit.e &&
         a.orbit.t_p == b.orbit.t_p && a.chaser.m == b.chaser.m && a.chaser.u_px_max == b.chaser.u_px_max &&
         a.chaser.u_py_max == b.chaser.u_py_max && a.chaser.u_q_max == b.chaser.u_q_max &&
         a.x0.vector() == b.x0.vector() && a.Q_p == b.Q_p && a.R_p == b.R_p && a.Q_q == b.Q_q && a.R_q == b.R_q &&
         same_terms() && a.sim.duration == b.sim.duration && a.sim.step == b.sim.step &&
         a.sim.record_every == b.sim.record_every && a.sim.integrator == b.sim.integrator &&
         a.sim.plant == b.sim.plant && a.sim.saturation == b.sim.saturation && a.sim.rel_tol == b.sim.rel_tol &&
         a.sim.abs_tol == b.sim.abs_tol;
}

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  check_keys(root, "scenario", {"orbit", "chaser", "initial_state", "weights", "disturbance", "simulation"});
  Scenario s;

  const YAML::Node orbit = require(root, "scenario", "orbit");
  check_keys(orbit, "orbit", {"mu_m3_per_s2", "a_km", "e", "t_p_s"});
  s.orbit.mu = orbit["mu_m3_per_s2"] ? number(orbit, "orbit", "mu_m3_per_s2") : kEarthMu;
  s.orbit.a = number(orbit, "orbit", "a_km") * 1e3;
  s.orbit.e = number(orbit, "orbit", "e");
  s.orbit.t_p = orbit["t_p_s"] ? number(orbit, "orbit", "t_p_s") : 0.0;

  const YAML::Node chaser = require(root, "scenario", "chaser");
  check_keys(chaser, "chaser", {"m_kg", "u_px_max_N", "u_py_max_N", "u_q_max_N"});
  s.chaser.m = number(chaser, "chaser", "m_kg");
  s.chaser.u_px_max = number(chaser, "chaser", "u_px_max_N");
  s.chaser.u_py_max = number(chaser, "chaser", "u_py_max_N");
  s.chaser.u_q_max = number(chaser, "chaser", "u_q_max_N");

  const YAML::Node x0 = require(root, "scenario", "initial_state");
  check_keys(x0, "initial_state", {"x_m", "y_m", "z_m", "vx_m_per_s", "vy_m_per_s", "vz_m_per_s"});
  s.x0 = {number(x0, "initial_state", "x_m"),        number(x0, "initial_state", "y_m"),
          number(x0, "initial_state", "z_m"),        number(x0, "initial_state", "vx_m_per_s"),
          number(x0, "initial_state", "vy_m_per_s"), number(x0, "initial_state", "vz_m_per_s")};

  if (const YAML::Node w = root["weights"]) {
    check_keys(w, "weights", {"Q_p", "R_p", "Q_q", "R_q"});
    if (w["Q_p"]) s.Q_p = weight(w["Q_p"], "weights.Q_p", 4);
    if (w["R_p"]) s.R_p = weight(w["R_p"], "weights.R_p", 2);
    if (w["Q_q"]) s.Q_q = weight(w["Q_q"], "weights.Q_q", 2);
    if (w["R_q"]) s.R_q = weight(w["R_q"], "weights.R_q", 1)(0, 0);
  }

  if (const YAML::Node d = root["disturbance"]) {
    if (!d.IsSequence()) throw ConfigError("disturbance: expected a list of terms");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string where = "disturbance[" + std::to_string(i) + "]";
      check_keys(d[i], where, {"amplitude_N", "omega_rad_per_s", "phase_rad"});
      DisturbanceTerm t;
      t.amplitude = number(d[i], where, "amplitude_N");
      t.omega = number(d[i], where, "omega_rad_per_s");
      t.phase = d[i]["phase_rad"] ? number(d[i], where, "phase_rad") : 0.0;
      s.disturbance.terms.push_back(t);
    }
  }

  if (const YAML::Node sim = root["simulation"]) {
    check_keys(sim, "simulation",
               {"duration_s", "step_s", "record_every_s", "integrator", "plant", "saturation", "rel_tol", "abs_tol"});
    if (sim["duration_s"]) s.sim.duration = number(sim, "simulation", "duration_s");
    if (sim["step_s"]) s.sim.step = number(sim, "simulation", "step_s");
    if (sim["record_every_s"]) s.sim.record_every = number(sim, "simulation", "record_every_s");
    if (sim["rel_tol"]) s.sim.rel_tol = number(sim, "simulation", "rel_tol");
    if (sim["abs_tol"]) s.sim.abs_tol = number(sim, "simulation", "abs_tol");
    if (sim["integrator"])
      s.sim.integrator =
          parse_enum(sim["integrator"], "simulation.integrator", {Integrator::Rk4Fixed, Integrator::Rk45Adaptive});
    if (sim["plant"])
      s.sim.plant = parse_enum(sim["plant"], "simulation.plant",
                               {PlantMode::NonlinearTwoBody, PlantMode::LinearTimeVarying});
    if (sim["saturation"])
      s.sim.saturation = parse_enum(sim["saturation"], "simulation.saturation",
                                    {SaturationMode::Clamp, SaturationMode::Assert, SaturationMode::None});
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string dump_scenario(const Scenario& s) {
  YAML::Emitter out;
  yaml::configure(out);
  out << YAML::BeginMap;
  out << YAML::Key << "orbit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mu_m3_per_s2" << YAML::Value << s.orbit.mu;
  out << YAML::Key << "a_km" << YAML::Value << s.orbit.a / 1e3;
  out << YAML::Key << "e" << YAML::Value << s.orbit.e;
  out << YAML::Key << "t_p_s" << YAML::Value << s.orbit.t_p;
  out << YAML::EndMap;

  out << YAML::Key << "chaser" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "m_kg" << YAML::Value << s.chaser.m;
  out << YAML::Key << "u_px_max_N" << YAML::Value << s.chaser.u_px_max;
  out << YAML::Key << "u_py_max_N" << YAML::Value << s.chaser.u_py_max;
  out << YAML::Key << "u_q_max_N" << YAML::Value << s.chaser.u_q_max;
  out << YAML::EndMap;

  out << YAML::Key << "initial_state" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x_m" << YAML::Value << s.x0.x;
  out << YAML::Key << "y_m" << YAML::Value << s.x0.y;
  out << YAML::Key << "z_m" << YAML::Value << s.x0.z;
  out << YAML::Key << "vx_m_per_s" << YAML::Value << s.x0.vx;
  out << YAML::Key << "vy_m_per_s" << YAML::Value << s.x0.vy;
  out << YAML::Key << "vz_m_per_s" << YAML::Value << s.x0.vz;
  out << YAML::EndMap;

  out << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "Q_p" << YAML::Value;
  emit_weight(out, s.Q_p);
  out << YAML::Key << "R_p" << YAML::Value;
  emit_weight(out, s.R_p);
  out << YAML::Key << "Q_q" << YAML::Value;
  emit_weight(out, s.Q_q);
  out << YAML::Key << "R_q" << YAML::Value;
  emit_weight(out, Eigen::MatrixXd::Constant(1, 1, s.R_q));
  out << YAML::EndMap;

  out << YAML::Key << "disturbance" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : s.disturbance.terms) {
    out << YAML::BeginMap;
    out << YAML::Key << "amplitude_N" << YAML::Value << t.amplitude;
    out << YAML::Key << "omega_rad_per_s" << YAML::Value << t.omega;
    out << YAML::Key << "phase_rad" << YAML::Value << t.phase;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "duration_s" << YAML::Value << s.sim.duration;
  out << YAML::Key << "step_s" << YAML::Value << s.sim.step;
  out << YAML::Key << "record_every_s" << YAML::Value << s.sim.record_every;
  out << YAML::Key << "integrator" << YAML::Value << to_string(s.sim.integrator);
  out << YAML::Key << "plant" << YAML::Value << to_string(s.sim.plant);
  out << YAML::Key << "saturation" << YAML::Value << to_string(s.sim.saturation);
  out << YAML::Key << "rel_tol" << YAML::Value << s.sim.rel_tol;
  out << YAML::Key << "abs_tol" << YAML::Value << s.sim.abs_tol;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  std::ofstream o(path);
  if (!o) throw ConfigError("cannot write scenario file " + path.string());
  o << dump_scenario(s);
}

}  // namespace rdv
