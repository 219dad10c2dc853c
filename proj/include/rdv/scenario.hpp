#pragma once

// Scenario files: orbit, chaser, initial state, weights, disturbance and
// simulation settings in one YAML document with units in the key names.

#include "rdv/dynamics.hpp"
#include "rdv/simulator.hpp"

#include <filesystem>
#include <string>

namespace rdv {

struct Scenario {
  OrbitConfig orbit;
  ChaserConfig chaser;
  RelativeState x0;
  Mat4 Q_p = Mat4::Identity();
  Mat2 R_p = Mat2::Identity();
  Mat2 Q_q = Mat2::Identity();
  double R_q = 1.0;
  DisturbanceSpec disturbance;
  SimConfig sim;

  void validate() const;

  [[nodiscard]] CostWeights weights() const { return {Q_p, R_p, Q_q, R_q}; }
  /// Full-state weights for the coupled design.
  [[nodiscard]] Mat6 Q() const;
  [[nodiscard]] Mat3 R() const;
  [[nodiscard]] Vec4 p0() const { return x0.in_plane(); }

  /// The bundled rendezvous example.
  static Scenario reference();
};

[[nodiscard]] bool operator==(const Scenario& a, const Scenario& b);

/// Throws ConfigError on unknown keys, missing keys or invalid values.
[[nodiscard]] Scenario parse_scenario(const std::string& text);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);
[[nodiscard]] std::string dump_scenario(const Scenario& s);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

}  // namespace rdv
