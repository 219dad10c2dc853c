#pragma once

// End-to-end rendezvous experiment: both syntheses, minimum-thrust bisection,
// linear-plant soundness runs, nonlinear runs of the assembled and coupled
// gains, and a pass/fail summary.

#include "rdv/report_io.hpp"
#include "rdv/scenario.hpp"
#include "rdv/simulator.hpp"
#include "rdv/synthesis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rdv {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool informational = false;
  std::string detail;
};

struct StageFailure {
  enum class Kind { Infeasible, Divergence, Other };
  std::string stage;
  std::string message;
  Kind kind = Kind::Other;
};

struct ExperimentResults {
  double mean_motion = 0.0;
  double period = 0.0;
  SynthesisReport in_plane;
  SynthesisReport out_of_plane;
  Mat36 K_pic = Mat36::Zero();
  Mat36 K_cc = Mat36::Zero();
  std::optional<MinThrustResult> min_thrust;
  Trajectory pic;
  Trajectory cc;
  CostComparison comparison;
  /// Linear-plant in-plane run from the initial state (no disturbance, unclamped).
  Trajectory linear_in_plane;
  /// Linear-plant out-of-plane run from rest under the disturbance (unclamped).
  Trajectory linear_out_of_plane;
  SaturationMode saturation = SaturationMode::Clamp;
  std::vector<StageFailure> failures;
  std::vector<CriterionResult> criteria;
};

/// Runs every stage; stage errors are collected in failures rather than thrown.
/// reference must hold K_p, K_q and K_cc.
[[nodiscard]] ExperimentResults run_experiment(const Scenario& scenario, const GainSet& reference,
                                               const SynthesisOptions& opts = {});

/// Markdown table of the criteria plus the headline numbers.
[[nodiscard]] std::string summary_table(const ExperimentResults& r);

}  // namespace rdv
