#pragma once

// Closed-loop simulation: two-body propagation of target and chaser (or the
// linear time-varying relative model), LVLH frame conversion, saturated state
// feedback, an out-of-plane disturbance and running quadratic costs.

#include "rdv/dynamics.hpp"

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdv {

struct InertialState {
  Vec3 r_target = Vec3::Zero();
  Vec3 v_target = Vec3::Zero();
  Vec3 r_chaser = Vec3::Zero();
  Vec3 v_chaser = Vec3::Zero();

  [[nodiscard]] bool finite() const;
};

struct DisturbanceTerm {
  double amplitude = 0.0;  // N
  double omega = 0.0;      // rad/s
  double phase = 0.0;      // rad
};

/// Sum of sinusoids acting along the orbit normal.
struct DisturbanceSpec {
  std::vector<DisturbanceTerm> terms;

  void validate() const;
  [[nodiscard]] bool empty() const { return terms.empty(); }
};

[[nodiscard]] double disturbance_eval(const DisturbanceSpec& dist, double t);

enum class Integrator { Rk4Fixed, Rk45Adaptive };
enum class PlantMode { NonlinearTwoBody, LinearTimeVarying };
/// none applies the linear law unclamped.
enum class SaturationMode { Clamp, Assert, None };

[[nodiscard]] const char* to_string(Integrator v);
[[nodiscard]] const char* to_string(PlantMode v);
[[nodiscard]] const char* to_string(SaturationMode v);

struct SimConfig {
  double duration = 10000.0;  // s
  double step = 0.1;          // s
  /// Spacing of recorded samples; zero records every step. Must be a multiple of step.
  double record_every = 0.0;
  Integrator integrator = Integrator::Rk4Fixed;
  PlantMode plant = PlantMode::NonlinearTwoBody;
  SaturationMode saturation = SaturationMode::Clamp;
  /// Adaptive integrator tolerances.
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  /// RK4 substeps are chosen so that substep * spectral_radius(A - BK) stays below this.
  double stiffness_budget = 1.0;

  void validate() const;
};

struct CostWeights {
  Mat4 Q_p = Mat4::Identity();
  Mat2 R_p = Mat2::Identity();
  Mat2 Q_q = Mat2::Identity();
  double R_q = 1.0;
};

struct TrajectorySample {
  double t = 0.0;
  RelativeState x;
  Vec3 thrust = Vec3::Zero();  // N, LVLH, as applied
  double disturbance = 0.0;    // N
  double J_p = 0.0;
  double J_q = 0.0;
  double J_total = 0.0;
  /// Integral of the squared disturbance.
  double disturbance_energy = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;

  [[nodiscard]] bool empty() const { return samples.empty(); }
  [[nodiscard]] const TrajectorySample& back() const { return samples.back(); }
  [[nodiscard]] double horizon() const { return samples.empty() ? 0.0 : samples.back().t; }
  /// First recorded time after which the in-plane distance stays below the threshold, or -1.
  [[nodiscard]] double settling_time(double distance) const;
  [[nodiscard]] double max_abs_z() const;
  [[nodiscard]] Vec3 max_abs_thrust() const;
  /// Sample with the largest t not exceeding the argument.
  [[nodiscard]] const TrajectorySample& at(double t) const;
};

inline constexpr const char* kTrajectoryCsvHeader = "t,x,y,z,vx,vy,vz,fx,fy,fz,wq,Jp,Jq,Jtotal";

/// 17 significant digits per value.
void write_csv(std::ostream& os, const Trajectory& traj);
void write_csv_row(std::ostream& os, const TrajectorySample& s);
/// Throws std::runtime_error on malformed input.
[[nodiscard]] Trajectory read_csv(std::istream& is);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double t, Trajectory partial);
  [[nodiscard]] double time() const { return time_; }
  [[nodiscard]] const Trajectory& partial() const { return partial_; }

 private:
  double time_;
  Trajectory partial_;
};

class SaturationError : public std::runtime_error {
 public:
  SaturationError(double t, int axis, double value);
  [[nodiscard]] double time() const { return time_; }

 private:
  double time_;
};

/// LVLH axes as columns: radial, along-track, orbit normal.
[[nodiscard]] Mat3 lvlh_rotation(const Vec3& r, const Vec3& v);

/// Target on the reference orbit at t = 0 (perifocal frame), chaser placed so
/// that its relative state is x0.
[[nodiscard]] InertialState init_inertial(const OrbitConfig& cfg, const RelativeState& x0);

/// Throws std::invalid_argument on a degenerate target state.
[[nodiscard]] RelativeState lvlh_relative_state(const InertialState& s);

/// Inertial accelerations (target, chaser); thrust u and disturbance w are in LVLH.
struct TwoBodyRates {
  Vec3 target_acceleration;
  Vec3 chaser_acceleration;
};

[[nodiscard]] TwoBodyRates two_body_derivative(const InertialState& s, const Vec3& u, double w, double m, double mu);

/// v^2/2 - mu/r.
[[nodiscard]] double specific_energy(const Vec3& r, const Vec3& v, double mu);

/// Closed-loop run with u = -K x. Throws DivergenceError on overflow and
/// SaturationError in assert mode.
[[nodiscard]] Trajectory run(const OrbitConfig& cfg, const ChaserConfig& chaser, const RelativeState& x0,
                             const Mat36& K, const DisturbanceSpec& dist, const SimConfig& sim,
                             const CostWeights& weights = {});

/// Unforced target propagation with the configured integrator; returns the state at each period multiple.
[[nodiscard]] std::vector<InertialState> propagate_target(const OrbitConfig& cfg, const SimConfig& sim, int periods);

struct CostComparison {
  double terminal_a = 0.0;
  double terminal_b = 0.0;
  bool a_lower = false;
  /// (t, J_total of a, J_total of b) on a's sample times, b interpolated linearly.
  std::vector<std::array<double, 3>> points;
};

/// Throws std::invalid_argument when the horizons differ.
[[nodiscard]] CostComparison compare(const Trajectory& a, const Trajectory& b);

}  // namespace rdv
