#pragma once

// Relative-motion model of a chaser near a target on a near-circular orbit:
// orbital constants, Kepler's equation, the exact and order-e orbital terms,
// the linearized plant and its in-plane / out-of-plane split together with the
// norm-bounded factorization of the non-circularity matrices.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace rdv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat42 = Eigen::Matrix<double, 4, 2>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat12 = Eigen::Matrix<double, 1, 2>;

/// Standard Earth gravitational parameter, m^3/s^2.
inline constexpr double kEarthMu = 3.986004418e14;
/// Mean equatorial Earth radius, m.
inline constexpr double kEarthRadius = 6378137.0;

/// Largest eccentricity the order-e model accepts.
inline constexpr double kMaxEccentricity = 0.1;
/// Above this eccentricity a warning is logged.
inline constexpr double kWarnEccentricity = 0.05;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class KeplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reference orbit of the target. SI units.
struct OrbitConfig {
  double mu = kEarthMu;  // m^3/s^2
  double a = 0.0;        // m
  double e = 0.0;
  double t_p = 0.0;  // s, time of periapsis passage

  /// Throws ConfigError when the orbit is outside the model's validity range.
  void validate() const;

  /// Mean anomaly at time t.
  [[nodiscard]] double mean_anomaly(double t) const;
};

struct ChaserConfig {
  double m = 0.0;         // kg
  double u_px_max = 0.0;  // N
  double u_py_max = 0.0;  // N
  double u_q_max = 0.0;   // N

  void validate() const;
  [[nodiscard]] Vec3 thrust_bounds() const { return {u_px_max, u_py_max, u_q_max}; }
};

struct OrbitalTerms {
  double mu_over_r3 = 0.0;  // 1/s^2
  double omega = 0.0;       // rad/s
  double omega_sq = 0.0;    // rad^2/s^2
  double omega_dot = 0.0;   // rad/s^2
};

/// Relative state in the target's local-vertical/local-horizontal frame:
/// x radial, z along the orbit normal, y completing the triad.
struct RelativeState {
  double x = 0.0, y = 0.0, z = 0.0;
  double vx = 0.0, vy = 0.0, vz = 0.0;

  [[nodiscard]] Vec6 vector() const { return (Vec6() << x, y, z, vx, vy, vz).finished(); }
  static RelativeState from_vector(const Vec6& v) { return {v(0), v(1), v(2), v(3), v(4), v(5)}; }

  [[nodiscard]] Vec4 in_plane() const { return {x, y, vx, vy}; }
  [[nodiscard]] Vec2 out_of_plane() const { return {z, vz}; }
  [[nodiscard]] double in_plane_distance() const { return std::hypot(x, y); }
  [[nodiscard]] bool finite() const { return vector().allFinite(); }
};

[[nodiscard]] double mean_motion(const OrbitConfig& cfg);
[[nodiscard]] double orbital_period(const OrbitConfig& cfg);

/// Solves E - e sin E = M. Newton from E = M, bisection fallback.
/// Throws KeplerError if neither converges.
[[nodiscard]] double solve_kepler(double mean_anomaly, double e);

/// mu/r^3, omega, omega^2 and d(omega)/dt written in terms of the eccentric anomaly.
[[nodiscard]] OrbitalTerms exact_orbital_terms(const OrbitConfig& cfg, double eccentric_anomaly);

/// The same four terms expanded in e about a circular orbit and cut at order e.
[[nodiscard]] OrbitalTerms truncated_orbital_terms(const OrbitConfig& cfg, double mean_anomaly);

/// Un-linearized system matrix with the time-varying orbital terms substituted.
[[nodiscard]] Mat6 nonlinear_system_matrix(const OrbitalTerms& terms);

/// x' = (A + dA(M)) x + B u, with dA the order-e non-circularity matrix.
struct PlantModel {
  double n = 0.0;
  double e = 0.0;
  Mat6 A = Mat6::Zero();
  Mat63 B = Mat63::Zero();

  [[nodiscard]] Mat6 delta_A(double mean_anomaly) const;
};

/// p = [x, y, vx, vy]; dA_p(M) = E_p1 Lambda_p(M) E_p2.
struct InPlaneModel {
  double n = 0.0;
  double e = 0.0;
  Mat4 A_p = Mat4::Zero();
  Mat42 B_p = Mat42::Zero();
  Mat4 E_p1 = Mat4::Zero();
  Mat4 E_p2 = Mat4::Zero();

  [[nodiscard]] Mat4 delta_A_p(double mean_anomaly) const;
  [[nodiscard]] Mat4 Lambda_p(double mean_anomaly) const;
};

/// q = [z, vz]; dA_q(M) = E_q1 Lambda_q(M) E_q2. The disturbance force enters through B_q.
struct OutOfPlaneModel {
  double n = 0.0;
  double e = 0.0;
  Mat2 A_q = Mat2::Zero();
  Vec2 B_q = Vec2::Zero();
  Mat2 E_q1 = Mat2::Zero();
  Mat2 E_q2 = Mat2::Zero();

  [[nodiscard]] Mat2 delta_A_q(double mean_anomaly) const;
  [[nodiscard]] Mat2 Lambda_q(double mean_anomaly) const;
};

[[nodiscard]] PlantModel build_plant(const OrbitConfig& cfg, const ChaserConfig& chaser);
[[nodiscard]] InPlaneModel split_in_plane(const PlantModel& plant, const OrbitConfig& cfg,
                                          const ChaserConfig& chaser);
[[nodiscard]] OutOfPlaneModel split_out_of_plane(const PlantModel& plant, const OrbitConfig& cfg,
                                                 const ChaserConfig& chaser);

/// Norm-bounded factorization of the full 6-state dA, assembled from the in-plane
/// and out-of-plane factors (used by the coupled design).
struct FullFactorization {
  Mat6 E1 = Mat6::Zero();
  Mat6 E2 = Mat6::Zero();
  [[nodiscard]] Mat6 Lambda(double mean_anomaly) const;
};

[[nodiscard]] FullFactorization full_factorization(const InPlaneModel& in, const OutOfPlaneModel& out);

/// State index maps between the 6-state vector and the in-plane / out-of-plane slices.
inline constexpr int kInPlaneIdx[4] = {0, 1, 3, 4};
inline constexpr int kOutOfPlaneIdx[2] = {2, 5};

}  // namespace rdv
