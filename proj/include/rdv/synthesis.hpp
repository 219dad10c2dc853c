#pragma once

// Controller synthesis: solves the guaranteed-cost and H-infinity programs,
// recovers gains, assembles the partially independent gain and checks the
// resulting certificates.

#include "rdv/dynamics.hpp"
#include "rdv/lmi_model.hpp"
#include "rdv/sdp.hpp"

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rdv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Number of mean-anomaly samples per orbit in robustness sweeps.
inline constexpr int kDefaultGridSamples = 360;

struct SynthesisOptions {
  sdp::SolverOptions solver;
  int grid_samples = kDefaultGridSamples;
  /// Out-of-plane recentering: the returned point maximizes the constraint
  /// margin subject to g <= (1 + slack) * g_min.
  double hinf_slack = 1e-3;
};

struct RobustnessCheck {
  double nominal_abscissa = 0.0;
  double worst_abscissa = 0.0;
  double worst_mean_anomaly = 0.0;
  int samples = 0;
  /// (label, lambda_max) of every LMI of the unscaled program at the solution.
  std::vector<std::pair<std::string, double>> lmi_residuals;
  /// lambda_max of the pre-Schur matrix inequality after a diagonal congruence
  /// that gives it a unit diagonal (sign-preserving).
  double pre_schur_max_eigenvalue = 0.0;

  [[nodiscard]] double worst_residual() const;
};

struct SynthesisReport {
  std::string kind;
  sdp::SolveStatus status = sdp::SolveStatus::NumericalFailure;
  MatrixXd K;
  MatrixXd X;
  MatrixXd Y;
  double epsilon = 0.0;
  /// rho (cost bound, J units) for guaranteed-cost designs, gamma for H-infinity.
  double bound = 0.0;
  std::string bound_name;
  /// Smallest g = gamma^2 found before recentering (H-infinity only).
  double gamma_min = 0.0;
  int iterations = 0;
  double solve_seconds = 0.0;
  std::vector<std::string> warnings;
  RobustnessCheck verification;

  /// True when a strictly feasible certificate was recovered.
  [[nodiscard]] bool has_gain() const { return K.size() > 0; }
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrust-limited guaranteed-cost in-plane design.
[[nodiscard]] SynthesisReport synth_in_plane(const InPlaneModel& inplane, const Mat4& Q_p, const Mat2& R_p,
                                             const Vec4& p0, const Vec2& u_max, const SynthesisOptions& opts = {});

/// Robust H-infinity out-of-plane design.
[[nodiscard]] SynthesisReport synth_out_of_plane(const OutOfPlaneModel& outplane, const Mat2& Q_q, double R_q,
                                                 const SynthesisOptions& opts = {});

/// Guaranteed-cost design on the full 6-state plant.
[[nodiscard]] SynthesisReport synth_coupled(const PlantModel& plant, const FullFactorization& fact, const Mat6& Q,
                                            const Mat3& R, const Vec6& x0, const Vec3& u_max,
                                            const SynthesisOptions& opts = {});

/// Block-structured 3x6 gain: in-plane gain on rows 0-1 over (x, y, vx, vy),
/// out-of-plane gain on row 2 over (z, vz), zeros elsewhere.
[[nodiscard]] Mat36 assemble_partially_independent(const MatrixXd& K_p, const MatrixXd& K_q);

/// Spectral abscissa of A - B K, nominal and worst over a uniform M grid.
[[nodiscard]] RobustnessCheck verify_gain(const MatrixXd& A, const MatrixXd& B,
                                          const std::function<MatrixXd(double)>& delta_A, const MatrixXd& K,
                                          int samples = kDefaultGridSamples);

[[nodiscard]] double spectral_abscissa(const MatrixXd& A);

/// lambda_max of Psi + eps P E1 E1' P + E2' E2 / eps with Psi = sym(P(A - BK)) + Q + K'RK.
[[nodiscard]] double guaranteed_cost_pre_schur(const lmi::GuaranteedCostData& d, const MatrixXd& P,
                                               const MatrixXd& K, double eps);

/// The H-infinity analogue with the disturbance channel and -g on the diagonal.
[[nodiscard]] double hinf_pre_schur(const lmi::HinfData& d, const MatrixXd& P, const MatrixXd& K, double eps,
                                    double g);

struct ThrustProbe {
  double u_max = 0.0;
  bool feasible = false;
};

struct MinThrustResult {
  double u_min = 0.0;
  std::vector<ThrustProbe> probes;
  /// Every feasible probe lies above every infeasible one.
  [[nodiscard]] bool monotone() const;
};

struct MinThrustOptions {
  double lower = 0.5;
  double upper = 50.0;
  double resolution = 0.05;
  sdp::SolverOptions solver;
};

/// Is the in-plane constraint set strictly feasible with u_px_max = u_py_max = u_max?
[[nodiscard]] bool in_plane_feasible(const InPlaneModel& inplane, const Mat4& Q_p, const Mat2& R_p, const Vec4& p0,
                                     double u_max, const sdp::SolverOptions& solver = {});

/// Bisection for the smallest symmetric in-plane thrust bound with a feasible
/// design. Throws InfeasibleError when the upper end is infeasible.
[[nodiscard]] MinThrustResult min_feasible_thrust(const InPlaneModel& inplane, const Mat4& Q_p, const Mat2& R_p,
                                                  const Vec4& p0, const MinThrustOptions& opts = {});

}  // namespace rdv
