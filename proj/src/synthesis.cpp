#include "rdv/synthesis.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace rdv {

namespace {

using lmi::Assignment;

/// Diagonal state/input/cost scaling applied before handing a program to the solver.
struct DataScaling {
  VectorXd state;
  double input = 1.0;
  double cost = 1.0;
};

lmi::GuaranteedCostData scale(const lmi::GuaranteedCostData& d, const DataScaling& s) {
  const MatrixXd S = s.state.asDiagonal();
  const MatrixXd Si = s.state.cwiseInverse().asDiagonal();
  lmi::GuaranteedCostData o;
  o.A = Si * d.A * S;
  o.B = Si * d.B * s.input;
  o.E1 = Si * d.E1;
  o.E2 = d.E2 * S;
  o.Q = S * d.Q * S / s.cost;
  o.R = d.R * (s.input * s.input / s.cost);
  o.x0 = Si * d.x0;
  o.u_max = d.u_max / s.input;
  return o;
}

lmi::HinfData scale(const lmi::HinfData& d, const VectorXd& state) {
  const MatrixXd S = state.asDiagonal();
  const MatrixXd Si = state.cwiseInverse().asDiagonal();
  return {Si * d.A * S, Si * d.B, Si * d.Bw, Si * d.E1, d.E2 * S, S * d.Q * S, d.R};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// lambda_max after the congruence D M D with D = diag(|M_ii|^-1/2).
double normalized_lambda_max(const MatrixXd& M) {
  VectorXd d(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i) d(i) = M(i, i) != 0.0 ? 1.0 / std::sqrt(std::abs(M(i, i))) : 1.0;
  const MatrixXd N = d.asDiagonal() * (0.5 * (M + M.transpose())) * d.asDiagonal();
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(N, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

std::vector<std::pair<std::string, double>> residuals(const lmi::LmiProblem& raw, const Assignment& a) {
  const sdp::Lowered low = sdp::lower(raw);
  const sdp::Verification v = sdp::verify(low.sdp, low.map.pack(a));
  std::vector<std::pair<std::string, double>> out;
  for (size_t j = 0; j < low.sdp.blocks.size(); ++j) out.emplace_back(low.sdp.blocks[j].label, v.max_eigenvalues[j]);
  return out;
}

SynthesisReport synth_guaranteed_cost(const lmi::GuaranteedCostData& raw, const DataScaling& sc,
                                      const std::function<MatrixXd(double)>& delta_A, const std::string& kind,
                                      const SynthesisOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthesisReport rep;
  rep.kind = kind;
  rep.bound_name = "rho";

  const auto scaled = lmi::build_guaranteed_cost(scale(raw, sc));
  const sdp::Lowered low = sdp::lower(scaled.problem);
  const sdp::SdpSolution sol = sdp::solve(low.sdp, opts.solver);
  rep.status = sol.status;
  rep.iterations = sol.iterations;
  rep.warnings = sol.warnings;
  rep.solve_seconds = seconds_since(t0);
  if (!(sol.phase1_value < 0.0)) {
    if (rep.status == sdp::SolveStatus::Optimal) rep.status = sdp::SolveStatus::Infeasible;
    return rep;
  }

  const Assignment a = low.map.reconstruct(sol.x);
  const MatrixXd S = sc.state.asDiagonal();
  const MatrixXd Si = sc.state.cwiseInverse().asDiagonal();
  rep.X = S * a.get(scaled.X) * S / sc.cost;
  rep.X = 0.5 * (rep.X + rep.X.transpose());
  rep.Y = sc.input * a.get(scaled.Y) * S / sc.cost;
  rep.epsilon = a.scalar(scaled.eps) / sc.cost;
  const double theta = a.scalar(scaled.theta) / sc.cost;
  const double sigma = a.scalar(scaled.sigma) * sc.cost;
  rep.bound = 1.0 / theta;
  // K = Y X^-1 evaluated in scaled coordinates, where X is well conditioned.
  rep.K = sc.input * a.get(scaled.Y) * a.get(scaled.X).inverse() * Si;

  const auto unscaled = lmi::build_guaranteed_cost(raw);
  Assignment ra;
  ra.set(unscaled.X, rep.X);
  ra.set(unscaled.Y, rep.Y);
  ra.set(unscaled.eps, rep.epsilon);
  ra.set(unscaled.theta, theta);
  ra.set(unscaled.sigma, sigma);

  rep.verification = verify_gain(raw.A, raw.B, delta_A, rep.K, opts.grid_samples);
  rep.verification.lmi_residuals = residuals(unscaled.problem, ra);
  rep.verification.pre_schur_max_eigenvalue =
      guaranteed_cost_pre_schur(raw, rep.X.inverse(), rep.K, rep.epsilon);
  return rep;
}

}  // namespace

double RobustnessCheck::worst_residual() const {
  double w = -std::numeric_limits<double>::infinity();
  for (const auto& [label, v] : lmi_residuals) w = std::max(w, v);
  return w;
}

double spectral_abscissa(const MatrixXd& A) {
  Eigen::EigenSolver<MatrixXd> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

RobustnessCheck verify_gain(const MatrixXd& A, const MatrixXd& B, const std::function<MatrixXd(double)>& delta_A,
                            const MatrixXd& K, int samples) {
  if (B.rows() != A.rows() || K.rows() != B.cols() || K.cols() != A.cols())
    throw std::invalid_argument("verify_gain: incompatible dimensions");
  if (samples < 1) throw std::invalid_argument("verify_gain: need at least one sample");
  RobustnessCheck rc;
  const MatrixXd Acl = A - B * K;
  rc.nominal_abscissa = spectral_abscissa(Acl);
  rc.samples = samples;
  rc.worst_abscissa = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double M = 2.0 * std::numbers::pi * k / samples;
    const double s = spectral_abscissa(Acl + delta_A(M));
    if (s > rc.worst_abscissa) {
      rc.worst_abscissa = s;
      rc.worst_mean_anomaly = M;
    }
  }
  return rc;
}

double guaranteed_cost_pre_schur(const lmi::GuaranteedCostData& d, const MatrixXd& P, const MatrixXd& K,
                                 double eps) {
  const MatrixXd PA = P * (d.A - d.B * K);
  const MatrixXd Psi = PA + PA.transpose() + d.Q + K.transpose() * d.R * K;
  const MatrixXd M = Psi + eps * P * d.E1 * d.E1.transpose() * P + d.E2.transpose() * d.E2 / eps;
  return normalized_lambda_max(M);
}

double hinf_pre_schur(const lmi::HinfData& d, const MatrixXd& P, const MatrixXd& K, double eps, double g) {
  const Eigen::Index n = d.A.rows();
  const Eigen::Index nw = d.Bw.cols();
  const MatrixXd PA = P * (d.A - d.B * K);
  MatrixXd Psi = MatrixXd::Zero(n + nw, n + nw);
  Psi.topLeftCorner(n, n) = PA + PA.transpose() + d.Q + K.transpose() * d.R * K;
  Psi.topRightCorner(n, nw) = P * d.Bw;
  Psi.bottomLeftCorner(nw, n) = (P * d.Bw).transpose();
  Psi.bottomRightCorner(nw, nw) = -g * MatrixXd::Identity(nw, nw);
  MatrixXd D = MatrixXd::Zero(n + nw, d.E1.cols());
  D.topRows(n) = P * d.E1;
  MatrixXd E = MatrixXd::Zero(d.E2.rows(), n + nw);
  E.leftCols(n) = d.E2;
  return normalized_lambda_max(Psi + eps * D * D.transpose() + E.transpose() * E / eps);
}

SynthesisReport synth_in_plane(const InPlaneModel& in, const Mat4& Q_p, const Mat2& R_p, const Vec4& p0,
                               const Vec2& u_max, const SynthesisOptions& opts) {
  const lmi::GuaranteedCostData raw{in.A_p, in.B_p, in.E_p1, in.E_p2, Q_p, R_p, p0, u_max};
  double L = std::max(std::abs(p0(0)), std::abs(p0(1)));
  if (!(L > 0.0)) L = 1.0;
  DataScaling sc;
  sc.state = Vec4(L, L, L * in.n, L * in.n);
  sc.input = u_max.maxCoeff();
  sc.cost = L * L / in.n;
  return synth_guaranteed_cost(raw, sc, [&](double M) -> MatrixXd { return in.delta_A_p(M); }, "in-plane", opts);
}

SynthesisReport synth_coupled(const PlantModel& plant, const FullFactorization& fact, const Mat6& Q, const Mat3& R,
                              const Vec6& x0, const Vec3& u_max, const SynthesisOptions& opts) {
  const lmi::GuaranteedCostData raw{plant.A, plant.B, fact.E1, fact.E2, Q, R, x0, u_max};
  double L = x0.head<3>().cwiseAbs().maxCoeff();
  if (!(L > 0.0)) L = 1.0;
  DataScaling sc;
  sc.state = (VectorXd(6) << L, L, L, L * plant.n, L * plant.n, L * plant.n).finished();
  sc.input = u_max.maxCoeff();
  sc.cost = L * L / plant.n;
  return synth_guaranteed_cost(raw, sc, [&](double M) -> MatrixXd { return plant.delta_A(M); }, "coupled", opts);
}

SynthesisReport synth_out_of_plane(const OutOfPlaneModel& out, const Mat2& Q_q, double R_q,
                                   const SynthesisOptions& opts) {
  if (!(R_q > 0.0)) throw std::invalid_argument("R_q must be positive");
  if (!(opts.hinf_slack >= 0.0)) throw std::invalid_argument("hinf_slack must be nonnegative");
  const auto t0 = std::chrono::steady_clock::now();
  SynthesisReport rep;
  rep.kind = "out-of-plane";
  rep.bound_name = "gamma";

  const lmi::HinfData raw{out.A_q, out.B_q, out.B_q, out.E_q1, out.E_q2, Q_q, MatrixXd::Constant(1, 1, R_q)};
  const VectorXd state = Vec2(1.0, out.n);
  const lmi::HinfData scaled_data = scale(raw, state);

  // Stage one: smallest g.
  auto first = lmi::build_hinf(scaled_data);
  const sdp::Lowered low1 = sdp::lower(first.problem);
  const sdp::SdpSolution sol1 = sdp::solve(low1.sdp, opts.solver);
  rep.iterations = sol1.iterations;
  rep.warnings = sol1.warnings;
  if (!(sol1.phase1_value < 0.0)) {
    rep.status = sol1.status == sdp::SolveStatus::Optimal ? sdp::SolveStatus::Infeasible : sol1.status;
    rep.solve_seconds = seconds_since(t0);
    return rep;
  }
  const double g_min = low1.map.reconstruct(sol1.x).scalar(first.g);
  rep.gamma_min = std::sqrt(g_min);

  // Stage two: the most interior point with g within the slack of the minimum.
  auto second = lmi::build_hinf(scaled_data);
  lmi::BlockLmi cap("g-cap", {1});
  cap.set(0, 0,
          lmi::AffineExpr::scaled(second.g, MatrixXd::Ones(1, 1)) +
              lmi::AffineExpr::constant(MatrixXd::Constant(1, 1, -(1.0 + opts.hinf_slack) * g_min)));
  second.problem.add_constraint(std::move(cap));
  const sdp::Lowered low2 = sdp::lower(second.problem);
  const sdp::SdpSolution sol2 = sdp::center(low2.sdp, opts.solver);
  rep.iterations += sol2.iterations;
  rep.warnings.insert(rep.warnings.end(), sol2.warnings.begin(), sol2.warnings.end());
  rep.solve_seconds = seconds_since(t0);
  const bool stage2_ok = sol2.phase1_value < 0.0;
  if (!stage2_ok) rep.warnings.push_back("recentering failed; reporting the stage-one point");
  const sdp::Lowered& low = stage2_ok ? low2 : low1;
  const auto& vars = stage2_ok ? second : first;
  const Assignment a = low.map.reconstruct(stage2_ok ? sol2.x : sol1.x);
  rep.status = (sol1.status == sdp::SolveStatus::Optimal && stage2_ok) ? sol2.status : sol1.status;

  const MatrixXd S = state.asDiagonal();
  const MatrixXd Si = state.cwiseInverse().asDiagonal();
  rep.X = S * a.get(vars.X) * S;
  rep.X = 0.5 * (rep.X + rep.X.transpose());
  rep.Y = a.get(vars.Y) * S;
  rep.epsilon = a.scalar(vars.eps);
  const double g = a.scalar(vars.g);
  rep.bound = std::sqrt(g);
  rep.K = a.get(vars.Y) * a.get(vars.X).inverse() * Si;

  const auto unscaled = lmi::build_hinf(raw);
  Assignment ra;
  ra.set(unscaled.X, rep.X);
  ra.set(unscaled.Y, rep.Y);
  ra.set(unscaled.eps, rep.epsilon);
  ra.set(unscaled.g, g);
  rep.verification = verify_gain(raw.A, raw.B, [&](double M) -> MatrixXd { return out.delta_A_q(M); }, rep.K,
                                 opts.grid_samples);
  rep.verification.lmi_residuals = residuals(unscaled.problem, ra);
  rep.verification.pre_schur_max_eigenvalue = hinf_pre_schur(raw, rep.X.inverse(), rep.K, rep.epsilon, g);
  return rep;
}

Mat36 assemble_partially_independent(const MatrixXd& K_p, const MatrixXd& K_q) {
  if (K_p.rows() != 2 || K_p.cols() != 4) throw std::invalid_argument("in-plane gain must be 2x4");
  if (K_q.rows() != 1 || K_q.cols() != 2) throw std::invalid_argument("out-of-plane gain must be 1x2");
  Mat36 K = Mat36::Zero();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) K(r, kInPlaneIdx[c]) = K_p(r, c);
  for (int c = 0; c < 2; ++c) K(2, kOutOfPlaneIdx[c]) = K_q(0, c);
  return K;
}

bool in_plane_feasible(const InPlaneModel& in, const Mat4& Q_p, const Mat2& R_p, const Vec4& p0, double u_max,
                       const sdp::SolverOptions& solver) {
  if (!(u_max > 0.0)) return false;
  const lmi::GuaranteedCostData raw{in.A_p, in.B_p, in.E_p1, in.E_p2, Q_p, R_p, p0, Vec2(u_max, u_max)};
  double L = std::max(std::abs(p0(0)), std::abs(p0(1)));
  if (!(L > 0.0)) L = 1.0;
  DataScaling sc;
  sc.state = Vec4(L, L, L * in.n, L * in.n);
  sc.input = u_max;
  sc.cost = L * L / in.n;
  const auto prob = lmi::build_guaranteed_cost(scale(raw, sc));
  const sdp::SdpSolution sol = sdp::find_feasible(sdp::lower(prob.problem).sdp, solver);
  return sol.phase1_value < 0.0;
}

bool MinThrustResult::monotone() const {
  double lowest_feasible = std::numeric_limits<double>::infinity();
  double highest_infeasible = -std::numeric_limits<double>::infinity();
  for (const auto& p : probes) {
    if (p.feasible)
      lowest_feasible = std::min(lowest_feasible, p.u_max);
    else
      highest_infeasible = std::max(highest_infeasible, p.u_max);
  }
  return highest_infeasible < lowest_feasible;
}

MinThrustResult min_feasible_thrust(const InPlaneModel& in, const Mat4& Q_p, const Mat2& R_p, const Vec4& p0,
                                    const MinThrustOptions& opts) {
  if (!(opts.lower > 0.0) || !(opts.upper > opts.lower) || !(opts.resolution > 0.0))
    throw std::invalid_argument("min_feasible_thrust: bad bracket");
  MinThrustResult res;
  auto probe = [&](double u) {
    const bool f = in_plane_feasible(in, Q_p, R_p, p0, u, opts.solver);
    res.probes.push_back({u, f});
    spdlog::debug("thrust probe {:.4f} N: {}", u, f ? "feasible" : "infeasible");
    return f;
  };
  double lo = opts.lower;
  double hi = opts.upper;
  if (!probe(hi)) throw InfeasibleError("no feasible in-plane design at the bracket ceiling");
  if (probe(lo)) {
    res.u_min = lo;
    return res;
  }
  while (hi - lo > opts.resolution) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid))
      hi = mid;
    else
      lo = mid;
  }
  res.u_min = hi;
  return res;
}

}  // namespace rdv
