#include "rdv/dynamics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

namespace rdv {

void OrbitConfig::validate() const {
  if (!(std::isfinite(mu) && mu > 0.0)) throw ConfigError("orbit: mu must be positive");
  if (!(std::isfinite(a) && a > 0.0)) throw ConfigError("orbit: semimajor axis must be positive");
  if (!(std::isfinite(e) && e >= 0.0 && e < 1.0)) throw ConfigError("orbit: eccentricity must lie in [0, 1)");
  if (e > kMaxEccentricity)
    throw ConfigError("orbit: eccentricity " + std::to_string(e) + " exceeds the order-e model limit 0.1");
  if (!std::isfinite(t_p)) throw ConfigError("orbit: t_p must be finite");
  if (e > kWarnEccentricity)
    spdlog::warn("eccentricity {} is above {}; order-e truncation error grows as e^2", e, kWarnEccentricity);
}

double OrbitConfig::mean_anomaly(double t) const { return mean_motion(*this) * (t - t_p); }

void ChaserConfig::validate() const {
  if (!(std::isfinite(m) && m > 0.0)) throw ConfigError("chaser: mass must be positive");
  if (!(u_px_max > 0.0 && u_py_max > 0.0 && u_q_max > 0.0))
    throw ConfigError("chaser: thrust bounds must be positive");
}

double mean_motion(const OrbitConfig& cfg) { return std::sqrt(cfg.mu / (cfg.a * cfg.a * cfg.a)); }

double orbital_period(const OrbitConfig& cfg) { return 2.0 * std::numbers::pi / mean_motion(cfg); }

double solve_kepler(double mean_anomaly, double e) {
  if (!(e >= 0.0 && e < 1.0)) throw KeplerError("solve_kepler: eccentricity outside [0, 1)");
  if (!std::isfinite(mean_anomaly)) throw KeplerError("solve_kepler: non-finite mean anomaly");

  constexpr double kTol = 1e-13;
  constexpr int kMaxNewton = 50;
  constexpr int kMaxBisection = 200;

  // Reduce to (-pi, pi] so the residual tolerance is meaningful for large M.
  const double two_pi = 2.0 * std::numbers::pi;
  const double turns = std::round(mean_anomaly / two_pi);
  const double M = mean_anomaly - turns * two_pi;
  auto residual = [&](double E) { return E - e * std::sin(E) - M; };

  double E = M;
  for (int i = 0; i < kMaxNewton; ++i) {
    const double f = residual(E);
    if (std::abs(f) < kTol) {
      // one more step takes the residual to rounding level
      const double polished = E - f / (1.0 - e * std::cos(E));
      if (std::abs(residual(polished)) < std::abs(f)) E = polished;
      return E + turns * two_pi;
    }
    E -= f / (1.0 - e * std::cos(E));
  }

  // The root lies in [M - e, M + e] because |e sin E| <= e.
  double lo = M - e - kTol;
  double hi = M + e + kTol;
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = residual(mid);
    if (std::abs(f) < kTol) return mid + turns * two_pi;
    (f < 0.0 ? lo : hi) = mid;
  }
  throw KeplerError("solve_kepler: no convergence for M=" + std::to_string(mean_anomaly) +
                    ", e=" + std::to_string(e));
}

OrbitalTerms exact_orbital_terms(const OrbitConfig& cfg, double E) {
  const double n = mean_motion(cfg);
  const double k = 1.0 / (1.0 - cfg.e * std::cos(E));
  const double k2 = k * k;
  return {
      .mu_over_r3 = n * n * k2 * k,
      .omega = n * k2,
      .omega_sq = n * n * k2 * k2,
      .omega_dot = -2.0 * n * n * cfg.e * std::sin(E) * k2 * k2,
  };
}

OrbitalTerms truncated_orbital_terms(const OrbitConfig& cfg, double M) {
  const double n = mean_motion(cfg);
  const double c = std::cos(M);
  return {
      .mu_over_r3 = n * n * (1.0 + 3.0 * cfg.e * c),
      .omega = n * (1.0 + 2.0 * cfg.e * c),
      .omega_sq = n * n * (1.0 + 4.0 * cfg.e * c),
      .omega_dot = -2.0 * n * n * cfg.e * std::sin(M),
  };
}

Mat6 nonlinear_system_matrix(const OrbitalTerms& t) {
  Mat6 A = Mat6::Zero();
  A(0, 3) = A(1, 4) = A(2, 5) = 1.0;
  A(3, 0) = 2.0 * t.mu_over_r3 + t.omega_sq;
  A(3, 1) = t.omega_dot;
  A(3, 4) = 2.0 * t.omega;
  A(4, 0) = -t.omega_dot;
  A(4, 1) = -t.mu_over_r3 + t.omega_sq;
  A(4, 3) = -2.0 * t.omega;
  A(5, 2) = -t.mu_over_r3;
  return A;
}

Mat6 PlantModel::delta_A(double M) const {
  const double c = std::cos(M);
  const double s = std::sin(M);
  const double en2 = e * n * n;
  Mat6 dA = Mat6::Zero();
  dA(3, 0) = 10.0 * en2 * c;
  dA(3, 1) = -2.0 * en2 * s;
  dA(3, 4) = 4.0 * e * n * c;
  dA(4, 0) = 2.0 * en2 * s;
  dA(4, 1) = en2 * c;
  dA(4, 3) = -4.0 * e * n * c;
  dA(5, 2) = -3.0 * en2 * c;
  return dA;
}

PlantModel build_plant(const OrbitConfig& cfg, const ChaserConfig& chaser) {
  cfg.validate();
  chaser.validate();
  PlantModel p;
  p.n = mean_motion(cfg);
  p.e = cfg.e;
  const double n = p.n;
  p.A(0, 3) = p.A(1, 4) = p.A(2, 5) = 1.0;
  p.A(3, 0) = 3.0 * n * n;
  p.A(3, 4) = 2.0 * n;
  p.A(4, 3) = -2.0 * n;
  p.A(5, 2) = -n * n;
  p.B(3, 0) = p.B(4, 1) = p.B(5, 2) = 1.0 / chaser.m;
  return p;
}

Mat4 InPlaneModel::Lambda_p(double M) const {
  const double s = std::sin(M);
  const double c = std::cos(M);
  return Vec4(s, -s, c, c).asDiagonal();
}

Mat4 InPlaneModel::delta_A_p(double M) const {
  const double c = std::cos(M);
  const double s = std::sin(M);
  const double en2 = e * n * n;
  Mat4 dA = Mat4::Zero();
  dA.row(2) << 10.0 * en2 * c, -2.0 * en2 * s, 0.0, 4.0 * e * n * c;
  dA.row(3) << 2.0 * en2 * s, en2 * c, -4.0 * e * n * c, 0.0;
  return dA;
}

InPlaneModel split_in_plane(const PlantModel& plant, const OrbitConfig& cfg, const ChaserConfig& chaser) {
  (void)chaser;
  InPlaneModel m;
  m.n = plant.n;
  m.e = cfg.e;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m.A_p(i, j) = plant.A(kInPlaneIdx[i], kInPlaneIdx[j]);
    for (int j = 0; j < 2; ++j) m.B_p(i, j) = plant.B(kInPlaneIdx[i], j);
  }
  const double e = cfg.e;
  const double n = plant.n;
  m.E_p1.row(2) << 0.0, 2.0 * e, 4.0 * e, 0.0;
  m.E_p1.row(3) << 2.0 * e, 0.0, 0.0, 4.0 * e;
  m.E_p2.row(0) << n * n, 0.0, 0.0, 0.0;
  m.E_p2.row(1) << 0.0, n * n, 0.0, 0.0;
  m.E_p2.row(2) << 2.5 * n * n, 0.0, 0.0, n;
  m.E_p2.row(3) << 0.0, 0.25 * n * n, -n, 0.0;
  return m;
}

Mat2 OutOfPlaneModel::Lambda_q(double M) const {
  Mat2 L = Mat2::Zero();
  L(0, 0) = -0.5 * std::cos(M);
  return L;
}

Mat2 OutOfPlaneModel::delta_A_q(double M) const {
  Mat2 dA = Mat2::Zero();
  dA(1, 0) = -3.0 * e * n * n * std::cos(M);
  return dA;
}

OutOfPlaneModel split_out_of_plane(const PlantModel& plant, const OrbitConfig& cfg,
                                   const ChaserConfig& chaser) {
  (void)chaser;
  OutOfPlaneModel m;
  m.n = plant.n;
  m.e = cfg.e;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) m.A_q(i, j) = plant.A(kOutOfPlaneIdx[i], kOutOfPlaneIdx[j]);
    m.B_q(i) = plant.B(kOutOfPlaneIdx[i], 2);
  }
  m.E_q1(1, 0) = 6.0 * cfg.e;
  m.E_q2(0, 0) = plant.n * plant.n;
  return m;
}

Mat6 FullFactorization::Lambda(double M) const {
  const double s = std::sin(M);
  const double c = std::cos(M);
  // Diagonal in the order (in-plane factor rows 0..3, out-of-plane factor rows 4..5).
  return (Vec6() << s, -s, c, c, -0.5 * c, 0.0).finished().asDiagonal();
}

FullFactorization full_factorization(const InPlaneModel& in, const OutOfPlaneModel& out) {
  // dA = E1 Lambda E2 where E1 maps the 6 factor channels back to state rows and
  // E2 maps state columns into the factor channels.
  FullFactorization f;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      f.E1(kInPlaneIdx[i], k) = in.E_p1(i, k);
      f.E2(k, kInPlaneIdx[i]) = in.E_p2(k, i);
    }
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      f.E1(kOutOfPlaneIdx[i], 4 + k) = out.E_q1(i, k);
      f.E2(4 + k, kOutOfPlaneIdx[i]) = out.E_q2(k, i);
    }
  return f;
}

}  // namespace rdv
