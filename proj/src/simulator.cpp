#include "rdv/simulator.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace rdv {

namespace odeint = boost::numeric::odeint;

namespace {

constexpr double kDivergenceNorm = 1e9;

struct Frame {
  Mat3 R;
  double omega = 0.0;
};

Frame frame_of(const Vec3& r, const Vec3& v) {
  const Vec3 h = r.cross(v);
  const double hn = h.norm();
  const double rn = r.norm();
  if (!(hn > 0.0) || !(rn > 0.0) || !std::isfinite(hn)) throw std::invalid_argument("degenerate target state");
  const Vec3 xh = r / rn;
  const Vec3 zh = h / hn;
  Frame f;
  f.R.col(0) = xh;
  f.R.col(1) = zh.cross(xh);
  f.R.col(2) = zh;
  f.omega = hn / (rn * rn);
  return f;
}

Vec6 relative(const Frame& f, const Vec3& r, const Vec3& v, const Vec3& rc, const Vec3& vc) {
  const Vec3 pos = f.R.transpose() * (rc - r);
  const Vec3 w(0.0, 0.0, f.omega);
  const Vec3 vel = f.R.transpose() * (vc - v) - w.cross(pos);
  Vec6 x;
  x << pos, vel;
  return x;
}

/// Saturated linear feedback.
struct FeedbackLaw {
  Mat36 K;
  Vec3 bounds;
  SaturationMode mode;

  Vec3 operator()(const Vec6& x, double t) const {
    Vec3 u = -K * x;
    for (int i = 0; i < 3; ++i) {
      if (mode == SaturationMode::Clamp) {
        u(i) = std::clamp(u(i), -bounds(i), bounds(i));
      } else if (mode == SaturationMode::Assert && std::abs(u(i)) > bounds(i) * (1.0 + 1e-9) + 1e-12) {
        throw SaturationError(t, i, u(i));
      }
    }
    return u;
  }
};

struct CostRates {
  double p = 0.0;
  double q = 0.0;
};

CostRates cost_rates(const CostWeights& w, const Vec6& x, const Vec3& u) {
  Vec4 p;
  p << x(0), x(1), x(3), x(4);
  const Vec2 q(x(2), x(5));
  const Vec2 up = u.head<2>();
  return {p.dot(w.Q_p * p) + up.dot(w.R_p * up), q.dot(w.Q_q * q) + w.R_q * u(2) * u(2)};
}

constexpr size_t kTwoBodyDim = 15;  // r, v, r_c, v_c, J_p, J_q, int w^2
constexpr size_t kLinearDim = 9;    // x, J_p, J_q, int w^2

using TwoBodyState = std::array<double, kTwoBodyDim>;
using LinearState = std::array<double, kLinearDim>;

Vec3 seg(const double* p) { return {p[0], p[1], p[2]}; }
void put(double* p, const Vec3& v) {
  p[0] = v(0);
  p[1] = v(1);
  p[2] = v(2);
}

struct TwoBodySystem {
  double mu;
  double m;
  FeedbackLaw law;
  const DisturbanceSpec* dist;
  const CostWeights* weights;

  Vec6 relative_state(const TwoBodyState& s) const {
    const Vec3 r = seg(&s[0]), v = seg(&s[3]);
    return relative(frame_of(r, v), r, v, seg(&s[6]), seg(&s[9]));
  }

  void operator()(const TwoBodyState& s, TwoBodyState& ds, double t) const {
    const Vec3 r = seg(&s[0]), v = seg(&s[3]), rc = seg(&s[6]), vc = seg(&s[9]);
    const Frame f = frame_of(r, v);
    const Vec6 x = relative(f, r, v, rc, vc);
    const Vec3 u = law(x, t);
    const double w = disturbance_eval(*dist, t);
    const double rn = r.norm();
    const double rcn = rc.norm();
    put(&ds[0], v);
    put(&ds[3], -mu / (rn * rn * rn) * r);
    put(&ds[6], vc);
    put(&ds[9], -mu / (rcn * rcn * rcn) * rc + f.R * (u + Vec3(0.0, 0.0, w)) / m);
    const CostRates c = cost_rates(*weights, x, u);
    ds[12] = c.p;
    ds[13] = c.q;
    ds[14] = w * w;
  }
};

struct LinearSystem {
  const PlantModel* plant;
  const OrbitConfig* orbit;
  FeedbackLaw law;
  const DisturbanceSpec* dist;
  const CostWeights* weights;

  Vec6 relative_state(const LinearState& s) const { return Eigen::Map<const Vec6>(s.data()); }

  void operator()(const LinearState& s, LinearState& ds, double t) const {
    const Vec6 x = Eigen::Map<const Vec6>(s.data());
    const Vec3 u = law(x, t);
    const double w = disturbance_eval(*dist, t);
    const Mat6 A = plant->A + plant->delta_A(orbit->mean_anomaly(t));
    Eigen::Map<Vec6>(ds.data()) = A * x + plant->B * (u + Vec3(0.0, 0.0, w));
    const CostRates c = cost_rates(*weights, x, u);
    ds[6] = c.p;
    ds[7] = c.q;
    ds[8] = w * w;
  }
};

long long whole_multiple(double value, double unit, const char* what) {
  const double k = value / unit;
  const long long r = std::llround(k);
  if (r < 1 || std::abs(k - static_cast<double>(r)) > 1e-6) throw ConfigError(std::string(what) + " must be a multiple of step");
  return r;
}

int rk4_substeps(const PlantModel& plant, const Mat36& K, const SimConfig& sim) {
  const Mat6 Acl = plant.A - plant.B * K;
  const double radius = Eigen::EigenSolver<Mat6>(Acl, false).eigenvalues().cwiseAbs().maxCoeff();
  return std::max(1, static_cast<int>(std::ceil(sim.step * radius / sim.stiffness_budget)));
}

template <class State, class System, size_t Offset>
Trajectory integrate(const System& sys, State s, const SimConfig& sim, int substeps) {
  const long long nsteps = whole_multiple(sim.duration, sim.step, "duration");
  const long long stride = sim.record_every > 0.0 ? whole_multiple(sim.record_every, sim.step, "record_every") : 1;
  Trajectory traj;
  traj.samples.reserve(static_cast<size_t>(nsteps / stride + 2));

  auto sample = [&](const State& st, double t) {
    TrajectorySample out;
    out.t = t;
    bool ok = std::all_of(st.begin(), st.end(), [](double v) { return std::isfinite(v); });
    Vec6 x = Vec6::Zero();
    if (ok) {
      try {
        x = sys.relative_state(st);
      } catch (const std::invalid_argument&) {
        ok = false;
      }
    }
    if (!ok || !x.allFinite() || x.norm() > kDivergenceNorm) throw DivergenceError(t, traj);
    out.x = RelativeState::from_vector(x);
    out.thrust = sys.law(x, t);
    out.disturbance = disturbance_eval(*sys.dist, t);
    out.J_p = st[Offset];
    out.J_q = st[Offset + 1];
    out.J_total = out.J_p + out.J_q;
    out.disturbance_energy = st[Offset + 2];
    return out;
  };

  traj.samples.push_back(sample(s, 0.0));
  odeint::runge_kutta4<State> rk4;
  auto dopri = odeint::make_controlled(sim.abs_tol, sim.rel_tol, odeint::runge_kutta_dopri5<State>());
  const double h = sim.step / substeps;
  for (long long i = 1; i <= nsteps; ++i) {
    const double t0 = static_cast<double>(i - 1) * sim.step;
    if (sim.integrator == Integrator::Rk4Fixed) {
      for (int j = 0; j < substeps; ++j) rk4.do_step(sys, s, t0 + j * h, h);
    } else {
      odeint::integrate_adaptive(dopri, sys, s, t0, t0 + sim.step, h);
    }
    const double t = static_cast<double>(i) * sim.step;
    TrajectorySample smp = sample(s, t);
    if (i % stride == 0 || i == nsteps) traj.samples.push_back(std::move(smp));
  }
  return traj;
}

std::string format_g17(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace

bool InertialState::finite() const {
  return r_target.allFinite() && v_target.allFinite() && r_chaser.allFinite() && v_chaser.allFinite();
}

void DisturbanceSpec::validate() const {
  for (const auto& term : terms) {
    if (!(term.amplitude >= 0.0) || !std::isfinite(term.amplitude))
      throw ConfigError("disturbance amplitude must be finite and nonnegative");
    if (!std::isfinite(term.omega) || !std::isfinite(term.phase)) throw ConfigError("disturbance terms must be finite");
  }
}

double disturbance_eval(const DisturbanceSpec& dist, double t) {
  double w = 0.0;
  for (const auto& term : dist.terms) w += term.amplitude * std::sin(term.omega * t + term.phase);
  return w;
}

const char* to_string(Integrator v) { return v == Integrator::Rk4Fixed ? "rk4-fixed" : "rk45-adaptive"; }

const char* to_string(PlantMode v) {
  return v == PlantMode::NonlinearTwoBody ? "nonlinear-two-body" : "linear-time-varying";
}

const char* to_string(SaturationMode v) {
  switch (v) {
    case SaturationMode::Clamp:
      return "clamp";
    case SaturationMode::Assert:
      return "assert";
    case SaturationMode::None:
      return "none";
  }
  return "?";
}

void SimConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("step must be positive");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration must be positive");
  if (!(record_every >= 0.0)) throw ConfigError("record_every must be nonnegative");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("integrator tolerances must be positive");
  if (!(stiffness_budget > 0.0)) throw ConfigError("stiffness_budget must be positive");
  whole_multiple(duration, step, "duration");
  if (record_every > 0.0) whole_multiple(record_every, step, "record_every");
}

double Trajectory::settling_time(double distance) const {
  if (samples.empty() || samples.back().x.in_plane_distance() >= distance) return -1.0;
  for (size_t i = samples.size(); i-- > 0;) {
    if (samples[i].x.in_plane_distance() >= distance) return samples[i + 1].t;
  }
  return samples.front().t;
}

double Trajectory::max_abs_z() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, std::abs(s.x.z));
  return m;
}

Vec3 Trajectory::max_abs_thrust() const {
  Vec3 m = Vec3::Zero();
  for (const auto& s : samples) m = m.cwiseMax(s.thrust.cwiseAbs());
  return m;
}

const TrajectorySample& Trajectory::at(double t) const {
  if (samples.empty()) throw std::out_of_range("empty trajectory");
  auto it = std::upper_bound(samples.begin(), samples.end(), t,
                             [](double v, const TrajectorySample& s) { return v < s.t; });
  if (it == samples.begin()) return samples.front();
  return *std::prev(it);
}

void write_csv_row(std::ostream& os, const TrajectorySample& s) {
  const double v[] = {s.t,         s.x.x,       s.x.y,       s.x.z,         s.x.vx,
                      s.x.vy,      s.x.vz,      s.thrust(0), s.thrust(1),   s.thrust(2),
                      s.disturbance, s.J_p,     s.J_q,       s.J_total};
  std::string line;
  for (size_t i = 0; i < std::size(v); ++i) {
    if (i) line += ',';
    line += format_g17(v[i]);
  }
  line += '\n';
  os << line;
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryCsvHeader << '\n';
  for (const auto& s : traj.samples) write_csv_row(os, s);
}

Trajectory read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader) throw std::runtime_error("unexpected trajectory header: " + line);
  Trajectory traj;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[14];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 14; ++i) {
      const auto res = std::from_chars(p, end, v[i]);
      if (res.ec != std::errc()) throw std::runtime_error("bad number on line " + std::to_string(lineno));
      p = res.ptr;
      if (i < 13) {
        if (p == end || *p != ',') throw std::runtime_error("too few columns on line " + std::to_string(lineno));
        ++p;
      }
    }
    if (p != end) throw std::runtime_error("too many columns on line " + std::to_string(lineno));
    TrajectorySample s;
    s.t = v[0];
    s.x = {v[1], v[2], v[3], v[4], v[5], v[6]};
    s.thrust = Vec3(v[7], v[8], v[9]);
    s.disturbance = v[10];
    s.J_p = v[11];
    s.J_q = v[12];
    s.J_total = v[13];
    if (!traj.samples.empty() && !(s.t > traj.samples.back().t))
      throw std::runtime_error("time not increasing on line " + std::to_string(lineno));
    traj.samples.push_back(s);
  }
  return traj;
}

DivergenceError::DivergenceError(double t, Trajectory partial)
    : std::runtime_error("simulation diverged at t = " + format_g17(t) + " s"), time_(t), partial_(std::move(partial)) {}

SaturationError::SaturationError(double t, int axis, double value)
    : std::runtime_error("thrust bound exceeded on axis " + std::to_string(axis) + " at t = " + format_g17(t) +
                         " s (u = " + format_g17(value) + " N)"),
      time_(t) {}

Mat3 lvlh_rotation(const Vec3& r, const Vec3& v) { return frame_of(r, v).R; }

InertialState init_inertial(const OrbitConfig& cfg, const RelativeState& x0) {
  cfg.validate();
  const double E = solve_kepler(cfg.mean_anomaly(0.0), cfg.e);
  const double b = std::sqrt(1.0 - cfg.e * cfg.e);
  const double rn = cfg.a * (1.0 - cfg.e * std::cos(E));
  InertialState s;
  s.r_target = Vec3(cfg.a * (std::cos(E) - cfg.e), cfg.a * b * std::sin(E), 0.0);
  s.v_target = std::sqrt(cfg.mu * cfg.a) / rn * Vec3(-std::sin(E), b * std::cos(E), 0.0);
  const Frame f = frame_of(s.r_target, s.v_target);
  const Vec3 pos(x0.x, x0.y, x0.z);
  const Vec3 vel(x0.vx, x0.vy, x0.vz);
  s.r_chaser = s.r_target + f.R * pos;
  s.v_chaser = s.v_target + f.R * (vel + Vec3(0.0, 0.0, f.omega).cross(pos));
  return s;
}

RelativeState lvlh_relative_state(const InertialState& s) {
  const Frame f = frame_of(s.r_target, s.v_target);
  return RelativeState::from_vector(relative(f, s.r_target, s.v_target, s.r_chaser, s.v_chaser));
}

TwoBodyRates two_body_derivative(const InertialState& s, const Vec3& u, double w, double m, double mu) {
  const Frame f = frame_of(s.r_target, s.v_target);
  const double rn = s.r_target.norm();
  const double rcn = s.r_chaser.norm();
  return {-mu / (rn * rn * rn) * s.r_target,
          -mu / (rcn * rcn * rcn) * s.r_chaser + f.R * (u + Vec3(0.0, 0.0, w)) / m};
}

double specific_energy(const Vec3& r, const Vec3& v, double mu) { return 0.5 * v.squaredNorm() - mu / r.norm(); }

Trajectory run(const OrbitConfig& cfg, const ChaserConfig& chaser, const RelativeState& x0, const Mat36& K,
               const DisturbanceSpec& dist, const SimConfig& sim, const CostWeights& weights) {
  cfg.validate();
  chaser.validate();
  dist.validate();
  sim.validate();
  if (!K.allFinite()) throw ConfigError("gain must be finite");
  if (!x0.finite()) throw ConfigError("initial state must be finite");
  const PlantModel plant = build_plant(cfg, chaser);
  const FeedbackLaw law{K, chaser.thrust_bounds(), sim.saturation};
  const int substeps = rk4_substeps(plant, K, sim);

  if (sim.plant == PlantMode::LinearTimeVarying) {
    const LinearSystem sys{&plant, &cfg, law, &dist, &weights};
    LinearState s{};
    Eigen::Map<Vec6>(s.data()) = x0.vector();
    return integrate<LinearState, LinearSystem, 6>(sys, s, sim, substeps);
  }
  const TwoBodySystem sys{cfg.mu, chaser.m, law, &dist, &weights};
  const InertialState init = init_inertial(cfg, x0);
  TwoBodyState s{};
  put(&s[0], init.r_target);
  put(&s[3], init.v_target);
  put(&s[6], init.r_chaser);
  put(&s[9], init.v_chaser);
  return integrate<TwoBodyState, TwoBodySystem, 12>(sys, s, sim, substeps);
}

std::vector<InertialState> propagate_target(const OrbitConfig& cfg, const SimConfig& sim, int periods) {
  cfg.validate();
  if (periods < 1) throw ConfigError("periods must be positive");
  if (!(sim.step > 0.0)) throw ConfigError("step must be positive");
  using S = std::array<double, 6>;
  const double mu = cfg.mu;
  auto sys = [mu](const S& s, S& ds, double) {
    const Vec3 r = seg(&s[0]);
    const double rn = r.norm();
    put(&ds[0], seg(&s[3]));
    put(&ds[3], -mu / (rn * rn * rn) * r);
  };
  const InertialState init = init_inertial(cfg, RelativeState{});
  S s{};
  put(&s[0], init.r_target);
  put(&s[3], init.v_target);
  std::vector<InertialState> out;
  out.push_back(init);
  const double T = orbital_period(cfg);
  const long long per = std::max(1LL, std::llround(T / sim.step));
  const double h = T / static_cast<double>(per);
  odeint::runge_kutta4<S> rk4;
  auto dopri = odeint::make_controlled(sim.abs_tol, sim.rel_tol, odeint::runge_kutta_dopri5<S>());
  for (int k = 0; k < periods; ++k) {
    const double t0 = k * T;
    if (sim.integrator == Integrator::Rk4Fixed) {
      for (long long i = 0; i < per; ++i) rk4.do_step(sys, s, t0 + static_cast<double>(i) * h, h);
    } else {
      odeint::integrate_adaptive(dopri, sys, s, t0, t0 + T, sim.step);
    }
    InertialState st;
    st.r_target = st.r_chaser = seg(&s[0]);
    st.v_target = st.v_chaser = seg(&s[3]);
    out.push_back(st);
  }
  return out;
}

CostComparison compare(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("compare: empty trajectory");
  const double ha = a.horizon();
  const double hb = b.horizon();
  if (std::abs(ha - hb) > 1e-9 * std::max(1.0, std::abs(ha))) throw std::invalid_argument("compare: horizon mismatch");
  CostComparison c;
  c.terminal_a = a.back().J_total;
  c.terminal_b = b.back().J_total;
  c.a_lower = c.terminal_a < c.terminal_b;
  c.points.reserve(a.samples.size());
  for (const auto& s : a.samples) {
    auto it = std::lower_bound(b.samples.begin(), b.samples.end(), s.t,
                               [](const TrajectorySample& x, double v) { return x.t < v; });
    double jb;
    if (it == b.samples.end()) {
      jb = b.back().J_total;
    } else if (it == b.samples.begin() || it->t == s.t) {
      jb = it->J_total;
    } else {
      const auto& hi = *it;
      const auto& lo = *std::prev(it);
      const double f = (s.t - lo.t) / (hi.t - lo.t);
      jb = lo.J_total + f * (hi.J_total - lo.J_total);
    }
    c.points.push_back({s.t, s.J_total, jb});
  }
  return c;
}

}  // namespace rdv
