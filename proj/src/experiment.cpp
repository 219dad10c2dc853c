#include "rdv/experiment.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rdv {

namespace {

constexpr double kRefMeanMotion = 1.059e-3;
constexpr double kRefPeriod = 5931.53;
constexpr double kRefGamma = 1.000778383;
constexpr double kRefMinThrustLow = 6.6;
constexpr double kRefMinThrustHigh = 7.0;
constexpr double kRendezvousDistance = 10.0;
constexpr double kRendezvousTime = 5000.0;

double max_rel_dev(const MatrixXd& K, const MatrixXd& ref) {
  if (K.rows() != ref.rows() || K.cols() != ref.cols()) return INFINITY;
  return ((K - ref).cwiseAbs().array() / ref.cwiseAbs().array()).maxCoeff();
}

bool within_bounds(const Trajectory& t, const Vec3& bounds) {
  return (t.max_abs_thrust().array() <= bounds.array() * (1.0 + 1e-12)).all();
}

/// Horizon of ten periods rounded up to whole steps.
SimConfig linear_config(double period, SaturationMode sat) {
  SimConfig sim;
  sim.plant = PlantMode::LinearTimeVarying;
  sim.saturation = sat;
  sim.step = 1.0;
  sim.duration = std::ceil(10.0 * period);
  return sim;
}

template <class F>
void stage(ExperimentResults& r, const char* name, F&& f) {
  try {
    f();
  } catch (const InfeasibleError& e) {
    r.failures.push_back({name, e.what(), StageFailure::Kind::Infeasible});
  } catch (const DivergenceError& e) {
    r.failures.push_back({name, e.what(), StageFailure::Kind::Divergence});
  } catch (const std::exception& e) {
    r.failures.push_back({name, e.what(), StageFailure::Kind::Other});
  }
}

}  // namespace

ExperimentResults run_experiment(const Scenario& sc, const GainSet& reference, const SynthesisOptions& opts) {
  sc.validate();
  ExperimentResults r;
  r.saturation = sc.sim.saturation;
  r.mean_motion = mean_motion(sc.orbit);
  r.period = orbital_period(sc.orbit);
  const PlantModel plant = build_plant(sc.orbit, sc.chaser);
  const InPlaneModel in = split_in_plane(plant, sc.orbit, sc.chaser);
  const OutOfPlaneModel out = split_out_of_plane(plant, sc.orbit, sc.chaser);
  r.K_cc = gain_3x6(reference, "K_cc");

  r.in_plane = synth_in_plane(in, sc.Q_p, sc.R_p, sc.p0(), Vec2(sc.chaser.u_px_max, sc.chaser.u_py_max), opts);
  if (!r.in_plane.has_gain()) r.failures.push_back({"in-plane synthesis", sdp::to_string(r.in_plane.status), StageFailure::Kind::Infeasible});
  r.out_of_plane = synth_out_of_plane(out, sc.Q_q, sc.R_q, opts);
  if (!r.out_of_plane.has_gain()) r.failures.push_back(
        {"out-of-plane synthesis", sdp::to_string(r.out_of_plane.status), StageFailure::Kind::Infeasible});
  const bool have_gains = r.in_plane.has_gain() && r.out_of_plane.has_gain();
  if (have_gains) r.K_pic = assemble_partially_independent(r.in_plane.K, r.out_of_plane.K);

  stage(r, "min-thrust", [&] {
    MinThrustOptions mo;
    mo.solver = opts.solver;
    r.min_thrust = min_feasible_thrust(in, sc.Q_p, sc.R_p, sc.p0(), mo);
  });

  if (have_gains) {
    stage(r, "linear in-plane run", [&] {
      RelativeState x0 = sc.x0;
      x0.z = x0.vz = 0.0;
      r.linear_in_plane =
          run(sc.orbit, sc.chaser, x0, r.K_pic, {}, linear_config(r.period, SaturationMode::None), sc.weights());
    });
    stage(r, "linear out-of-plane run", [&] {
      r.linear_out_of_plane = run(sc.orbit, sc.chaser, RelativeState{}, r.K_pic, sc.disturbance,
                                  linear_config(r.period, SaturationMode::None), sc.weights());
    });
    stage(r, "pic simulation", [&] { r.pic = run(sc.orbit, sc.chaser, sc.x0, r.K_pic, sc.disturbance, sc.sim, sc.weights()); });
  }
  stage(r, "cc simulation", [&] { r.cc = run(sc.orbit, sc.chaser, sc.x0, r.K_cc, sc.disturbance, sc.sim, sc.weights()); });
  if (!r.pic.empty() && !r.cc.empty()) stage(r, "compare", [&] { r.comparison = compare(r.pic, r.cc); });

  auto add = [&](int id, std::string name, bool pass, std::string detail, bool info = false) {
    r.criteria.push_back({id, std::move(name), pass, info, std::move(detail)});
  };

  {
    const double dn = std::abs(r.mean_motion - kRefMeanMotion) / kRefMeanMotion;
    const double dT = std::abs(r.period - kRefPeriod) / kRefPeriod;
    add(1, "orbit constants", dn <= 5e-4 && dT <= 5e-4,
        fmt::format("n = {:.7e} rad/s, T = {:.3f} s", r.mean_motion, r.period));
  }
  if (r.out_of_plane.has_gain()) {
    const double dg = std::abs(r.out_of_plane.bound - kRefGamma) / kRefGamma;
    add(2, "H-infinity level", dg <= 1e-3 && r.out_of_plane.solve_seconds < 5.0,
        fmt::format("gamma = {:.9f} (min {:.9f}), {:.3f} s", r.out_of_plane.bound, r.out_of_plane.gamma_min,
                    r.out_of_plane.solve_seconds));
  } else {
    add(2, "H-infinity level", false, "no out-of-plane design");
  }
  if (r.min_thrust) {
    const double u = r.min_thrust->u_min;
    add(3, "minimum feasible thrust", u >= kRefMinThrustLow && u <= kRefMinThrustHigh && r.min_thrust->monotone(),
        fmt::format("{:.3f} N after {} probes", u, r.min_thrust->probes.size()));
  } else {
    add(3, "minimum feasible thrust", false, "bisection failed");
  }
  if (have_gains && reference.count("K_p") && reference.count("K_q")) {
    const double dp = max_rel_dev(r.in_plane.K, reference.at("K_p"));
    const double dq = max_rel_dev(r.out_of_plane.K, reference.at("K_q"));
    add(4, "gain regression", dp <= 0.25 && dq <= 0.25,
        fmt::format("max entry deviation K_p {:.1f}%, K_q {:.1f}%", 100 * dp, 100 * dq), true);
  }
  if (have_gains) {
    const auto& a = r.in_plane.verification;
    const auto& b = r.out_of_plane.verification;
    const double res = std::max(a.worst_residual(), b.worst_residual());
    add(5, "certificate coherence",
        a.pre_schur_max_eigenvalue < 0 && b.pre_schur_max_eigenvalue < 0 && res <= 1e-7,
        fmt::format("pre-Schur lambda_max {:.3e} / {:.3e}, worst LMI residual {:.3e}", a.pre_schur_max_eigenvalue,
                    b.pre_schur_max_eigenvalue, res));
  }
  if (!r.linear_in_plane.empty()) {
    const double Jp = r.linear_in_plane.back().J_p;
    const Vec3 f = r.linear_in_plane.max_abs_thrust();
    add(6, "guaranteed-cost soundness",
        Jp <= 1.01 * r.in_plane.bound && f(0) <= sc.chaser.u_px_max && f(1) <= sc.chaser.u_py_max,
        fmt::format("J_p = {:.5e} vs rho = {:.5e}; max |f_x|, |f_y| = {:.4f}, {:.4f} N", Jp, r.in_plane.bound,
                    f(0), f(1)));
  }
  if (!r.linear_out_of_plane.empty()) {
    const auto& s = r.linear_out_of_plane.back();
    const double ratio = std::sqrt(s.J_q / s.disturbance_energy);
    add(7, "H-infinity soundness", ratio <= r.out_of_plane.bound + 0.05,
        fmt::format("||z_q|| / ||w_q|| = {:.6f} vs gamma = {:.6f}", ratio, r.out_of_plane.bound));
  }
  if (!r.pic.empty() && !r.cc.empty()) {
    const double ts = r.pic.settling_time(kRendezvousDistance);
    const double tc = r.cc.settling_time(kRendezvousDistance);
    const bool pic_ok = ts >= 0.0 && ts <= kRendezvousTime && within_bounds(r.pic, sc.chaser.thrust_bounds());
    const bool cc_fails = !(tc >= 0.0 && tc <= kRendezvousTime);
    add(8, "nonlinear rendezvous", pic_ok && cc_fails,
        fmt::format("distance at {:.0f} s: pic {:.3f} m, cc {:.3f} m; pic below {:.0f} m from t = {:.1f} s",
                    kRendezvousTime, r.pic.at(kRendezvousTime).x.in_plane_distance(),
                    r.cc.at(kRendezvousTime).x.in_plane_distance(), kRendezvousDistance, ts));
    const double zp = r.pic.max_abs_z();
    const double zc = r.cc.max_abs_z();
    add(9, "disturbance rejection", zc >= 10.0 * zp && r.pic.max_abs_thrust()(2) <= sc.chaser.u_q_max,
        fmt::format("max |z|: pic {:.4e} m, cc {:.4e} m; max |f_z| pic {:.4f} N", zp, zc,
                    r.pic.max_abs_thrust()(2)));
    const double jp = r.pic.at(kRendezvousTime).J_total;
    const double jc = r.cc.at(kRendezvousTime).J_total;
    add(10, "cost comparison", jp < jc, fmt::format("J_total at {:.0f} s: pic {:.5e}, cc {:.5e}", kRendezvousTime, jp, jc));
  }
  return r;
}

std::string summary_table(const ExperimentResults& r) {
  std::string s;
  s += "# Rendezvous experiment summary\n\n";
  s += fmt::format("- mean motion n = {:.7e} rad/s\n", r.mean_motion);
  s += fmt::format("- period T = {:.3f} s\n", r.period);
  if (r.in_plane.has_gain()) s += fmt::format("- in-plane cost bound rho = {:.6e}\n", r.in_plane.bound);
  if (r.out_of_plane.has_gain()) s += fmt::format("- H-infinity level gamma = {:.9f}\n", r.out_of_plane.bound);
  if (r.min_thrust) s += fmt::format("- min-feasible-thrust = {:.3f} N\n", r.min_thrust->u_min);
  if (!r.pic.empty() && !r.cc.empty()) {
    const double jp = r.pic.at(kRendezvousTime).J_total;
    const double jc = r.cc.at(kRendezvousTime).J_total;
    s += fmt::format("- J_total(pic) {} J_total(cc) at {:.0f} s ({:.5e} vs {:.5e})\n", jp < jc ? "<" : ">=",
                     kRendezvousTime, jp, jc);
  }
  s += fmt::format("- thrust saturation in the nonlinear runs: {}\n\n", to_string(r.saturation));
  s += "| # | criterion | result | detail |\n|---|---|---|---|\n";
  for (const auto& c : r.criteria) {
    const char* verdict = c.informational ? (c.pass ? "PASS (info)" : "FAIL (info)") : (c.pass ? "PASS" : "FAIL");
    s += fmt::format("| {} | {} | {} | {} |\n", c.id, c.name, verdict, c.detail);
  }
  if (!r.failures.empty()) {
    s += "\n## Stage failures\n\n";
    for (const auto& f : r.failures) s += fmt::format("- {}: {}\n", f.stage, f.message);
  }
  return s;
}

}  // namespace rdv
