// rendezvous: synthesis, simulation and comparison front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 infeasible design,
// 3 simulation divergence.

#include "rdv/experiment.hpp"
#include "rdv/report_io.hpp"
#include "rdv/scenario.hpp"
#include "rdv/simulator.hpp"
#include "rdv/synthesis.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace rdv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitDivergence = 3;

#ifndef RDV_DATA_DIR
#define RDV_DATA_DIR "data"
#endif

const fs::path kDefaultScenario = fs::path(RDV_DATA_DIR) / "rendezvous_scenario.yaml";
const fs::path kDefaultGains = fs::path(RDV_DATA_DIR) / "reference_gains.yaml";

struct Common {
  std::string scenario = kDefaultScenario.string();
  std::string out = ".";
  std::optional<double> duration;
  std::optional<double> step;
  std::optional<double> record_every;
};

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.duration) s.sim.duration = *c.duration;
  if (c.step) s.sim.step = *c.step;
  if (c.record_every) s.sim.record_every = *c.record_every;
  s.validate();
  return s;
}

fs::path out_dir(const Common& c) {
  fs::path d(c.out);
  fs::create_directories(d);
  return d;
}

std::string csv_text(const Trajectory& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

void print_report(const SynthesisReport& r) {
  std::cout << r.kind << ": " << sdp::to_string(r.status);
  if (r.has_gain()) std::cout << ", " << r.bound_name << " = " << fmt::format("{:.10g}", r.bound);
  std::cout << "\n";
}

int cmd_synth(const Common& c, const std::string& which) {
  const Scenario s = load(c);
  const fs::path dir = out_dir(c);
  const PlantModel plant = build_plant(s.orbit, s.chaser);
  const InPlaneModel in = split_in_plane(plant, s.orbit, s.chaser);
  const OutOfPlaneModel out = split_out_of_plane(plant, s.orbit, s.chaser);
  GainSet gains;
  bool ok = true;
  auto finish = [&](const SynthesisReport& r, const std::string& file) {
    write_file_atomic(dir / file, dump_report(r));
    print_report(r);
    if (!r.has_gain()) {
      std::cerr << "error: " << r.kind << " design is infeasible (" << sdp::to_string(r.status) << ")\n";
      ok = false;
    }
  };
  const Vec2 u_p(s.chaser.u_px_max, s.chaser.u_py_max);
  if (which == "in-plane" || which == "partially-independent") {
    const auto r = synth_in_plane(in, s.Q_p, s.R_p, s.p0(), u_p);
    finish(r, "in_plane_report.yaml");
    if (r.has_gain()) gains["K_p"] = r.K;
  }
  if (which == "out-of-plane" || which == "partially-independent") {
    const auto r = synth_out_of_plane(out, s.Q_q, s.R_q);
    finish(r, "out_of_plane_report.yaml");
    if (r.has_gain()) gains["K_q"] = r.K;
  }
  if (which == "coupled") {
    const auto r = synth_coupled(plant, full_factorization(in, out), s.Q(), s.R(), s.x0.vector(),
                                 s.chaser.thrust_bounds());
    finish(r, "coupled_report.yaml");
    if (r.has_gain()) gains["K"] = r.K;
  }
  if (which == "partially-independent" && ok) {
    gains["K_pic"] = assemble_partially_independent(gains["K_p"], gains["K_q"]);
    gains["K"] = gains["K_pic"];
  }
  if (!gains.empty()) write_file_atomic(dir / "gains.yaml", dump_gains(gains));
  return ok ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const Common& c, const std::string& gains_file, const std::string& key, const std::string& name) {
  const Scenario s = load(c);
  const Mat36 K = gain_3x6(load_gains(gains_file), key);
  const fs::path dir = out_dir(c);
  const fs::path csv = dir / (name + ".csv");
  try {
    const Trajectory t = run(s.orbit, s.chaser, s.x0, K, s.disturbance, s.sim, s.weights());
    write_file_atomic(csv, csv_text(t));
    const auto& last = t.back();
    std::cout << fmt::format("t = {:.1f} s: in-plane distance {:.6g} m, |z| {:.6g} m, J_total {:.6e} ({})\n", last.t,
                             last.x.in_plane_distance(), std::abs(last.x.z), last.J_total,
                             to_string(s.sim.saturation));
  } catch (const DivergenceError& e) {
    write_file_atomic(csv, csv_text(e.partial()));
    std::cerr << "error: " << e.what() << "; partial trajectory written to " << csv.string() << "\n";
    return kExitDivergence;
  }
  return kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b, const std::optional<std::string>& out) {
  std::ifstream fa(a), fb(b);
  if (!fa || !fb) throw ConfigError("cannot read trajectory files");
  const Trajectory ta = read_csv(fa);
  const Trajectory tb = read_csv(fb);
  CostComparison cmp;
  try {
    cmp = compare(ta, tb);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string text = dump_comparison(cmp, fs::path(a).stem().string(), fs::path(b).stem().string());
  std::cout << text;
  if (out) {
    fs::create_directories(*out);
    write_file_atomic(fs::path(*out) / "comparison.yaml", text);
  }
  return kExitOk;
}

int cmd_min_thrust(const Common& c) {
  const Scenario s = load(c);
  const PlantModel plant = build_plant(s.orbit, s.chaser);
  const InPlaneModel in = split_in_plane(plant, s.orbit, s.chaser);
  try {
    const MinThrustResult r = min_feasible_thrust(in, s.Q_p, s.R_p, s.p0());
    const fs::path dir = out_dir(c);
    write_file_atomic(dir / "min_thrust.yaml", dump_min_thrust(r));
    std::cout << fmt::format("min-feasible-thrust = {:.3f} N ({} probes)\n", r.u_min, r.probes.size());
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_reproduce(const Common& c, const std::string& gains_file) {
  const Scenario s = load(c);
  const GainSet reference = load_gains(gains_file);
  const fs::path dir = out_dir(c);
  const ExperimentResults r = run_experiment(s, reference);

  write_file_atomic(dir / "in_plane_report.yaml", dump_report(r.in_plane));
  write_file_atomic(dir / "out_of_plane_report.yaml", dump_report(r.out_of_plane));
  if (r.in_plane.has_gain() && r.out_of_plane.has_gain()) {
    GainSet g{{"K_p", r.in_plane.K}, {"K_q", r.out_of_plane.K}, {"K_pic", r.K_pic}, {"K", r.K_pic}};
    write_file_atomic(dir / "gains.yaml", dump_gains(g));
  }
  if (r.min_thrust) write_file_atomic(dir / "min_thrust.yaml", dump_min_thrust(*r.min_thrust));
  if (!r.pic.empty()) write_file_atomic(dir / "pic.csv", csv_text(r.pic));
  if (!r.cc.empty()) write_file_atomic(dir / "cc.csv", csv_text(r.cc));
  if (!r.linear_in_plane.empty()) write_file_atomic(dir / "linear_in_plane.csv", csv_text(r.linear_in_plane));
  if (!r.linear_out_of_plane.empty())
    write_file_atomic(dir / "linear_out_of_plane.csv", csv_text(r.linear_out_of_plane));
  if (!r.pic.empty() && !r.cc.empty())
    write_file_atomic(dir / "comparison.yaml", dump_comparison(r.comparison, "pic", "cc"));
  const std::string summary = summary_table(r);
  write_file_atomic(dir / "summary.md", summary);
  std::cout << summary;

  int code = kExitOk;
  for (const auto& f : r.failures) {
    std::cerr << "stage failed: " << f.stage << ": " << f.message << "\n";
    const int k = f.kind == StageFailure::Kind::Infeasible   ? kExitInfeasible
                  : f.kind == StageFailure::Kind::Divergence ? kExitDivergence
                                                             : kExitUsage;
    if (code == kExitOk) code = k;
  }
  return code;
}

void add_common(CLI::App* sub, Common& c, bool sim_flags) {
  sub->add_option("--scenario", c.scenario, "scenario file")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory");
  if (sim_flags) {
    sub->add_option("--duration", c.duration, "simulated time, s")->check(CLI::PositiveNumber);
    sub->add_option("--step", c.step, "integration step, s")->check(CLI::PositiveNumber);
    sub->add_option("--record-every", c.record_every, "sample spacing, s")->check(CLI::NonNegativeNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thrust-limited rendezvous controller synthesis and simulation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "solver and bisection diagnostics");

  Common c;
  std::string which;
  auto* synth = app.add_subcommand("synth", "solve a controller design");
  add_common(synth, c, false);
  synth->add_option("--which", which, "design")
      ->required()
      ->check(CLI::IsMember({"in-plane", "out-of-plane", "coupled", "partially-independent"}));

  std::string gains_file;
  std::string key = "K";
  std::string name = "trajectory";
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation to CSV");
  add_common(simulate, c, true);
  simulate->add_option("--gains", gains_file, "gain file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--key", key, "entry of the gain file holding the 3x6 gain");
  simulate->add_option("--name", name, "CSV file stem");

  std::string csv_a, csv_b;
  std::optional<std::string> compare_out;
  auto* cmp = app.add_subcommand("compare", "compare the costs of two trajectories");
  cmp->add_option("a", csv_a, "first trajectory CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", csv_b, "second trajectory CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", compare_out, "output directory");

  auto* min_thrust = app.add_subcommand("min-thrust", "smallest feasible in-plane thrust bound");
  add_common(min_thrust, c, false);

  std::string reference_gains = kDefaultGains.string();
  auto* reproduce = app.add_subcommand("reproduce-paper", "run the bundled experiment end to end");
  add_common(reproduce, c, true);
  reproduce->add_option("--gains", reference_gains, "reference gains (K_p, K_q, K_cc)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*synth) return cmd_synth(c, which);
    if (*simulate) return cmd_simulate(c, gains_file, key, name);
    if (*cmp) return cmd_compare(csv_a, csv_b, compare_out);
    if (*min_thrust) return cmd_min_thrust(c);
    if (*reproduce) return cmd_reproduce(c, reference_gains);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
