// Command line front end: simulate, estimate, stability, synth.
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfuq/harness.hpp"

namespace {

using namespace cfuq;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kCollision = 3;
constexpr int kIo = 4;

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> window;
  bool no_strategy = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "scenario file (flat JSON of dotted keys)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--window", c.window, "estimation window length [s]");
  cmd->add_flag("--no-strategy", c.no_strategy, "log decisions without applying them");
}

harness::ScenarioConfig scenario(const Common& c) {
  harness::ScenarioConfig sc =
      c.config ? harness::load_scenario(*c.config) : harness::default_scenario();
  if (c.seed) sc.seed = *c.seed;
  if (c.out) sc.out_dir = *c.out;
  if (c.window) {
    if (!(*c.window > 0)) throw ConfigError("--window must be > 0");
    sc.window = *c.window;
  }
  if (c.no_strategy) sc.strategy_engine = false;
  return sc;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!(out << j.dump(2) << '\n')) throw IoError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int cmd_simulate(const Common& c) {
  const auto sc = scenario(c);
  const auto report = harness::run_closed_loop(sc);
  harness::emit_outputs(report, sc.out_dir);
  write_json(sc.out_dir / "config.json", harness::scenario_to_json(sc));
  const auto& s = report.summary;
  std::cout << "windows " << s.windows << ", anomalies " << s.anomalies << ", first anomaly "
            << (s.first_anomaly_time ? harness::format_number(*s.first_anomaly_time) : "none")
            << ", post-switch accel RMS " << harness::format_number(s.accel_rms) << "\n";
  if (report.collision) {
    std::cerr << "collision at t=" << report.collision->time << ": " << report.collision->message
              << "\n";
    return kCollision;
  }
  return kOk;
}

int cmd_estimate(const Common& c, const std::string& input) {
  const auto sc = scenario(c);
  const auto table = harness::read_csv_file(input);
  const std::array<std::string, 3> cols{"time", "accel", "demanded_accel"};
  table.require(cols);
  const auto time = table.column("time"), accel = table.column("accel"),
             demand = table.column("demanded_accel");
  const auto windows = harness::estimate_offline(time, accel, demand, sc);

  make_dir(sc.out_dir);
  const auto path = sc.out_dir / "estimates.jsonl";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& w : windows) {
    out << harness::estimate_record(w).dump() << '\n';
    const auto& m = w.estimate.mean();
    std::cout << "window " << w.window << " [" << w.start << ", " << w.end << ")  K_L "
              << m[0] << "  T_L " << m[1] << (w.estimate.low_confidence ? "  (low confidence)" : "")
              << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
  return kOk;
}

struct Sweep {
  std::string x = "k_s", y = "k_v";
  std::vector<double> x_range{0, 5, 101}, y_range{0, 5, 101};
  bool enabled = false;
};

stability::AxisSpec<double> axis(const std::string& param, const std::vector<double>& r) {
  if (r.size() != 3 || !(r[2] >= 1) || r[2] != std::floor(r[2]))
    throw ConfigError("sweep range must be: lo hi n");
  return {stability::parse_sweep_param(param),
          stability::uniform_grid(r[0], r[1], static_cast<std::size_t>(r[2]))};
}

int cmd_stability(const Common& c, const Sweep& sw) {
  const auto sc = scenario(c);
  const auto v = stability::evaluate(sc.controller);
  std::cout << "locally stable: " << (v.locally_stable ? "yes" : "no")
            << "\nstring stable: " << (v.string_stable ? "yes" : "no") << "\nmargins:";
  for (int i = 0; i < 8; ++i) std::cout << ' ' << harness::format_number(v.margins[i]);
  std::cout << "\n";
  if (!sw.enabled) return kOk;

  const auto map = stability::region(axis(sw.x, sw.x_range), axis(sw.y, sw.y_range), sc.controller);
  make_dir(sc.out_dir);
  const auto path = sc.out_dir / "region.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  stability::write_region_csv(out, map, [](double x) { return harness::format_number(x); });
  if (!out) throw IoError("write failed: " + path.string());
  std::cout << "region: " << map.stable_count() << " of " << map.cells.size()
            << " cells stable, written to " << path.string() << "\n";
  return kOk;
}

int cmd_synth(const Common& c, double smoothing) {
  const auto sc = scenario(c);
  auto spec = sc.synthetic;
  spec.t_s = sc.controller.t_s;
  const auto traj = harness::smooth_acceleration(harness::synthetic_leader(spec), smoothing);
  make_dir(sc.out_dir);
  const auto path = sc.out_dir / "leader.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  harness::write_leader_csv(out, traj);
  if (!out) throw IoError("write failed: " + path.string());
  std::cout << traj.size() << " samples written to " << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop GLVD estimation, stability monitoring and controller adaptation"};
  app.require_subcommand(1);

  Common sim_opts, est_opts, stab_opts, synth_opts;
  auto* sim = app.add_subcommand("simulate", "run the closed loop and write all artifacts");
  add_common(sim, sim_opts);

  auto* est = app.add_subcommand("estimate", "windowed SGLD on a CSV of (time, accel, demanded_accel)");
  add_common(est, est_opts);
  std::string input;
  est->add_option("--input", input, "CSV with time, accel and demanded_accel columns")->required();

  auto* stab = app.add_subcommand("stability", "stability verdict and optional region sweep");
  add_common(stab, stab_opts);
  Sweep sweep;
  stab->add_flag("--sweep", sweep.enabled, "write region.csv over a 2-D parameter grid");
  stab->add_option("--x", sweep.x, "first sweep parameter (k_s, k_v, k_a, tau_star)");
  stab->add_option("--y", sweep.y, "second sweep parameter");
  stab->add_option("--x-range", sweep.x_range, "lo hi n")->expected(3);
  stab->add_option("--y-range", sweep.y_range, "lo hi n")->expected(3);

  auto* synth = app.add_subcommand("synth", "generate the synthetic leader trajectory");
  add_common(synth, synth_opts);
  double smoothing = 0;
  synth->add_option("--smooth", smoothing, "Gaussian smoothing width [s]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*est) return cmd_estimate(est_opts, input);
    if (*stab) return cmd_stability(stab_opts, sweep);
    if (*synth) return cmd_synth(synth_opts, smoothing);
  } catch (const CollisionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCollision;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
