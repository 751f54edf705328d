#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfuq/estimator.hpp"
#include "cfuq/monitor.hpp"
#include "cfuq/plant.hpp"
#include "cfuq/stability.hpp"
#include "cfuq/types.hpp"

namespace cfuq::harness {

using Trajectory = std::vector<TrajectorySample<double>>;
using FollowerSample = plant::FollowerSample<double>;
using Estimate = estimator::PosteriorEstimate<double>;
using Decision = monitor::StrategyDecision<double>;

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double v);

// ---------------------------------------------------------------- CSV

/// Numeric table with a header row. Parse failures carry line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;  // source line of each row

  std::optional<std::size_t> index(const std::string& column) const;
  /// Throws SchemaError listing every missing column.
  void require(std::span<const std::string> columns) const;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

Trajectory read_leader_csv(std::istream& in);
Trajectory load_leader(const std::filesystem::path& path);
void write_leader_csv(std::ostream& os, std::span<const TrajectorySample<double>> traj);
void write_follower_csv(std::ostream& os, std::span<const FollowerSample> samples);
std::vector<FollowerSample> read_follower_csv(std::istream& in);

// ---------------------------------------------------------------- leader

/// Convolves the acceleration with a normalized Gaussian of standard
/// deviation `kernel_width` seconds, truncated at +-3 sigma and renormalized
/// at the ends, then re-integrates speed and position (trapezoidal).
Trajectory smooth_acceleration(const Trajectory& traj, double kernel_width);

struct Segment {
  double duration;  // s
  double accel;     // m/s^2
};

/// Piecewise-constant acceleration profile. Time past the last segment is
/// driven at constant speed.
struct SyntheticLeaderSpec {
  double v0 = 25;
  double x0 = 0;
  double duration = 60;
  double t_s = 0.01;
  std::vector<Segment> segments;
};

/// The braking/acceleration pulse train used by the default scenario.
SyntheticLeaderSpec default_leader_spec();
Trajectory synthetic_leader(const SyntheticLeaderSpec& spec);

// ---------------------------------------------------------------- scenario

struct ScenarioConfig {
  std::optional<std::filesystem::path> leader_csv;
  SyntheticLeaderSpec synthetic = default_leader_spec();
  double smoothing_width = 1.0;
  std::optional<VehicleState<double>> init;  // default: equilibrium behind the leader
  ControllerConfig<double> controller;
  plant::PlantSchedule<double> schedule;
  double window = 2;
  std::size_t warmup_windows = 0;  // leading windows with the monitor inactive
  estimator::SgldHyper<double> sgld;
  double lambda_initial = 10;  // prior variance for the first window(s)
  double lambda = 1;           // prior variance for rolling updates
  monitor::MonitorPolicy<double> policy;
  double tau_slew_rate = 0.05;  // s of time gap per s; 0 = instantaneous
  bool strategy_engine = true;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
};

/// Default controller settings, a switch to (T_L, K_L) = (1.5, 0.5) at
/// t = 26 s, 2 s windows over 60 s.
ScenarioConfig default_scenario();

/// Flat document of dotted keys ("controller.k_s", "sgld.eta_1", ...) layered
/// over default_scenario(). Unknown keys and type mismatches are ConfigErrors.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::filesystem::path& path);
/// The effective configuration as a flat document (round-trips through
/// scenario_from_json).
nlohmann::json scenario_to_json(const ScenarioConfig& sc);

// ---------------------------------------------------------------- run

struct WindowEstimate {
  std::size_t window;
  double start;
  double end;
  estimator::GaussianPrior<double> prior;
  estimator::Theta<double> nominal;  // controller (K_L, T_L) in force
  Estimate estimate;
};

struct DecisionRecord {
  std::size_t window;
  double time;  // window end, when the decision takes effect
  Decision decision;
  ControllerConfig<double> before;
  ControllerConfig<double> after;
  bool applied;
};

struct RunSummary {
  double post_injection_start = 0;
  double accel_rms = 0;
  double max_abs_jerk = 0;
  double min_gap = 0;
  std::size_t windows = 0;
  std::size_t anomalies = 0;
  std::optional<double> first_anomaly_time;
};

struct RunReport {
  Trajectory leader;  // samples actually simulated
  std::vector<FollowerSample> follower;
  std::vector<WindowEstimate> estimates;
  std::vector<DecisionRecord> decisions;
  RunSummary summary;
  std::optional<plant::CollisionRecord<double>> collision;
  monitor::MonitorPolicy<double> policy;  // for the accepted-change bands
};

/// RMS acceleration from `post_start` on, max |jerk|, min gap.
RunSummary summarize(std::span<const TrajectorySample<double>> leader,
                     std::span<const FollowerSample> follower, double post_start);

/// Leader from the scenario (CSV or generator), smoothed.
Trajectory scenario_leader(const ScenarioConfig& sc);

/// Simulate, window, estimate, monitor and adjust, fully deterministic in
/// the scenario seed. Decisions land on window boundaries only.
RunReport run_closed_loop(const ScenarioConfig& sc);

/// Per-window SGLD seed derived from the scenario seed.
std::uint64_t window_seed(std::uint64_t seed, std::size_t window);

/// Windowed estimation over logged (accel, demand) series with the same
/// rolling prior as the closed loop.
std::vector<WindowEstimate> estimate_offline(std::span<const double> time,
                                             std::span<const double> accel,
                                             std::span<const double> demand,
                                             const ScenarioConfig& sc);

nlohmann::json estimate_record(const WindowEstimate& w);
nlohmann::json decision_record(const DecisionRecord& d);
nlohmann::json summary_record(const RunReport& r);

/// Writes leader.csv, follower.csv, estimates.jsonl, decisions.jsonl,
/// summary.json, estimate_bands.csv and overlay.csv into `dir`.
void emit_outputs(const RunReport& report, const std::filesystem::path& dir);

}  // namespace cfuq::harness
