#include <algorithm>
#include <cmath>

#include "cfuq/harness.hpp"

namespace cfuq::harness {

RunSummary summarize(std::span<const TrajectorySample<double>> leader,
                     std::span<const FollowerSample> follower, double post_start) {
  RunSummary s;
  s.post_injection_start = post_start;
  double sum_sq = 0;
  std::size_t n = 0;
  s.min_gap = follower.empty() ? 0 : INFINITY;
  for (std::size_t i = 0; i < follower.size(); ++i) {
    const auto& f = follower[i];
    if (f.time >= post_start - 1e-9) {
      sum_sq += f.accel * f.accel;
      ++n;
    }
    s.max_abs_jerk = std::max(s.max_abs_jerk, std::abs(f.jerk));
    if (i < leader.size()) s.min_gap = std::min(s.min_gap, leader[i].position - f.position);
  }
  s.accel_rms = n ? std::sqrt(sum_sq / double(n)) : 0;
  return s;
}

Trajectory scenario_leader(const ScenarioConfig& sc) {
  Trajectory raw;
  if (sc.leader_csv) {
    raw = load_leader(*sc.leader_csv);
  } else {
    SyntheticLeaderSpec spec = sc.synthetic;
    spec.t_s = sc.controller.t_s;
    raw = synthetic_leader(spec);
  }
  return smooth_acceleration(raw, sc.smoothing_width);
}

std::uint64_t window_seed(std::uint64_t seed, std::size_t window) {
  // splitmix64 finalizer over seed and window index
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (std::uint64_t(window) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::size_t samples_per_window(double window, double t_s) {
  const double ratio = window / t_s;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (!(window > 0) || std::abs(ratio - double(n)) > 1e-6 * ratio)
    throw ConfigError("estimator.window must be a positive multiple of t_s");
  if (n < 2) throw ConfigError("estimator.window must span at least 2 samples");
  return n;
}

/// Rolling prior and per-window SGLD shared by the closed and offline loops.
class WindowedEstimator {
 public:
  WindowedEstimator(const ScenarioConfig& sc, double t_s, const estimator::Theta<double>& start)
      : sc_(sc), t_s_(t_s), prior_{start, sc.lambda_initial} {}

  WindowEstimate run(std::size_t w, std::span<const double> accel, std::span<const double> demand,
                     double start, double end, const estimator::Theta<double>& nominal) {
    const auto batch = estimator::make_batch<double>(accel, demand, t_s_, start, end);
    estimator::SgldHyper<double> hyper = sc_.sgld;
    hyper.seed = window_seed(sc_.seed, w);
    hyper.minibatch = std::min(hyper.minibatch, batch.size());
    WindowEstimate rec{w, start, end, prior_, nominal, estimator::sgld_run(batch, prior_, hyper)};
    // A window without excitation says nothing new; keep the old prior.
    if (!rec.estimate.low_confidence) {
      const bool warmup = w + 1 < sc_.warmup_windows;
      prior_ = estimator::update_prior(rec.estimate, warmup ? sc_.lambda_initial : sc_.lambda);
    }
    return rec;
  }

 private:
  const ScenarioConfig& sc_;
  double t_s_;
  estimator::GaussianPrior<double> prior_;
};

estimator::Theta<double> nominals(const ControllerConfig<double>& cfg) {
  return {cfg.ratio_nominal, cfg.lag_nominal};
}

}  // namespace

RunReport run_closed_loop(const ScenarioConfig& sc) {
  validate(sc.controller);
  monitor::validate(sc.policy);
  const double t_s = sc.controller.t_s;
  const Trajectory leader = scenario_leader(sc);
  plant::check_sampling<double>(leader, t_s);
  const std::size_t ws = samples_per_window(sc.window, t_s);
  const std::size_t n_windows = (leader.size() - 1) / ws;
  if (n_windows == 0) throw ConfigError("leader trajectory shorter than one estimation window");
  for (const auto& [t, p] : sc.schedule.entries()) {
    if (t > leader.back().time)
      throw ConfigError("plant.schedule: switch at t=" + format_number(t) +
                        " lies beyond the trajectory");
  }

  RunReport report;
  report.policy = sc.policy;
  ControllerConfig<double> cfg = sc.controller;
  double tau = cfg.tau_star;  // time gap in effect, slewing toward cfg.tau_star
  const VehicleState<double> init = sc.init.value_or(plant::equilibrium_state(leader[0], cfg));
  plant::FollowerSimulator<double> sim(init, sc.schedule, sc.seed);
  WindowedEstimator estimator(sc, t_s, nominals(cfg));
  report.follower.reserve(n_windows * ws);

  std::vector<double> accel(ws), demand(ws);
  for (std::size_t w = 0; w < n_windows && !report.collision; ++w) {
    for (std::size_t i = 0; i < ws; ++i) {
      const auto& l = leader[w * ws + i];
      ControllerConfig<double> step_cfg = cfg;
      step_cfg.tau_star = tau;
      try {
        report.follower.push_back(sim.advance(l, step_cfg));
      } catch (const CollisionError& e) {
        report.collision = plant::CollisionRecord<double>{e.time(), e.what()};
        break;
      }
      accel[i] = report.follower.back().accel;
      demand[i] = report.follower.back().demanded_accel;
      const double max_move = sc.tau_slew_rate > 0 ? sc.tau_slew_rate * t_s : INFINITY;
      tau += std::clamp(cfg.tau_star - tau, -max_move, max_move);
    }
    if (report.collision) break;

    const double start = leader[w * ws].time;
    const double end = leader[(w + 1) * ws].time;
    report.estimates.push_back(estimator.run(w, accel, demand, start, end, nominals(cfg)));
    if (w < sc.warmup_windows) continue;

    const Estimate& est = report.estimates.back().estimate;
    DecisionRecord rec{w, end, monitor::evaluate(est, cfg, sc.policy), cfg, cfg, false};
    rec.after = monitor::apply_decision(cfg, rec.decision);
    if (rec.decision.anomaly) {
      ++report.summary.anomalies;
      if (!report.summary.first_anomaly_time) report.summary.first_anomaly_time = end;
    }
    if (sc.strategy_engine && rec.decision.action != monitor::Action::kNone) {
      cfg = rec.after;
      rec.applied = true;
    }
    report.decisions.push_back(std::move(rec));
  }

  report.leader.assign(leader.begin(), leader.begin() + report.follower.size());
  const RunSummary counts = report.summary;
  report.summary = summarize(report.leader, report.follower, sc.schedule.first_switch().value_or(0));
  report.summary.windows = report.estimates.size();
  report.summary.anomalies = counts.anomalies;
  report.summary.first_anomaly_time = counts.first_anomaly_time;
  return report;
}

std::vector<WindowEstimate> estimate_offline(std::span<const double> time,
                                             std::span<const double> accel,
                                             std::span<const double> demand,
                                             const ScenarioConfig& sc) {
  if (time.size() != accel.size() || time.size() != demand.size())
    throw ConfigError("estimate: time, accel and demand columns differ in length");
  if (time.size() < 2) throw ConfigError("estimate: need at least 2 samples");
  const double t_s = time[1] - time[0];
  for (std::size_t i = 1; i < time.size(); ++i) {
    if (!(std::abs(time[i] - time[i - 1] - t_s) <= 1e-6 * t_s))
      throw ConfigError("estimate: non-uniform sampling at sample " + std::to_string(i));
  }
  const std::size_t ws = samples_per_window(sc.window, t_s);
  const std::size_t n_windows = time.size() / ws;
  if (n_windows == 0) throw ConfigError("estimate: series shorter than one estimation window");

  const estimator::Theta<double> nominal = nominals(sc.controller);
  WindowedEstimator est(sc, t_s, nominal);
  std::vector<WindowEstimate> out;
  for (std::size_t w = 0; w < n_windows; ++w) {
    const std::size_t b = w * ws;
    out.push_back(est.run(w, accel.subspan(b, ws), demand.subspan(b, ws), time[b],
                          time[b] + double(ws) * t_s, nominal));
  }
  return out;
}

}  // namespace cfuq::harness
