#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cfuq/estimator.hpp"
#include "cfuq/stability.hpp"
#include "cfuq/types.hpp"

// Strategy layer: boundary monitoring of posterior estimates, stability
// re-evaluation at the estimates, and controller adjustments (lower-level
// update, time gap increase, gain increase).
namespace cfuq::monitor {

using estimator::kLag;
using estimator::kRatio;
using estimator::Theta;

enum class Escalation { kNone, kTimeGap, kGains, kBoth };
enum class BoundaryMode { kMean, kInterval };
enum class Action {
  kNone,
  kUpdateLower,
  kUpdateLowerAndTimeGap,
  kUpdateLowerAndGains,
  kUpdateLowerAndBoth
};

inline std::string_view name(Action a) {
  switch (a) {
    case Action::kNone: return "NONE";
    case Action::kUpdateLower: return "UPDATE_LOWER";
    case Action::kUpdateLowerAndTimeGap: return "UPDATE_LOWER_AND_TIME_GAP";
    case Action::kUpdateLowerAndGains: return "UPDATE_LOWER_AND_GAINS";
    case Action::kUpdateLowerAndBoth: return "UPDATE_LOWER_AND_BOTH";
  }
  return "?";
}

inline std::string_view name(Escalation e) {
  switch (e) {
    case Escalation::kNone: return "NONE";
    case Escalation::kTimeGap: return "TIME_GAP";
    case Escalation::kGains: return "GAINS";
    case Escalation::kBoth: return "BOTH";
  }
  return "?";
}

inline Escalation parse_escalation(std::string_view s) {
  if (s == "NONE") return Escalation::kNone;
  if (s == "TIME_GAP") return Escalation::kTimeGap;
  if (s == "GAINS") return Escalation::kGains;
  if (s == "BOTH") return Escalation::kBoth;
  throw ConfigError("unknown escalation '" + std::string(s) +
                    "' (expected NONE, TIME_GAP, GAINS, BOTH)");
}

inline BoundaryMode parse_boundary_mode(std::string_view s) {
  if (s == "mean") return BoundaryMode::kMean;
  if (s == "interval") return BoundaryMode::kInterval;
  throw ConfigError("unknown boundary mode '" + std::string(s) + "' (expected mean, interval)");
}

inline bool includes_time_gap(Action a) {
  return a == Action::kUpdateLowerAndTimeGap || a == Action::kUpdateLowerAndBoth;
}
inline bool includes_gains(Action a) {
  return a == Action::kUpdateLowerAndGains || a == Action::kUpdateLowerAndBoth;
}

template <typename S>
struct MonitorPolicy {
  S accepted_change_lag = S(0.2);
  S accepted_change_ratio = S(0.15);
  Escalation escalation = Escalation::kTimeGap;
  S tau_star_escalated = S(2);
  Eigen::Vector3<S> gains_escalated = Eigen::Vector3<S>(S(3), S(3), S(-1.8));
  // Minimum half-widths of the re-centered parameter bounds.
  S bound_half_width_lag = S(0.1);
  S bound_half_width_ratio = S(0.15);
  BoundaryMode mode = BoundaryMode::kMean;
};

template <typename S>
void validate(const MonitorPolicy<S>& p) {
  if (!(p.accepted_change_lag > 0 && p.accepted_change_ratio > 0))
    throw ConfigError("monitor: accepted changes must be > 0");
  if (!(p.tau_star_escalated > 0)) throw ConfigError("monitor: tau_star_escalated must be > 0");
  if (!p.gains_escalated.allFinite()) throw ConfigError("monitor: escalated gains must be finite");
  if (!(p.bound_half_width_lag >= 0 && p.bound_half_width_ratio >= 0))
    throw ConfigError("monitor: bound half-widths must be >= 0");
}

struct BoundaryCheck {
  bool anomaly = false;
  bool lag = false;
  bool ratio = false;
};

/// Flags a parameter whose estimate leaves baseline +- accepted change. In
/// interval mode the whole 95% interval must lie outside the band.
template <typename S>
BoundaryCheck check_bounds(const estimator::PosteriorEstimate<S>& est,
                           const Theta<S>& baseline, const MonitorPolicy<S>& policy) {
  const auto outside = [&](int i, S change) {
    if (policy.mode == BoundaryMode::kInterval) {
      return est.summary.lower[i] > baseline[i] + change ||
             est.summary.upper[i] < baseline[i] - change;
    }
    return std::abs(est.mean()[i] - baseline[i]) > change;
  };
  BoundaryCheck c;
  c.lag = outside(kLag, policy.accepted_change_lag);
  c.ratio = outside(kRatio, policy.accepted_change_ratio);
  c.anomaly = c.lag || c.ratio;
  return c;
}

template <typename S>
struct StrategyDecision {
  bool anomaly = false;
  BoundaryCheck boundary;
  bool precedence = false;  // stability at the point estimate failed
  stability::StabilityVerdict<S> stability_verdict;
  Action action = Action::kNone;
  ControllerConfig<S> new_config;
  std::vector<std::string> rationale;
};

/// Degenerate bounds at a point: the stability conditions for exactly this
/// (K_L, T_L).
template <typename S>
ControllerConfig<S> at_point(ControllerConfig<S> cfg, const Theta<S>& theta) {
  cfg.lag_bounds = {theta[kLag], theta[kLag]};
  cfg.ratio_bounds = {theta[kRatio], theta[kRatio]};
  return cfg;
}

/// Lower-level nominals set to the estimate; bounds re-centered on it.
template <typename S>
ControllerConfig<S> recentered(ControllerConfig<S> cfg,
                               const estimator::PosteriorEstimate<S>& est,
                               const MonitorPolicy<S>& policy) {
  constexpr S kFloor = S(1e-3);
  const Theta<S>& m = est.mean();
  const Theta<S> ci_half = (est.summary.upper - est.summary.lower) / S(2);
  const S half_lag = std::max(policy.bound_half_width_lag, ci_half[kLag]);
  const S half_ratio = std::max(policy.bound_half_width_ratio, ci_half[kRatio]);
  cfg.lag_nominal = m[kLag];
  cfg.ratio_nominal = m[kRatio];
  cfg.lag_bounds = {std::max(kFloor, m[kLag] - half_lag), m[kLag] + half_lag};
  cfg.ratio_bounds = {std::max(kFloor, m[kRatio] - half_ratio), m[kRatio] + half_ratio};
  return cfg;
}

namespace detail {

template <typename S>
bool wants_time_gap(const MonitorPolicy<S>& p) {
  return p.escalation == Escalation::kTimeGap || p.escalation == Escalation::kBoth;
}
template <typename S>
bool wants_gains(const MonitorPolicy<S>& p) {
  return p.escalation == Escalation::kGains || p.escalation == Escalation::kBoth;
}

/// Gains after escalation: each component takes the escalated value unless
/// the current one is already larger in magnitude.
template <typename S>
Eigen::Vector3<S> escalated_gains(const Eigen::Vector3<S>& current,
                                  const Eigen::Vector3<S>& target) {
  Eigen::Vector3<S> k = current;
  for (int i = 0; i < 3; ++i)
    if (std::abs(target[i]) > std::abs(current[i])) k[i] = target[i];
  return k;
}

inline Action action_for(bool time_gap, bool gains) {
  if (time_gap && gains) return Action::kUpdateLowerAndBoth;
  if (time_gap) return Action::kUpdateLowerAndTimeGap;
  if (gains) return Action::kUpdateLowerAndGains;
  return Action::kUpdateLower;
}

template <typename S>
std::string fmt(S v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", double(v));
  return buf;
}

}  // namespace detail

/// Strategy selection for one posterior estimate against the controller in
/// force. The boundary baseline is the controller's current nominals.
template <typename S>
StrategyDecision<S> evaluate(const estimator::PosteriorEstimate<S>& est,
                             const ControllerConfig<S>& cfg, const MonitorPolicy<S>& policy) {
  StrategyDecision<S> d;
  d.new_config = cfg;
  const Theta<S> baseline(cfg.ratio_nominal, cfg.lag_nominal);
  const Theta<S>& m = est.mean();

  if (est.low_confidence) {
    d.stability_verdict = stability::evaluate(cfg);
    d.rationale.push_back("low-confidence estimate (insufficient excitation): no action");
    return d;
  }

  d.boundary = check_bounds(est, baseline, policy);
  d.rationale.push_back("estimate K_L=" + detail::fmt(m[kRatio]) + " T_L=" + detail::fmt(m[kLag]) +
                        " vs nominal K_L=" + detail::fmt(baseline[kRatio]) +
                        " T_L=" + detail::fmt(baseline[kLag]));
  if (d.boundary.ratio) d.rationale.push_back("K_L outside accepted band");
  if (d.boundary.lag) d.rationale.push_back("T_L outside accepted band");

  const auto point = stability::evaluate(at_point(cfg, m));
  const bool time_open = detail::wants_time_gap(policy) && cfg.tau_star < policy.tau_star_escalated;
  const Eigen::Vector3<S> gains_target = detail::escalated_gains(cfg.gains, policy.gains_escalated);
  const bool gains_open = detail::wants_gains(policy) && gains_target != cfg.gains;
  const bool escalation_open = time_open || gains_open;

  d.precedence = !point.stable() && escalation_open;
  if (!point.stable()) {
    d.rationale.push_back(escalation_open
                              ? "stability conditions fail at the point estimate (precedence)"
                              : "stability conditions fail at the point estimate; escalation exhausted");
  }
  d.anomaly = d.boundary.anomaly || d.precedence;
  if (!d.anomaly) {
    d.stability_verdict = point;
    d.rationale.push_back("no anomaly: keep controller");
    return d;
  }

  ControllerConfig<S> candidate = recentered(cfg, est, policy);
  const auto candidate_verdict = stability::evaluate(candidate);
  d.stability_verdict = stability::combine(candidate_verdict, point);

  if (d.stability_verdict.stable()) {
    d.action = Action::kUpdateLower;
    d.rationale.push_back("candidate bounds stable: update lower-level parameters");
  } else if (!escalation_open) {
    d.action = Action::kUpdateLower;
    d.rationale.push_back(policy.escalation == Escalation::kNone
                              ? "unstable; escalation disabled by policy: update lower-level only"
                              : "unstable; escalation exhausted: update lower-level only");
  } else {
    if (time_open) {
      candidate.tau_star = policy.tau_star_escalated;
      d.rationale.push_back("unstable: raise time gap to " + detail::fmt(policy.tau_star_escalated));
    }
    if (gains_open) {
      candidate.gains = gains_target;
      d.rationale.push_back("unstable: raise control gain magnitudes");
    }
    d.action = detail::action_for(time_open, gains_open);
  }
  d.new_config = candidate;
  return d;
}

/// Config after the decision; rejects candidates that break ControllerConfig
/// invariants.
template <typename S>
ControllerConfig<S> apply_decision(const ControllerConfig<S>& cfg,
                                   const StrategyDecision<S>& decision) {
  if (decision.action == Action::kNone) return cfg;
  if (auto v = config_violation(decision.new_config))
    throw ConfigError("decision rejected: " + *v);
  return decision.new_config;
}

}  // namespace cfuq::monitor
