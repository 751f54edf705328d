#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cfuq/types.hpp"

// Leader-follower longitudinal simulation: a linear constant-time-gap
// feedback law on top of first-order lag (GLVD) actuation, integrated with
// explicit Euler.
namespace cfuq::plant {

/// (spacing error, speed difference, acceleration).
template <typename S>
using StateVector = Eigen::Vector3<S>;

template <typename S>
StateVector<S> state_vector(const VehicleState<S>& ego,
                            const TrajectorySample<S>& leader,
                            const ControllerConfig<S>& cfg) {
  const S gap = leader.position - ego.position;
  if (!(gap > 0)) {
    throw CollisionError("collision: non-positive gap " + std::to_string(double(gap)),
                         double(leader.time));
  }
  return StateVector<S>(gap - (cfg.delta_star + cfg.tau_star * ego.speed),
                        leader.speed - ego.speed, ego.accel);
}

/// k . x with no saturation applied.
template <typename S>
S feedback_demand(const StateVector<S>& x, const ControllerConfig<S>& cfg) {
  if (!x.allFinite()) throw DomainError("control: non-finite state");
  return cfg.gains.dot(x);
}

template <typename S>
S control_command(const StateVector<S>& x, const ControllerConfig<S>& cfg) {
  return std::clamp(feedback_demand(x, cfg), cfg.u_min, cfg.u_max);
}

/// Lower-level conversion of the demanded acceleration into the actuator
/// input, compensating for the nominal realization ratio.
template <typename S>
S actuator_command(S u, const ControllerConfig<S>& cfg) {
  return std::clamp(u / cfg.ratio_nominal, cfg.u_min, cfg.u_max);
}

template <typename S>
S glvd_jerk(S accel, S u, const PlantParams<S>& params, S eps) {
  if (!(params.lag > 0)) throw DomainError("glvd: T_L must be > 0");
  return (-accel + params.ratio * u) / params.lag + eps;
}

template <typename S>
struct StepOutcome {
  VehicleState<S> state;  // state at t + t_s
  S command;              // actuator command applied over [t, t + t_s)
  S jerk;                 // realized jerk over [t, t + t_s)
};

/// `draw` is a standard normal variate, scaled by params.sigma_eps.
template <typename S>
StepOutcome<S> step(const VehicleState<S>& ego, const TrajectorySample<S>& leader,
                    const ControllerConfig<S>& cfg, const PlantParams<S>& params,
                    S draw) {
  const S u = control_command(state_vector(ego, leader, cfg), cfg);
  const S command = actuator_command(u, cfg);
  const S jerk = glvd_jerk(ego.accel, command, params, params.sigma_eps * draw);

  VehicleState<S> next;
  next.accel = ego.accel + cfg.t_s * jerk;
  next.speed = std::max(S(0), ego.speed + cfg.t_s * ego.accel);
  next.position = ego.position + cfg.t_s * ego.speed;
  next.demanded_accel = command;
  return {next, command, jerk};
}

/// Piecewise-constant plant parameters; entry i is active from its time until
/// the next entry.
template <typename S>
class PlantSchedule {
 public:
  using Entry = std::pair<S, PlantParams<S>>;

  PlantSchedule() : entries_{{S(0), PlantParams<S>{}}} {}
  explicit PlantSchedule(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ConfigError("plant schedule: empty");
    if (entries_.front().first != S(0))
      throw ConfigError("plant schedule: first entry must start at time 0");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      validate(entries_[i].second);
      if (i > 0 && !(entries_[i].first > entries_[i - 1].first))
        throw ConfigError("plant schedule: times must be strictly increasing");
    }
  }

  /// `tolerance` absorbs floating error in sample times built as k * t_s.
  const PlantParams<S>& at(S time, S tolerance = S(1e-9)) const {
    std::size_t active = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].first <= time + tolerance) active = i;
    }
    return entries_[active].second;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  /// Time of the first parameter change, if the schedule has one.
  std::optional<S> first_switch() const {
    if (entries_.size() < 2) return std::nullopt;
    return entries_[1].first;
  }

 private:
  std::vector<Entry> entries_;
};

template <typename S>
struct FollowerSample {
  S time;
  S position;
  S speed;
  S accel;
  S jerk;
  S demanded_accel;
};

/// Stateful stepping of one follower. Owns its random generator so that a
/// given seed fixes the whole noise sequence.
template <typename S>
class FollowerSimulator {
 public:
  FollowerSimulator(const VehicleState<S>& init, PlantSchedule<S> schedule,
                    std::uint64_t seed)
      : state_(init), schedule_(std::move(schedule)), rng_(seed) {}

  /// Computes the command at the leader sample time, records the current
  /// state with it and advances one step.
  FollowerSample<S> advance(const TrajectorySample<S>& leader,
                            const ControllerConfig<S>& cfg) {
    const PlantParams<S>& params = schedule_.at(leader.time, cfg.t_s * S(1e-6));
    const S draw = normal_(rng_);
    const StepOutcome<S> out = step(state_, leader, cfg, params, draw);
    FollowerSample<S> sample{leader.time,  state_.position, state_.speed,
                             state_.accel, out.jerk,        out.command};
    state_ = out.state;
    return sample;
  }

  const VehicleState<S>& state() const { return state_; }

 private:
  VehicleState<S> state_;
  PlantSchedule<S> schedule_;
  std::mt19937_64 rng_;
  std::normal_distribution<S> normal_{S(0), S(1)};
};

template <typename S>
struct CollisionRecord {
  S time;
  std::string message;
};

template <typename S>
struct SimulationResult {
  std::vector<FollowerSample<S>> follower;
  std::optional<CollisionRecord<S>> collision;
};

/// Throws DomainError unless samples are spaced by t_s (relative tolerance
/// 1e-6) with strictly increasing time.
template <typename S>
void check_sampling(std::span<const TrajectorySample<S>> leader, S t_s) {
  for (std::size_t i = 1; i < leader.size(); ++i) {
    const S dt = leader[i].time - leader[i - 1].time;
    if (!(std::abs(dt - t_s) <= S(1e-6) * t_s)) {
      throw DomainError("mismatched sampling rate at sample " + std::to_string(i) +
                        ": dt=" + std::to_string(double(dt)) +
                        " expected " + std::to_string(double(t_s)));
    }
  }
}

/// Equilibrium follower for a leader sample: zero spacing error, matched speed.
template <typename S>
VehicleState<S> equilibrium_state(const TrajectorySample<S>& leader,
                                  const ControllerConfig<S>& cfg) {
  VehicleState<S> s;
  s.speed = leader.speed;
  s.position = leader.position - (cfg.delta_star + cfg.tau_star * leader.speed);
  return s;
}

/// Runs the follower against every leader sample. A collision stops the run;
/// the samples before it are kept.
template <typename S>
SimulationResult<S> simulate(std::span<const TrajectorySample<S>> leader,
                             const ControllerConfig<S>& cfg,
                             const PlantSchedule<S>& schedule,
                             const VehicleState<S>& init, std::uint64_t seed) {
  validate(cfg);
  check_sampling(leader, cfg.t_s);
  SimulationResult<S> result;
  result.follower.reserve(leader.size());
  FollowerSimulator<S> sim(init, schedule, seed);
  for (const auto& l : leader) {
    try {
      result.follower.push_back(sim.advance(l, cfg));
    } catch (const CollisionError& e) {
      result.collision = CollisionRecord<S>{S(e.time()), e.what()};
      break;
    }
  }
  return result;
}

}  // namespace cfuq::plant
