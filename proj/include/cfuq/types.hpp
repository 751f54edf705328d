#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cfuq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value outside the mathematical domain of an operation (e.g. T_L <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or scenario description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed tabular input; carries the 1-based line number when known.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// File system failures, with the offending path in the message.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The follower reached or overran the leader.
class CollisionError : public Error {
 public:
  CollisionError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

template <typename S>
struct Interval {
  S lower;
  S upper;

  bool contains(S x) const { return lower <= x && x <= upper; }
  S center() const { return (lower + upper) / 2; }
  S half_width() const { return (upper - lower) / 2; }
};

/// Upper- and lower-level controller settings. Gains are ordered
/// (k_s, k_v, k_a) and act on the state (spacing error, speed difference,
/// acceleration).
template <typename S>
struct ControllerConfig {
  Eigen::Vector3<S> gains = Eigen::Vector3<S>(S(1.5), S(1.5), S(-0.8));
  S tau_star = S(1);    // target time gap [s]
  S delta_star = S(5);  // standstill gap [m]
  S lag_nominal = S(0.3);    // T_L [s]
  S ratio_nominal = S(1);    // K_L [-]
  Interval<S> lag_bounds{S(0.1), S(0.4)};
  Interval<S> ratio_bounds{S(0.7), S(1)};
  S t_s = S(0.01);
  S u_min = S(-5);
  S u_max = S(3);

  S k_s() const { return gains[0]; }
  S k_v() const { return gains[1]; }
  S k_a() const { return gains[2]; }
};

/// The true dynamics driving the simulated follower.
template <typename S>
struct PlantParams {
  S lag = S(0.3);
  S ratio = S(1);
  S sigma_eps = S(0);
};

template <typename S>
struct VehicleState {
  S position = S(0);
  S speed = S(0);
  S accel = S(0);
  S demanded_accel = S(0);
};

template <typename S>
struct TrajectorySample {
  S time = S(0);
  S position = S(0);
  S speed = S(0);
  S accel = S(0);
};

/// Returns a description of the first violated invariant, if any.
template <typename S>
std::optional<std::string> config_violation(const ControllerConfig<S>& cfg) {
  using std::isfinite;
  if (!cfg.gains.allFinite()) return "gains must be finite";
  if (!(cfg.t_s > 0)) return "t_s must be > 0";
  if (!(cfg.tau_star > 0)) return "tau_star must be > 0";
  if (!(cfg.delta_star >= 0)) return "delta_star must be >= 0";
  if (!(cfg.lag_bounds.lower > 0 && cfg.lag_bounds.lower <= cfg.lag_bounds.upper))
    return "T_L bounds must satisfy 0 < lower <= upper";
  if (!(cfg.ratio_bounds.lower > 0 &&
        cfg.ratio_bounds.lower <= cfg.ratio_bounds.upper))
    return "K_L bounds must satisfy 0 < lower <= upper";
  if (!cfg.lag_bounds.contains(cfg.lag_nominal))
    return "T_L nominal must lie within its bounds";
  if (!cfg.ratio_bounds.contains(cfg.ratio_nominal))
    return "K_L nominal must lie within its bounds";
  if (!(cfg.u_min < cfg.u_max)) return "u_min must be < u_max";
  return std::nullopt;
}

template <typename S>
void validate(const ControllerConfig<S>& cfg) {
  if (auto v = config_violation(cfg)) throw ConfigError("controller: " + *v);
}

template <typename S>
void validate(const PlantParams<S>& p) {
  if (!(p.lag > 0)) throw DomainError("plant: T_L must be > 0");
  if (!(p.ratio > 0)) throw DomainError("plant: K_L must be > 0");
  if (!(p.sigma_eps >= 0)) throw DomainError("plant: sigma_eps must be >= 0");
}

}  // namespace cfuq
