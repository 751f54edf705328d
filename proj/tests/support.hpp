#pragma once

#include <cmath>
#include <vector>

#include "cfuq/harness.hpp"

namespace cfuq::fixtures {

/// Follower log of the default scenario leader with the controller held at
/// its defaults (no monitor) and the given plant schedule.
inline std::vector<plant::FollowerSample<double>> follower_log(
    const plant::PlantSchedule<double>& schedule, std::uint64_t seed) {
  const auto sc = harness::default_scenario();
  const auto leader = harness::scenario_leader(sc);
  return plant::simulate<double>(leader, sc.controller, schedule,
                                 plant::equilibrium_state(leader[0], sc.controller), seed)
      .follower;
}

/// Observations from samples with time in [t0, t1).
inline estimator::ObservationBatch<double> window_batch(
    const std::vector<plant::FollowerSample<double>>& log, double t0, double t1, double t_s) {
  std::vector<double> a, u;
  for (const auto& f : log) {
    if (f.time >= t0 - 1e-9 && f.time < t1 - 1e-9) {
      a.push_back(f.accel);
      u.push_back(f.demanded_accel);
    }
  }
  return estimator::make_batch<double>(a, u, t_s, t0, t1);
}

inline plant::PlantSchedule<double> switched_schedule() {
  return plant::PlantSchedule<double>({{0.0, {0.3, 1.0, 0.05}}, {26.0, {1.5, 0.5, 0.05}}});
}

inline plant::PlantSchedule<double> nominal_schedule() {
  return plant::PlantSchedule<double>({{0.0, {0.3, 1.0, 0.05}}});
}

/// Conjugate posterior of K_L with T_L known: the model is linear in K_L,
/// jerk + a / T = K_L * u / T + noise.
struct ConjugateK {
  double mean;
  double variance;
};

inline ConjugateK conjugate_k(const estimator::ObservationBatch<double>& b, double lag,
                              double prior_mean, double prior_var, double sigma_sq) {
  double precision = 1 / prior_var, weighted = prior_mean / prior_var;
  for (const auto& o : b.observations()) {
    const double x = o.demand / lag, y = o.jerk + o.accel / lag;
    precision += x * x / sigma_sq;
    weighted += x * y / sigma_sq;
  }
  return {weighted / precision, 1 / precision};
}

}  // namespace cfuq::fixtures
