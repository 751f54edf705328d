#include <algorithm>
#include <cmath>

#include "cfuq/harness.hpp"

namespace cfuq::harness {

Trajectory smooth_acceleration(const Trajectory& traj, double kernel_width) {
  if (!(kernel_width >= 0)) throw ConfigError("smoothing: kernel width must be >= 0");
  if (kernel_width == 0 || traj.size() < 2) return traj;

  const double t_s = traj[1].time - traj[0].time;
  const double sigma = kernel_width / t_s;  // in samples
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
    const double z = double(j) / sigma;
    kernel[j + radius] = std::exp(-0.5 * z * z);
  }

  const auto n = static_cast<std::ptrdiff_t>(traj.size());
  std::vector<double> accel(traj.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double sum = 0, weight = 0;
    for (std::ptrdiff_t j = std::max(-radius, -i); j <= std::min(radius, n - 1 - i); ++j) {
      sum += kernel[j + radius] * traj[i + j].accel;
      weight += kernel[j + radius];
    }
    accel[i] = sum / weight;
  }

  Trajectory out = traj;
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i].accel = accel[i];
  for (std::ptrdiff_t i = 1; i < n; ++i) {
    const double dt = out[i].time - out[i - 1].time;
    out[i].speed = std::max(0.0, out[i - 1].speed + dt * (accel[i - 1] + accel[i]) / 2);
    out[i].position = out[i - 1].position + dt * (out[i - 1].speed + out[i].speed) / 2;
  }
  return out;
}

SyntheticLeaderSpec default_leader_spec() {
  SyntheticLeaderSpec spec;
  spec.v0 = 25;
  spec.duration = 60;
  spec.segments = {{4, 0},   {3, -1.0}, {3, 0.8},  {4, 0},    {2, -1.5}, {3, 1.0}, {3, 0},
                   {2, 0.8}, {3, -0.8}, {4, 0.3},  {3, -0.5}, {2, 1.0},  {3, 0},   {3, -1.2},
                   {3, 1.0}, {4, 0},    {3, -0.8}, {3, 0.6},  {5, 0}};
  return spec;
}

Trajectory synthetic_leader(const SyntheticLeaderSpec& spec) {
  if (!(spec.t_s > 0)) throw ConfigError("synthetic leader: t_s must be > 0");
  if (!(spec.duration > 0)) throw ConfigError("synthetic leader: empty trajectory (duration must be > 0)");
  if (!(spec.v0 >= 0)) throw ConfigError("synthetic leader: negative initial speed");

  // Segment start times and states, integrated exactly.
  struct Knot {
    double t, x, v, a;
  };
  std::vector<Knot> knots;
  double t = 0, x = spec.x0, v = spec.v0;
  for (const auto& seg : spec.segments) {
    if (!(seg.duration > 0)) throw ConfigError("synthetic leader: segment duration must be > 0");
    knots.push_back({t, x, v, seg.accel});
    x += v * seg.duration + 0.5 * seg.accel * seg.duration * seg.duration;
    v += seg.accel * seg.duration;
    t += seg.duration;
    if (v < -1e-12) {
      throw ConfigError("synthetic leader: speed would become negative at t=" +
                        std::to_string(t));
    }
    v = std::max(0.0, v);
  }
  knots.push_back({t, x, v, 0.0});  // constant speed afterwards

  const auto n = static_cast<std::size_t>(std::llround(spec.duration / spec.t_s)) + 1;
  Trajectory traj(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = double(i) * spec.t_s;
    while (seg + 1 < knots.size() && knots[seg + 1].t <= ti + 1e-9 * spec.t_s) ++seg;
    const Knot& k = knots[seg];
    const double dt = ti - k.t;
    traj[i] = {ti, k.x + k.v * dt + 0.5 * k.a * dt * dt, std::max(0.0, k.v + k.a * dt), k.a};
  }
  return traj;
}

}  // namespace cfuq::harness
