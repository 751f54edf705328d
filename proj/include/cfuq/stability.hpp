#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cfuq/types.hpp"

// Closed-form local and string stability conditions of the linear
// constant-time-gap controller under bounded GLVD parameters, plus grid
// sweeps over two controller parameters.
namespace cfuq::stability {

template <typename S>
using LocalMargins = Eigen::Matrix<S, 5, 1>;
template <typename S>
using StringMargins = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Margins = Eigen::Matrix<S, 8, 1>;

/// Each margin is LHS - RHS of a strict inequality; a condition holds only
/// when its margin is > 0.
template <typename S>
struct StabilityVerdict {
  bool locally_stable = false;
  bool string_stable = false;
  Margins<S> margins = Margins<S>::Zero();

  bool stable() const { return locally_stable && string_stable; }
};

template <typename S>
void check_bounds_domain(const ControllerConfig<S>& cfg) {
  if (!(cfg.lag_bounds.lower > 0 && cfg.lag_bounds.upper > 0 &&
        cfg.ratio_bounds.lower > 0 && cfg.ratio_bounds.upper > 0)) {
    throw DomainError("stability: T_L and K_L bounds must be > 0");
  }
  if (!(cfg.lag_bounds.lower <= cfg.lag_bounds.upper &&
        cfg.ratio_bounds.lower <= cfg.ratio_bounds.upper)) {
    throw DomainError("stability: bounds must satisfy lower <= upper");
  }
}

template <typename S>
LocalMargins<S> local_margins(const ControllerConfig<S>& cfg) {
  check_bounds_domain(cfg);
  const S ks = cfg.k_s(), kv = cfg.k_v(), ka = cfg.k_a(), tau = cfg.tau_star;
  const S tl_lo = cfg.lag_bounds.lower, tl_hi = cfg.lag_bounds.upper;
  const S kl_lo = cfg.ratio_bounds.lower, kl_hi = cfg.ratio_bounds.upper;
  const S tv = ks * tau + kv;
  LocalMargins<S> m;
  m << S(1) - kl_hi * ka,
       tv,
       ks,
       (S(1) / kl_lo - ka) * tv - (tl_hi / kl_lo) * ks,
       (S(1) / kl_hi - ka) * tv - (tl_lo / kl_hi) * ks;
  return m;
}

// The first two string conditions both use T_L^u * K_L^u in the second term
// and differ only in the K_L bound multiplying k_a.
template <typename S>
StringMargins<S> string_margins(const ControllerConfig<S>& cfg) {
  check_bounds_domain(cfg);
  const S ks = cfg.k_s(), kv = cfg.k_v(), ka = cfg.k_a(), tau = cfg.tau_star;
  const S tl_hi = cfg.lag_bounds.upper;
  const S kl_lo = cfg.ratio_bounds.lower, kl_hi = cfg.ratio_bounds.upper;
  const S tv = tau * ks + kv;
  const S drift = S(2) * tl_hi * kl_hi * tv;
  StringMargins<S> m;
  m << (kl_hi * ka - S(1)) * (kl_hi * ka - S(1)) - drift,
       (kl_lo * ka - S(1)) * (kl_lo * ka - S(1)) - drift,
       kl_lo * (S(2) * ks * ka + tv * tv - kv * kv) - S(2) * ks;
  return m;
}

template <typename Derived>
bool all_positive(const Eigen::MatrixBase<Derived>& m) {
  return (m.array() > typename Derived::Scalar(0)).all();
}

template <typename S>
bool locally_stable(const ControllerConfig<S>& cfg) {
  return all_positive(local_margins(cfg));
}

template <typename S>
bool string_stable(const ControllerConfig<S>& cfg) {
  return all_positive(string_margins(cfg));
}

template <typename S>
StabilityVerdict<S> verdict_from_margins(const Margins<S>& margins) {
  StabilityVerdict<S> v;
  v.margins = margins;
  v.locally_stable = all_positive(margins.template head<5>());
  v.string_stable = all_positive(margins.template tail<3>());
  return v;
}

template <typename S>
StabilityVerdict<S> evaluate(const ControllerConfig<S>& cfg) {
  Margins<S> m;
  m << local_margins(cfg), string_margins(cfg);
  return verdict_from_margins(m);
}

/// Worst case of two verdicts: elementwise minimum of margins.
template <typename S>
StabilityVerdict<S> combine(const StabilityVerdict<S>& a, const StabilityVerdict<S>& b) {
  return verdict_from_margins<S>(a.margins.cwiseMin(b.margins));
}

enum class SweepParam { kSpacingGain, kSpeedGain, kAccelGain, kTimeGap };

inline std::string_view name(SweepParam p) {
  switch (p) {
    case SweepParam::kSpacingGain: return "k_s";
    case SweepParam::kSpeedGain: return "k_v";
    case SweepParam::kAccelGain: return "k_a";
    case SweepParam::kTimeGap: return "tau_star";
  }
  return "?";
}

inline SweepParam parse_sweep_param(std::string_view s) {
  if (s == "k_s") return SweepParam::kSpacingGain;
  if (s == "k_v") return SweepParam::kSpeedGain;
  if (s == "k_a") return SweepParam::kAccelGain;
  if (s == "tau_star") return SweepParam::kTimeGap;
  throw ConfigError("unknown sweep parameter '" + std::string(s) +
                    "' (expected k_s, k_v, k_a, tau_star)");
}

template <typename S>
void set_param(ControllerConfig<S>& cfg, SweepParam p, S value) {
  switch (p) {
    case SweepParam::kSpacingGain: cfg.gains[0] = value; break;
    case SweepParam::kSpeedGain: cfg.gains[1] = value; break;
    case SweepParam::kAccelGain: cfg.gains[2] = value; break;
    case SweepParam::kTimeGap: cfg.tau_star = value; break;
  }
}

template <typename S>
struct AxisSpec {
  SweepParam param;
  std::vector<S> grid;
};

/// n points from lo to hi inclusive; n == 1 yields {lo}.
template <typename S>
std::vector<S> uniform_grid(S lo, S hi, std::size_t n) {
  if (n == 0) throw ConfigError("grid: need at least one point");
  std::vector<S> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : lo + (hi - lo) * S(i) / S(n - 1);
  return g;
}

template <typename S>
struct RegionCell {
  std::optional<StabilityVerdict<S>> verdict;
  std::string error;  // set when the cell's configuration was out of domain
};

/// cells are row-major: cells[i * y.grid.size() + j] is (x.grid[i], y.grid[j]).
template <typename S>
struct RegionMap {
  AxisSpec<S> x;
  AxisSpec<S> y;
  ControllerConfig<S> fixed;
  std::vector<RegionCell<S>> cells;

  const RegionCell<S>& at(std::size_t i, std::size_t j) const {
    return cells[i * y.grid.size() + j];
  }

  std::size_t stable_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.verdict && c.verdict->stable();
    return n;
  }
  std::size_t string_stable_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.verdict && c.verdict->string_stable;
    return n;
  }
};

template <typename S>
void check_grid(const AxisSpec<S>& axis) {
  if (axis.grid.empty()) throw ConfigError("sweep: empty grid for " + std::string(name(axis.param)));
  for (std::size_t i = 1; i < axis.grid.size(); ++i)
    if (!(axis.grid[i] > axis.grid[i - 1]))
      throw ConfigError("sweep: grid for " + std::string(name(axis.param)) +
                        " must be strictly increasing");
}

template <typename S>
RegionMap<S> region(const AxisSpec<S>& x, const AxisSpec<S>& y,
                    const ControllerConfig<S>& fixed) {
  check_grid(x);
  check_grid(y);
  if (x.param == y.param) throw ConfigError("sweep: axes must be distinct parameters");
  RegionMap<S> map{x, y, fixed, {}};
  map.cells.reserve(x.grid.size() * y.grid.size());
  for (S xv : x.grid) {
    for (S yv : y.grid) {
      ControllerConfig<S> cfg = fixed;
      set_param(cfg, x.param, xv);
      set_param(cfg, y.param, yv);
      RegionCell<S> cell;
      try {
        cell.verdict = evaluate(cfg);
      } catch (const DomainError& e) {
        cell.error = e.what();
      }
      map.cells.push_back(std::move(cell));
    }
  }
  return map;
}

/// Header: param1,param2,locally_stable,string_stable,margin_1..margin_8.
/// Out-of-domain cells have empty verdict fields.
template <typename S, typename Format>
void write_region_csv(std::ostream& os, const RegionMap<S>& map, Format&& fmt) {
  os << "param1,param2,locally_stable,string_stable";
  for (int i = 1; i <= 8; ++i) os << ",margin_" << i;
  os << '\n';
  for (std::size_t i = 0; i < map.x.grid.size(); ++i) {
    for (std::size_t j = 0; j < map.y.grid.size(); ++j) {
      const auto& cell = map.at(i, j);
      os << fmt(map.x.grid[i]) << ',' << fmt(map.y.grid[j]);
      if (cell.verdict) {
        os << ',' << int(cell.verdict->locally_stable) << ','
           << int(cell.verdict->string_stable);
        for (int k = 0; k < 8; ++k) os << ',' << fmt(cell.verdict->margins[k]);
      } else {
        os << ",,";
        for (int k = 0; k < 8; ++k) os << ',';
      }
      os << '\n';
    }
  }
}

}  // namespace cfuq::stability
