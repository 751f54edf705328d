#include <random>

#include <gtest/gtest.h>

#include "cfuq/monitor.hpp"

namespace {

using namespace cfuq;
using namespace cfuq::monitor;
using Cfg = ControllerConfig<double>;
using Est = estimator::PosteriorEstimate<double>;
using Policy = MonitorPolicy<double>;

// Point-mass style estimate with a symmetric interval of the given half-width.
Est estimate(double ratio, double lag, double half = 0.01) {
  Est e;
  e.summary.mean = Theta<double>(ratio, lag);
  e.summary.lower = e.summary.mean.array() - half;
  e.summary.upper = e.summary.mean.array() + half;
  e.summary.covariance = Eigen::Matrix2d::Identity() * (half / 2) * (half / 2);
  return e;
}

Cfg with_nominals(double ratio, double lag) {
  Cfg c;
  c.ratio_nominal = ratio;
  c.lag_nominal = lag;
  c.ratio_bounds = {std::min(ratio, 0.7), std::max(ratio, 1.0)};
  c.lag_bounds = {std::min(lag, 0.1), std::max(lag, 0.4)};
  return c;
}

TEST(CheckBounds, WithinBand) {
  const Policy p;
  const auto c = check_bounds(estimate(0.98, 0.30), Theta<double>(0.98, 0.24), p);
  EXPECT_FALSE(c.anomaly);
  EXPECT_FALSE(c.lag);
  EXPECT_FALSE(c.ratio);
}

TEST(CheckBounds, DegradedEstimateFlagsBoth) {
  const Policy p;
  const auto c = check_bounds(estimate(0.64, 1.33), Theta<double>(0.98, 0.24), p);
  EXPECT_TRUE(c.anomaly);
  EXPECT_TRUE(c.lag);
  EXPECT_TRUE(c.ratio);
}

TEST(CheckBounds, AtBaseline) {
  const Policy p;
  EXPECT_FALSE(check_bounds(estimate(1, 0.3), Theta<double>(1, 0.3), p).anomaly);
}

TEST(CheckBounds, SingleParameter) {
  const Policy p;
  const auto c = check_bounds(estimate(1.0, 0.55), Theta<double>(1, 0.3), p);
  EXPECT_TRUE(c.lag);
  EXPECT_FALSE(c.ratio);
}

TEST(CheckBounds, IntervalModeNeedsWholeInterval) {
  Policy p;
  p.mode = BoundaryMode::kInterval;
  // Mean outside the band but the interval reaches back into it.
  EXPECT_FALSE(check_bounds(estimate(1.0, 0.55, 0.1), Theta<double>(1, 0.3), p).anomaly);
  EXPECT_TRUE(check_bounds(estimate(1.0, 0.65, 0.1), Theta<double>(1, 0.3), p).lag);
  p.mode = BoundaryMode::kMean;
  EXPECT_TRUE(check_bounds(estimate(1.0, 0.55, 0.1), Theta<double>(1, 0.3), p).anomaly);
}

TEST(Evaluate, NoAnomalyKeepsConfig) {
  const Cfg cfg;
  const auto d = evaluate(estimate(0.98, 0.30), cfg, Policy{});
  EXPECT_FALSE(d.anomaly);
  EXPECT_EQ(d.action, Action::kNone);
  EXPECT_EQ(apply_decision(cfg, d).gains, cfg.gains);
  EXPECT_EQ(apply_decision(cfg, d).lag_nominal, cfg.lag_nominal);
  EXPECT_FALSE(d.rationale.empty());
}

TEST(Evaluate, StableCandidateUpdatesLowerLevel) {
  const Cfg cfg;
  const auto d = evaluate(estimate(1.2, 0.3), cfg, Policy{});
  ASSERT_TRUE(d.anomaly);
  EXPECT_EQ(d.action, Action::kUpdateLower);
  EXPECT_TRUE(d.stability_verdict.stable());
  EXPECT_DOUBLE_EQ(d.new_config.ratio_nominal, 1.2);
  EXPECT_DOUBLE_EQ(d.new_config.lag_nominal, 0.3);
  EXPECT_NEAR(d.new_config.ratio_bounds.lower, 1.05, 1e-12);
  EXPECT_NEAR(d.new_config.ratio_bounds.upper, 1.35, 1e-12);
  EXPECT_NEAR(d.new_config.lag_bounds.lower, 0.2, 1e-12);
  EXPECT_NEAR(d.new_config.lag_bounds.upper, 0.4, 1e-12);
  EXPECT_EQ(d.new_config.tau_star, cfg.tau_star);
  EXPECT_EQ(d.new_config.gains, cfg.gains);
}

TEST(Evaluate, DegradedEstimateRaisesTimeGap) {
  const Cfg cfg;
  const auto d = evaluate(estimate(0.64, 1.33), cfg, Policy{});
  ASSERT_TRUE(d.anomaly);
  // String condition 1 at the re-centered upper lag bound 1.43.
  EXPECT_NEAR(d.new_config.lag_bounds.upper, 1.43, 1e-12);
  EXPECT_LT(std::pow(0.79 * -0.8 - 1, 2) - 2 * 1.43 * 0.79 * 3, 0);
  EXPECT_FALSE(d.stability_verdict.string_stable);
  EXPECT_EQ(d.action, Action::kUpdateLowerAndTimeGap);
  const Cfg next = apply_decision(cfg, d);
  EXPECT_EQ(next.tau_star, 2);
  EXPECT_DOUBLE_EQ(next.ratio_nominal, 0.64);
  EXPECT_DOUBLE_EQ(next.lag_nominal, 1.33);
  EXPECT_EQ(next.gains, cfg.gains);
  EXPECT_EQ(next.delta_star, cfg.delta_star);
}

TEST(Evaluate, GainsEscalation) {
  Policy p;
  p.escalation = Escalation::kGains;
  const Cfg cfg;
  const auto d = evaluate(estimate(0.64, 1.33), cfg, p);
  EXPECT_EQ(d.action, Action::kUpdateLowerAndGains);
  const Cfg next = apply_decision(cfg, d);
  EXPECT_EQ(next.gains, Eigen::Vector3d(3, 3, -1.8));
  EXPECT_EQ(next.tau_star, cfg.tau_star);
}

TEST(Evaluate, BothEscalations) {
  Policy p;
  p.escalation = Escalation::kBoth;
  const auto d = evaluate(estimate(0.64, 1.33), Cfg{}, p);
  EXPECT_EQ(d.action, Action::kUpdateLowerAndBoth);
  EXPECT_EQ(d.new_config.tau_star, 2);
  EXPECT_EQ(d.new_config.gains, Eigen::Vector3d(3, 3, -1.8));
}

TEST(Evaluate, EscalationDisabled) {
  Policy p;
  p.escalation = Escalation::kNone;
  const auto d = evaluate(estimate(0.64, 1.33), Cfg{}, p);
  EXPECT_EQ(d.action, Action::kUpdateLower);
  EXPECT_FALSE(d.stability_verdict.stable());
  EXPECT_EQ(d.new_config.tau_star, 1);
}

TEST(Evaluate, EscalationExhausted) {
  Cfg cfg = with_nominals(0.64, 1.33);
  cfg.tau_star = 2;
  const auto d = evaluate(estimate(0.3, 2.5), cfg, Policy{});
  ASSERT_TRUE(d.anomaly);
  EXPECT_FALSE(d.precedence);
  EXPECT_EQ(d.action, Action::kUpdateLower);
  EXPECT_EQ(d.new_config.tau_star, 2);
}

TEST(Evaluate, PrecedenceInsideBand) {
  // k_a = 0 makes the nominal point string unstable: 1 - 2 * 0.3 * 3 < 0.
  Cfg cfg;
  cfg.gains[2] = 0;
  const auto d = evaluate(estimate(1.0, 0.3), cfg, Policy{});
  EXPECT_FALSE(d.boundary.anomaly);
  EXPECT_TRUE(d.precedence);
  EXPECT_TRUE(d.anomaly);
  EXPECT_EQ(d.action, Action::kUpdateLowerAndTimeGap);
  EXPECT_EQ(d.new_config.tau_star, 2);
}

TEST(Evaluate, LowConfidenceDoesNothing) {
  Est e = estimate(0.3, 3.0);
  e.low_confidence = true;
  const auto d = evaluate(e, Cfg{}, Policy{});
  EXPECT_EQ(d.action, Action::kNone);
  EXPECT_FALSE(d.anomaly);
  ASSERT_FALSE(d.rationale.empty());
  EXPECT_NE(d.rationale.front().find("low-confidence"), std::string::npos);
}

TEST(Evaluate, WideIntervalWidensBounds) {
  const auto d = evaluate(estimate(0.64, 1.33, 0.4), Cfg{}, Policy{});
  EXPECT_NEAR(d.new_config.lag_bounds.upper, 1.73, 1e-12);
  EXPECT_NEAR(d.new_config.ratio_bounds.lower, 0.24, 1e-12);
}

TEST(Recentered, FloorsLowerBounds) {
  const auto c = recentered(Cfg{}, estimate(0.05, 0.05), Policy{});
  EXPECT_EQ(c.lag_bounds.lower, 1e-3);
  EXPECT_EQ(c.ratio_bounds.lower, 1e-3);
  EXPECT_FALSE(config_violation(c));
}

TEST(Apply, RejectsInvalidCandidate) {
  StrategyDecision<double> d;
  d.action = Action::kUpdateLower;
  d.new_config.tau_star = -1;
  try {
    apply_decision(Cfg{}, d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau_star"), std::string::npos);
  }
}

TEST(Policy, Validation) {
  Policy p;
  EXPECT_NO_THROW(validate(p));
  p.accepted_change_lag = 0;
  EXPECT_THROW(validate(p), ConfigError);
  p = {};
  p.tau_star_escalated = 0;
  EXPECT_THROW(validate(p), ConfigError);
}

TEST(Names, RoundTrip) {
  for (auto e : {Escalation::kNone, Escalation::kTimeGap, Escalation::kGains, Escalation::kBoth})
    EXPECT_EQ(parse_escalation(name(e)), e);
  EXPECT_THROW(parse_escalation("SOMETIMES"), ConfigError);
  EXPECT_THROW(parse_boundary_mode("median"), ConfigError);
}

// Properties

struct Random {
  std::mt19937_64 rng{17};
  std::uniform_real_distribution<double> ratio{0.2, 1.5}, lag{0.05, 2.5}, half{0.0, 0.3};

  Est est() { return estimate(ratio(rng), lag(rng), half(rng)); }
  Cfg cfg() {
    std::uniform_real_distribution<double> g(0.2, 3), ka(-2, 0.3), tau(0.5, 2.5);
    Cfg c = with_nominals(ratio(rng), lag(rng));
    c.gains << g(rng), g(rng), ka(rng);
    c.tau_star = tau(rng);
    return c;
  }
};

TEST(MonitorProperty, IdempotentAtNominals) {
  Random r;
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Cfg cfg = r.cfg();
    if (!stability::evaluate(at_point(cfg, Theta<double>(cfg.ratio_nominal, cfg.lag_nominal))).stable())
      continue;
    ++checked;
    const auto d = evaluate(estimate(cfg.ratio_nominal, cfg.lag_nominal), cfg, Policy{});
    EXPECT_EQ(d.action, Action::kNone);
  }
  EXPECT_GT(checked, 50);
}

TEST(MonitorProperty, ActionNoneIffNoAnomaly) {
  Random r;
  for (const auto esc : {Escalation::kNone, Escalation::kTimeGap, Escalation::kGains, Escalation::kBoth}) {
    Policy p;
    p.escalation = esc;
    for (int i = 0; i < 500; ++i) {
      const auto d = evaluate(r.est(), r.cfg(), p);
      EXPECT_EQ(d.action == Action::kNone, !d.anomaly);
      if (d.action != Action::kNone && d.action != Action::kUpdateLower) {
        EXPECT_FALSE(d.stability_verdict.stable());
      }
      EXPECT_FALSE(d.rationale.empty());
    }
  }
}

TEST(MonitorProperty, MonotoneTrigger) {
  Random r;
  std::uniform_real_distribution<double> grow(1, 3);
  for (int i = 0; i < 1000; ++i) {
    const Est e = r.est();
    const Cfg cfg = r.cfg();
    Policy small, large;
    large.accepted_change_lag = small.accepted_change_lag * grow(r.rng);
    large.accepted_change_ratio = small.accepted_change_ratio * grow(r.rng);
    const Theta<double> base(cfg.ratio_nominal, cfg.lag_nominal);
    if (!check_bounds(e, base, small).anomaly) {
      EXPECT_FALSE(check_bounds(e, base, large).anomaly);
    }
    if (!evaluate(e, cfg, small).anomaly) {
      EXPECT_FALSE(evaluate(e, cfg, large).anomaly);
    }
  }
}

TEST(MonitorProperty, EscalationSound) {
  Random r;
  Policy p;
  p.escalation = Escalation::kBoth;
  for (int i = 0; i < 1000; ++i) {
    const Cfg cfg = r.cfg();
    const auto d = evaluate(r.est(), cfg, p);
    if (includes_gains(d.action)) {
      for (int k = 0; k < 3; ++k) EXPECT_GE(std::abs(d.new_config.gains[k]), std::abs(cfg.gains[k]));
    }
    if (includes_time_gap(d.action)) {
      EXPECT_GT(d.new_config.tau_star, cfg.tau_star);
    }
    EXPECT_NO_THROW(apply_decision(cfg, d));
  }
}

TEST(MonitorProperty, PrecedenceForcesEscalation) {
  Random r;
  int fired = 0;
  for (int i = 0; i < 1000; ++i) {
    Cfg cfg = r.cfg();
    cfg.tau_star = std::min(cfg.tau_star, 1.9);  // keep the time gap escalation available
    const Est e = r.est();
    if (stability::evaluate(at_point(cfg, e.mean())).stable()) continue;
    ++fired;
    const auto d = evaluate(e, cfg, Policy{});
    EXPECT_TRUE(d.precedence);
    EXPECT_NE(d.action, Action::kNone);
    EXPECT_NE(d.action, Action::kUpdateLower);
  }
  EXPECT_GT(fired, 50);
}

}  // namespace
