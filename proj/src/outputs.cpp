#include <fstream>

#include "cfuq/harness.hpp"

namespace cfuq::harness {

using nlohmann::json;

namespace {

json pair(const estimator::Theta<double>& t) {
  return {{"K_L", t[estimator::kRatio]}, {"T_L", t[estimator::kLag]}};
}

json config_record(const ControllerConfig<double>& c) {
  return {{"k_s", c.k_s()},
          {"k_v", c.k_v()},
          {"k_a", c.k_a()},
          {"tau_star", c.tau_star},
          {"delta_star", c.delta_star},
          {"T_L_nominal", c.lag_nominal},
          {"K_L_nominal", c.ratio_nominal},
          {"T_L_lower", c.lag_bounds.lower},
          {"T_L_upper", c.lag_bounds.upper},
          {"K_L_lower", c.ratio_bounds.lower},
          {"K_L_upper", c.ratio_bounds.upper}};
}

json config_diff(const ControllerConfig<double>& before, const ControllerConfig<double>& after) {
  const json a = config_record(before), b = config_record(after);
  json diff = json::object();
  for (const auto& [key, value] : a.items()) {
    if (value != b[key]) diff[key] = {{"old", value}, {"new", b[key]}};
  }
  return diff;
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

json estimate_record(const WindowEstimate& w) {
  const auto& s = w.estimate.summary;
  return {{"window", w.window},
          {"start", w.start},
          {"end", w.end},
          {"prior_mean", pair(w.prior.mean)},
          {"prior_variance", w.prior.variance},
          {"nominal", pair(w.nominal)},
          {"mean", pair(s.mean)},
          {"lower", pair(s.lower)},
          {"upper", pair(s.upper)},
          {"covariance", {{s.covariance(0, 0), s.covariance(0, 1)}, {s.covariance(1, 0), s.covariance(1, 1)}}},
          {"samples", w.estimate.samples.size()},
          {"low_confidence", w.estimate.low_confidence}};
}

json decision_record(const DecisionRecord& d) {
  const auto& v = d.decision.stability_verdict;
  json margins = json::array();
  for (int i = 0; i < 8; ++i) margins.push_back(v.margins[i]);
  return {{"window", d.window},
          {"time", d.time},
          {"anomaly", d.decision.anomaly},
          {"flags", {{"K_L", d.decision.boundary.ratio}, {"T_L", d.decision.boundary.lag}}},
          {"precedence", d.decision.precedence},
          {"locally_stable", v.locally_stable},
          {"string_stable", v.string_stable},
          {"margins", margins},
          {"action", std::string(monitor::name(d.decision.action))},
          {"applied", d.applied},
          {"config_diff", config_diff(d.before, d.after)},
          {"rationale", d.decision.rationale}};
}

json summary_record(const RunReport& r) {
  const auto& s = r.summary;
  json j = {{"post_injection_start", s.post_injection_start},
            {"post_injection_accel_rms", s.accel_rms},
            {"max_abs_jerk", s.max_abs_jerk},
            {"min_gap", s.min_gap},
            {"windows", s.windows},
            {"anomalies", s.anomalies},
            {"first_anomaly_time", nullptr},
            {"collision", nullptr}};
  if (s.first_anomaly_time) j["first_anomaly_time"] = *s.first_anomaly_time;
  if (r.collision) j["collision"] = {{"time", r.collision->time}, {"message", r.collision->message}};
  return j;
}

void emit_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const auto write = [&](const std::string& name, auto&& body) {
    const auto path = dir / name;
    auto out = open(path);
    body(out);
    finish(out, path);
  };

  write("leader.csv", [&](std::ostream& os) { write_leader_csv(os, report.leader); });
  write("follower.csv", [&](std::ostream& os) { write_follower_csv(os, report.follower); });
  write("estimates.jsonl", [&](std::ostream& os) {
    for (const auto& w : report.estimates) os << estimate_record(w).dump() << '\n';
  });
  write("decisions.jsonl", [&](std::ostream& os) {
    for (const auto& d : report.decisions) os << decision_record(d).dump() << '\n';
  });
  write("summary.json", [&](std::ostream& os) { os << summary_record(report).dump(2) << '\n'; });

  const auto& p = report.policy;
  write("estimate_bands.csv", [&](std::ostream& os) {
    os << "time,window,K_L_mean,K_L_lower,K_L_upper,T_L_mean,T_L_lower,T_L_upper,"
          "K_L_nominal,T_L_nominal,K_L_band_lower,K_L_band_upper,T_L_band_lower,"
          "T_L_band_upper,low_confidence\n";
    for (const auto& w : report.estimates) {
      const auto& s = w.estimate.summary;
      const double k = w.nominal[estimator::kRatio], t = w.nominal[estimator::kLag];
      const double cols[] = {w.end,
                             double(w.window),
                             s.mean[estimator::kRatio],
                             s.lower[estimator::kRatio],
                             s.upper[estimator::kRatio],
                             s.mean[estimator::kLag],
                             s.lower[estimator::kLag],
                             s.upper[estimator::kLag],
                             k,
                             t,
                             k - p.accepted_change_ratio,
                             k + p.accepted_change_ratio,
                             t - p.accepted_change_lag,
                             t + p.accepted_change_lag,
                             w.estimate.low_confidence ? 1.0 : 0.0};
      for (std::size_t i = 0; i < std::size(cols); ++i)
        os << (i ? "," : "") << format_number(cols[i]);
      os << '\n';
    }
  });
  write("overlay.csv", [&](std::ostream& os) {
    os << "time,leader_speed,leader_accel,follower_speed,follower_accel,gap,demanded_accel\n";
    for (std::size_t i = 0; i < report.follower.size() && i < report.leader.size(); ++i) {
      const auto& l = report.leader[i];
      const auto& f = report.follower[i];
      os << format_number(f.time) << ',' << format_number(l.speed) << ','
         << format_number(l.accel) << ',' << format_number(f.speed) << ','
         << format_number(f.accel) << ',' << format_number(l.position - f.position) << ','
         << format_number(f.demanded_accel) << '\n';
    }
  });
}

}  // namespace cfuq::harness
