#include <fstream>
#include <functional>
#include <map>

#include "cfuq/harness.hpp"

namespace cfuq::harness {

using nlohmann::json;

ScenarioConfig default_scenario() {
  ScenarioConfig sc;
  sc.schedule = plant::PlantSchedule<double>({{0.0, {0.3, 1.0, 0.05}}, {26.0, {1.5, 0.5, 0.05}}});
  return sc;
}

namespace {

double number(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

std::size_t count(const std::string& key, const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> numbers(const std::string& key, const json& v, std::size_t n) {
  if (!v.is_array() || v.size() != n)
    throw ConfigError(key + ": expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(key, x));
  return out;
}

std::vector<std::vector<double>> rows(const std::string& key, const json& v, std::size_t n) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (const auto& r : v) out.push_back(numbers(key, r, n));
  return out;
}

std::string text(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  return v.get<std::string>();
}

bool flag(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
  return v.get<bool>();
}

void apply_preset(ScenarioConfig& sc, const std::string& preset) {
  if (preset == "monitoring") {
    sc.window = 2;
    sc.warmup_windows = 0;
  } else if (preset == "model_performance") {
    sc.window = 5;
    sc.warmup_windows = 3;
    sc.lambda_initial = 10;
  } else {
    throw ConfigError("estimator.preset: unknown preset '" + preset +
                      "' (expected monitoring, model_performance)");
  }
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const json&)>;

#define NUM(field) [](ScenarioConfig& s, const std::string& k, const json& v) { field = number(k, v); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"controller.k_s", NUM(s.controller.gains[0])},
      {"controller.k_v", NUM(s.controller.gains[1])},
      {"controller.k_a", NUM(s.controller.gains[2])},
      {"controller.tau_star", NUM(s.controller.tau_star)},
      {"controller.delta_star", NUM(s.controller.delta_star)},
      {"controller.T_L_nominal", NUM(s.controller.lag_nominal)},
      {"controller.K_L_nominal", NUM(s.controller.ratio_nominal)},
      {"controller.T_L_lower", NUM(s.controller.lag_bounds.lower)},
      {"controller.T_L_upper", NUM(s.controller.lag_bounds.upper)},
      {"controller.K_L_lower", NUM(s.controller.ratio_bounds.lower)},
      {"controller.K_L_upper", NUM(s.controller.ratio_bounds.upper)},
      {"controller.t_s", NUM(s.controller.t_s)},
      {"controller.u_min", NUM(s.controller.u_min)},
      {"controller.u_max", NUM(s.controller.u_max)},
      {"plant.schedule",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         std::vector<plant::PlantSchedule<double>::Entry> entries;
         for (const auto& r : rows(k, v, 4)) entries.push_back({r[0], {r[1], r[2], r[3]}});
         try {
           s.schedule = plant::PlantSchedule<double>(std::move(entries));
         } catch (const DomainError& e) {
           throw ConfigError(k + ": " + e.what());
         }
       }},
      {"leader.csv",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.leader_csv = text(k, v); }},
      {"leader.v0", NUM(s.synthetic.v0)},
      {"leader.x0", NUM(s.synthetic.x0)},
      {"leader.duration", NUM(s.synthetic.duration)},
      {"leader.segments",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         s.synthetic.segments.clear();
         for (const auto& r : rows(k, v, 2)) s.synthetic.segments.push_back({r[0], r[1]});
       }},
      {"leader.smoothing", NUM(s.smoothing_width)},
      {"follower.init",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         if (v.is_null()) {
           s.init.reset();
           return;
         }
         const auto x = numbers(k, v, 3);
         s.init = VehicleState<double>{x[0], x[1], x[2], 0.0};
       }},
      {"estimator.window", NUM(s.window)},
      {"estimator.warmup_windows",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.warmup_windows = count(k, v); }},
      {"sgld.eta_1", NUM(s.sgld.eta_1)},
      {"sgld.eta_cap", NUM(s.sgld.eta_cap)},
      {"sgld.iterations",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.sgld.iterations = count(k, v); }},
      {"sgld.burn_in",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.sgld.burn_in = count(k, v); }},
      {"sgld.minibatch",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.sgld.minibatch = count(k, v); }},
      {"sgld.sigma_sq", NUM(s.sgld.sigma_sq)},
      {"sgld.min_excitation", NUM(s.sgld.min_excitation)},
      {"sgld.lambda_initial", NUM(s.lambda_initial)},
      {"sgld.lambda", NUM(s.lambda)},
      {"monitor.accepted_change_T_L", NUM(s.policy.accepted_change_lag)},
      {"monitor.accepted_change_K_L", NUM(s.policy.accepted_change_ratio)},
      {"monitor.escalation",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         s.policy.escalation = monitor::parse_escalation(text(k, v));
       }},
      {"monitor.tau_star_escalated", NUM(s.policy.tau_star_escalated)},
      {"monitor.gains_escalated",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         const auto g = numbers(k, v, 3);
         s.policy.gains_escalated = Eigen::Vector3d(g[0], g[1], g[2]);
       }},
      {"monitor.bound_half_width_T_L", NUM(s.policy.bound_half_width_lag)},
      {"monitor.bound_half_width_K_L", NUM(s.policy.bound_half_width_ratio)},
      {"monitor.mode",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         s.policy.mode = monitor::parse_boundary_mode(text(k, v));
       }},
      {"monitor.tau_slew_rate", NUM(s.tau_slew_rate)},
      {"run.strategy_engine",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.strategy_engine = flag(k, v); }},
      {"run.seed",
       [](ScenarioConfig& s, const std::string& k, const json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
           throw ConfigError(k + ": expected a non-negative integer");
         s.seed = v.get<std::uint64_t>();
       }},
      {"run.out",
       [](ScenarioConfig& s, const std::string& k, const json& v) { s.out_dir = text(k, v); }},
  };
  return table;
}

#undef NUM

}  // namespace

ScenarioConfig scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario: expected a JSON object of dotted keys");
  ScenarioConfig sc = default_scenario();
  // The preset goes first so that explicit keys override it.
  if (auto it = doc.find("estimator.preset"); it != doc.end())
    apply_preset(sc, text("estimator.preset", *it));
  const auto& table = setters();
  for (const auto& [key, value] : doc.items()) {
    if (key == "estimator.preset") continue;
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("scenario: unknown key '" + key + "'");
    it->second(sc, key, value);
  }
  if (doc.contains("sgld.iterations") && !doc.contains("sgld.burn_in"))
    sc.sgld.burn_in = estimator::default_burn_in(sc.sgld.iterations);

  validate(sc.controller);
  monitor::validate(sc.policy);
  if (!(sc.window > 0)) throw ConfigError("estimator.window must be > 0");
  if (!(sc.smoothing_width >= 0)) throw ConfigError("leader.smoothing must be >= 0");
  if (!(sc.lambda_initial > 0 && sc.lambda > 0)) throw ConfigError("sgld: lambda must be > 0");
  if (!(sc.tau_slew_rate >= 0)) throw ConfigError("monitor.tau_slew_rate must be >= 0");
  return sc;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return scenario_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json scenario_to_json(const ScenarioConfig& sc) {
  const auto& c = sc.controller;
  json j = json::object();
  j["controller.k_s"] = c.k_s();
  j["controller.k_v"] = c.k_v();
  j["controller.k_a"] = c.k_a();
  j["controller.tau_star"] = c.tau_star;
  j["controller.delta_star"] = c.delta_star;
  j["controller.T_L_nominal"] = c.lag_nominal;
  j["controller.K_L_nominal"] = c.ratio_nominal;
  j["controller.T_L_lower"] = c.lag_bounds.lower;
  j["controller.T_L_upper"] = c.lag_bounds.upper;
  j["controller.K_L_lower"] = c.ratio_bounds.lower;
  j["controller.K_L_upper"] = c.ratio_bounds.upper;
  j["controller.t_s"] = c.t_s;
  j["controller.u_min"] = c.u_min;
  j["controller.u_max"] = c.u_max;

  json schedule = json::array();
  for (const auto& [t, p] : sc.schedule.entries()) schedule.push_back({t, p.lag, p.ratio, p.sigma_eps});
  j["plant.schedule"] = schedule;

  if (sc.leader_csv) j["leader.csv"] = sc.leader_csv->string();
  j["leader.v0"] = sc.synthetic.v0;
  j["leader.x0"] = sc.synthetic.x0;
  j["leader.duration"] = sc.synthetic.duration;
  json segments = json::array();
  for (const auto& s : sc.synthetic.segments) segments.push_back({s.duration, s.accel});
  j["leader.segments"] = segments;
  j["leader.smoothing"] = sc.smoothing_width;
  if (sc.init) j["follower.init"] = {sc.init->position, sc.init->speed, sc.init->accel};

  j["estimator.window"] = sc.window;
  j["estimator.warmup_windows"] = sc.warmup_windows;
  j["sgld.eta_1"] = sc.sgld.eta_1;
  j["sgld.eta_cap"] = sc.sgld.eta_cap;
  j["sgld.iterations"] = sc.sgld.iterations;
  j["sgld.burn_in"] = sc.sgld.burn_in;
  j["sgld.minibatch"] = sc.sgld.minibatch;
  j["sgld.sigma_sq"] = sc.sgld.sigma_sq;
  j["sgld.min_excitation"] = sc.sgld.min_excitation;
  j["sgld.lambda_initial"] = sc.lambda_initial;
  j["sgld.lambda"] = sc.lambda;

  const auto& p = sc.policy;
  j["monitor.accepted_change_T_L"] = p.accepted_change_lag;
  j["monitor.accepted_change_K_L"] = p.accepted_change_ratio;
  j["monitor.escalation"] = std::string(monitor::name(p.escalation));
  j["monitor.tau_star_escalated"] = p.tau_star_escalated;
  j["monitor.gains_escalated"] = {p.gains_escalated[0], p.gains_escalated[1], p.gains_escalated[2]};
  j["monitor.bound_half_width_T_L"] = p.bound_half_width_lag;
  j["monitor.bound_half_width_K_L"] = p.bound_half_width_ratio;
  j["monitor.mode"] = p.mode == monitor::BoundaryMode::kMean ? "mean" : "interval";
  j["monitor.tau_slew_rate"] = sc.tau_slew_rate;

  j["run.strategy_engine"] = sc.strategy_engine;
  j["run.seed"] = sc.seed;
  j["run.out"] = sc.out_dir.string();
  return j;
}

}  // namespace cfuq::harness
