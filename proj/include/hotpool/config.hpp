#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hotpool/cloud.hpp"
#include "hotpool/rational.hpp"
#include "hotpool/workload.hpp"

namespace hotpool {

/// Raised for malformed or invalid scenario documents; the message names
/// the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct StaticMode {
  std::int64_t workers = 0;
};

struct DynamicMode {
  std::int64_t baseline = 10;
  Rational resize_cycle{5};
};

struct ScenarioConfig {
  std::string name;
  std::variant<StaticMode, DynamicMode> mode;
  Rational per_vm_speed{81};
  Duration deadline{10};
  Duration db_duration{1};
  BillingPolicy billing;
  Time horizon{300};
  std::vector<WorkloadPhase> phases;
  std::int64_t runs = 100;
  std::uint64_t seed = 0;
  /// How the load balancer hands freed workers to waiting callers. Not part
  /// of the file schema.
  ConditionWake lb_wake = ConditionWake::oldest_first;

  bool is_static() const { return std::holds_alternative<StaticMode>(mode); }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + where + key + "'");
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing field '" + where + key + "'");
  return *it;
}

inline Rational read_rational(const json& v, const std::string& field) {
  if (v.is_number_integer()) return Rational(std::to_string(v.get<std::int64_t>()));
  if (v.is_number_unsigned()) return Rational(std::to_string(v.get<std::uint64_t>()));
  if (v.is_string()) {
    try {
      return parse_rational(v.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError("field '" + field + "': " + e.what());
    }
  }
  throw ConfigError("field '" + field + "' must be an integer or a \"p/q\" string");
}

inline Rational read_positive(const json& v, const std::string& field) {
  Rational r = read_rational(v, field);
  if (r <= 0) throw ConfigError(field + " must be > 0");
  return r;
}

inline Rational read_non_negative(const json& v, const std::string& field) {
  Rational r = read_rational(v, field);
  if (r < 0) throw ConfigError(field + " must be >= 0");
  return r;
}

inline std::int64_t read_count(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError("field '" + field + "' must be an integer");
  std::int64_t n = v.get<std::int64_t>();
  if (n < 1) throw ConfigError(field + " must be >= 1");
  return n;
}

}  // namespace detail

/// Parses and validates a scenario document.
inline ScenarioConfig load_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(doc,
                         {"name", "mode", "perVmSpeed", "deadline", "dbDuration", "billing", "horizon", "phases",
                          "runs", "seed"},
                         "");

  ScenarioConfig cfg;
  const json& name = detail::require(doc, "name", "");
  if (!name.is_string() || name.get<std::string>().empty()) throw ConfigError("name must be a non-empty string");
  cfg.name = name.get<std::string>();

  const json& mode = detail::require(doc, "mode", "");
  if (!mode.is_object() || mode.size() != 1) throw ConfigError("mode must hold exactly one of 'static', 'dynamic'");
  if (mode.contains("static")) {
    const json& m = mode["static"];
    if (!m.is_object()) throw ConfigError("mode.static must be an object");
    detail::reject_unknown(m, {"workers"}, "mode.static.");
    cfg.mode = StaticMode{detail::read_count(detail::require(m, "workers", "mode.static."), "mode.static.workers")};
  } else if (mode.contains("dynamic")) {
    const json& m = mode["dynamic"];
    if (!m.is_object()) throw ConfigError("mode.dynamic must be an object");
    detail::reject_unknown(m, {"baseline", "resizeCycle"}, "mode.dynamic.");
    DynamicMode d;
    d.baseline = detail::read_count(detail::require(m, "baseline", "mode.dynamic."), "mode.dynamic.baseline");
    d.resize_cycle =
        detail::read_positive(detail::require(m, "resizeCycle", "mode.dynamic."), "mode.dynamic.resizeCycle");
    cfg.mode = d;
  } else {
    throw ConfigError("unknown key 'mode." + mode.begin().key() + "'");
  }

  cfg.per_vm_speed = detail::read_positive(detail::require(doc, "perVmSpeed", ""), "perVmSpeed");
  cfg.deadline = Duration(detail::read_positive(detail::require(doc, "deadline", ""), "deadline"));
  cfg.db_duration = Duration(detail::read_non_negative(detail::require(doc, "dbDuration", ""), "dbDuration"));

  const json& billing = detail::require(doc, "billing", "");
  if (!billing.is_object()) throw ConfigError("billing must be an object");
  detail::reject_unknown(billing, {"price", "period"}, "billing.");
  cfg.billing.price_per_machine =
      detail::read_positive(detail::require(billing, "price", "billing."), "billing.price");
  cfg.billing.period = detail::read_positive(detail::require(billing, "period", "billing."), "billing.period");

  cfg.horizon = Time(detail::read_positive(detail::require(doc, "horizon", ""), "horizon"));

  const json& phases = detail::require(doc, "phases", "");
  if (!phases.is_array() || phases.empty()) throw ConfigError("phases must be a non-empty array");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const json& p = phases[i];
    const std::string where = "phases[" + std::to_string(i) + "].";
    if (!p.is_object()) throw ConfigError(where + " must be an object");
    detail::reject_unknown(p, {"start", "count", "kind", "cycle", "taskCost", "jobs", "costJitter"}, where);
    WorkloadPhase phase;
    phase.start = detail::read_non_negative(detail::require(p, "start", where), where + "start");
    phase.count = detail::read_count(detail::require(p, "count", where), where + "count");
    const json& kind = detail::require(p, "kind", where);
    if (kind == "closed")
      phase.spec.kind = ClientKind::closed;
    else if (kind == "open")
      phase.spec.kind = ClientKind::open;
    else
      throw ConfigError(where + "kind must be \"closed\" or \"open\"");
    phase.spec.cycle = detail::read_positive(detail::require(p, "cycle", where), where + "cycle");
    phase.spec.task_cost = detail::read_positive(detail::require(p, "taskCost", where), where + "taskCost");
    phase.spec.jobs = detail::read_count(detail::require(p, "jobs", where), where + "jobs");
    if (p.contains("costJitter")) {
      phase.spec.cost_jitter = detail::read_non_negative(p["costJitter"], where + "costJitter");
      if (phase.spec.cost_jitter > phase.spec.task_cost)
        throw ConfigError(where + "costJitter must not exceed taskCost");
    }
    if (!cfg.phases.empty() && phase.start < cfg.phases.back().start)
      throw ConfigError(where + "start: unsorted phases");
    cfg.phases.push_back(std::move(phase));
  }
  if (cfg.horizon.value() <= cfg.phases.back().start)
    throw ConfigError("horizon must be greater than the last phase start");

  const json& runs = detail::require(doc, "runs", "");
  if (!runs.is_number_integer() || runs.get<std::int64_t>() < 1) throw ConfigError("runs must be ≥ 1");
  cfg.runs = runs.get<std::int64_t>();

  const json& seed = detail::require(doc, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    throw ConfigError("seed must be a non-negative 64-bit integer");
  cfg.seed = seed.get<std::uint64_t>();
  return cfg;
}

inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace hotpool
