#pragma once

// Builds one world per run, samples it every interval, and turns a set of
// runs into an aggregate report, an SLA verdict, and CSV/JSON files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hotpool/cloud.hpp"
#include "hotpool/config.hpp"
#include "hotpool/kernel.hpp"
#include "hotpool/rational.hpp"
#include "hotpool/rng.hpp"
#include "hotpool/service.hpp"
#include "hotpool/workload.hpp"

namespace hotpool {

struct Sample {
  std::int64_t t = 0;
  std::size_t provisioned = 0;
  std::size_t in_use = 0;
};

struct RunMetrics {
  std::string scenario;
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;
  std::vector<RequestRecord> requests;
  std::int64_t expected_requests = 0;
  Rational billing_cost{0};
  bool deadlocked_residue = false;

  std::size_t issued() const { return requests.size(); }
  std::size_t completed() const {
    return std::count_if(requests.begin(), requests.end(), [](const auto& r) { return r.completed_at.has_value(); });
  }
  std::size_t successes() const {
    return std::count_if(requests.begin(), requests.end(), [](const auto& r) { return r.success; });
  }
  /// successes / issued; requests unfinished at the horizon count as failures.
  Rational success_rate() const {
    if (requests.empty()) return Rational(0);
    return make_rational(static_cast<long>(successes()), static_cast<long>(issued()));
  }
};

/// Launch/shutdown history of one VM, for post-hoc billing checks.
struct InstanceSpan {
  Rational launched;
  std::optional<Rational> shutdown;
};

struct RunOptions {
  bool record_trace = false;
  /// Keeps the per-VM lifecycle in `RunArtifacts::instances`.
  bool keep_instances = false;
};

struct RunArtifacts {
  RunMetrics metrics;
  Trace trace;
  std::vector<InstanceSpan> instances;
};

/// One fully wired hot-pool world.
class World {
 public:
  World(const ScenarioConfig& cfg, std::uint64_t seed, KernelOptions options)
      : kernel_(seed, options),
        cloud_(kernel_, cfg.billing),
        db_(kernel_, cfg.db_duration),
        lb_(kernel_, cfg.lb_wake),
        endpoint_(kernel_, lb_, cfg.deadline),
        factory_(kernel_, cloud_, db_, cfg.per_vm_speed) {
    if (const auto* s = std::get_if<StaticMode>(&cfg.mode)) {
      const std::int64_t workers = s->workers;
      kernel_.spawn("main", nullptr, [this, workers](ActorRef) { return deploy_static(workers); });
    } else {
      const auto& d = std::get<DynamicMode>(cfg.mode);
      autoscaler_ = std::make_unique<Autoscaler>(kernel_, cloud_, lb_, factory_, AutoscalerConfig{d.baseline, d.resize_cycle});
      kernel_.send(autoscaler_->ref(), autoscaler_->run());
    }
    driver_ = std::make_unique<WorkloadDriver>(kernel_, endpoint_, cfg.phases, splitmix64(seed ^ 0xC057C057C057C057ULL));
    kernel_.send(driver_->ref(), driver_->run());
  }

  Kernel& kernel() { return kernel_; }
  CloudProvider& cloud() { return cloud_; }
  LoadBalancer& load_balancer() { return lb_; }
  ServiceEndpoint& endpoint() { return endpoint_; }
  WorkloadDriver& driver() { return *driver_; }
  Autoscaler* autoscaler() { return autoscaler_.get(); }

 private:
  // Static deployment: launch a VM per worker and register each worker.
  Proc<void> deploy_static(std::int64_t workers) {
    for (std::int64_t i = 0; i < workers; ++i) {
      Worker* w = factory_.deploy();
      kernel_.send(lb_.ref(), lb_.add_worker(w));
    }
    co_return;
  }

  Kernel kernel_;
  CloudProvider cloud_;
  Database db_;
  LoadBalancer lb_;
  ServiceEndpoint endpoint_;
  WorkerFactory factory_;
  std::unique_ptr<Autoscaler> autoscaler_;
  std::unique_ptr<WorkloadDriver> driver_;
};

inline RunArtifacts run_scenario_detailed(const ScenarioConfig& cfg, std::size_t run_index, RunOptions options = {}) {
  if (run_index >= static_cast<std::size_t>(cfg.runs)) throw Error("run index out of range");
  RunArtifacts out;
  RunMetrics& m = out.metrics;
  m.scenario = cfg.name;
  m.run_id = run_index;
  m.seed = mix_seed(cfg.seed, run_index);

  World world(cfg, m.seed, KernelOptions{options.record_trace});
  const std::int64_t last_sample = floor_of(cfg.horizon.value()).get_si();
  auto sample = [&](std::int64_t t) {
    m.samples.push_back(Sample{t, world.cloud().active_count(), world.load_balancer().pool().in_use_count()});
  };
  world.kernel().on_tick(sample);
  out.trace = world.kernel().run_until(cfg.horizon);
  // The kernel stops early once nothing is scheduled; the state is frozen
  // from then on.
  for (std::int64_t t = m.samples.empty() ? 0 : m.samples.back().t + 1; t <= last_sample; ++t) sample(t);

  m.requests = world.endpoint().requests();
  m.expected_requests = world.driver().expected_requests();
  m.billing_cost = world.cloud().accumulated_cost(cfg.horizon);
  m.deadlocked_residue = out.trace.deadlocked_residue;
  if (options.keep_instances) {
    for (const auto& dc : world.cloud().instances()) {
      InstanceSpan span{dc->launched_at().value(), std::nullopt};
      if (dc->shutdown_at()) span.shutdown = dc->shutdown_at()->value();
      out.instances.push_back(std::move(span));
    }
  }
  return out;
}

/// One seeded run of `cfg`: per-run seed = mix_seed(cfg.seed, run_index).
inline RunMetrics run_scenario(const ScenarioConfig& cfg, std::size_t run_index) {
  return run_scenario_detailed(cfg, run_index).metrics;
}

inline std::vector<RunMetrics> run_all(const ScenarioConfig& cfg) {
  std::vector<RunMetrics> runs;
  runs.reserve(static_cast<std::size_t>(cfg.runs));
  for (std::int64_t i = 0; i < cfg.runs; ++i) runs.push_back(run_scenario(cfg, static_cast<std::size_t>(i)));
  return runs;
}

struct AggregateReport {
  std::string scenario;
  std::size_t runs = 0;
  Rational mean_success_rate{0};
  std::vector<Rational> per_run_success_rates;
  Rational mean_billing_cost{0};
  std::vector<Rational> per_run_billing_costs;
  std::vector<Rational> mean_provisioned;
  std::vector<Rational> mean_in_use;
  std::size_t total_unfinished = 0;
  std::size_t deadlocked_runs = 0;

  std::int64_t last_sample() const { return static_cast<std::int64_t>(mean_provisioned.size()) - 1; }
};

inline AggregateReport aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw Error("aggregate needs at least one run");
  AggregateReport r;
  r.scenario = runs.front().scenario;
  r.runs = runs.size();
  const std::size_t points = runs.front().samples.size();
  r.mean_provisioned.assign(points, Rational(0));
  r.mean_in_use.assign(points, Rational(0));

  for (const auto& run : runs) {
    if (run.scenario != r.scenario) throw Error("cannot aggregate mixed scenarios");
    if (run.samples.size() != points) throw Error("runs disagree on sample count");
    r.per_run_success_rates.push_back(run.success_rate());
    r.per_run_billing_costs.push_back(run.billing_cost);
    r.mean_success_rate += run.success_rate();
    r.mean_billing_cost += run.billing_cost;
    for (std::size_t i = 0; i < points; ++i) {
      r.mean_provisioned[i] += Rational(static_cast<long>(run.samples[i].provisioned));
      r.mean_in_use[i] += Rational(static_cast<long>(run.samples[i].in_use));
    }
    r.total_unfinished += run.issued() - run.completed();
    if (run.deadlocked_residue) ++r.deadlocked_runs;
  }
  const Rational n(static_cast<long>(runs.size()));
  r.mean_success_rate /= n;
  r.mean_billing_cost /= n;
  for (auto& v : r.mean_provisioned) v /= n;
  for (auto& v : r.mean_in_use) v /= n;
  return r;
}

struct SlaSpec {
  Rational min_success_rate{9, 10};
  Rational max_billing_cost{250000};
  Duration deadline{10};
  Time window{300};
};

struct SlaVerdict {
  bool success_ok = false;
  bool cost_ok = false;
  bool pass = false;
  Rational worst_success_rate{0};
  Rational worst_billing_cost{0};
};

inline SlaVerdict evaluate_sla(const AggregateReport& report, const SlaSpec& sla = {}) {
  if (sla.min_success_rate <= 0 || sla.min_success_rate > 1) throw Error("SLA success rate must lie in (0, 1]");
  if (Rational(report.last_sample()) < sla.window.value()) throw Error("report does not cover the SLA window");
  SlaVerdict v;
  v.success_ok = report.mean_success_rate >= sla.min_success_rate;
  v.cost_ok = report.mean_billing_cost <= sla.max_billing_cost;
  v.pass = v.success_ok && v.cost_ok;
  v.worst_success_rate = *std::min_element(report.per_run_success_rates.begin(), report.per_run_success_rates.end());
  v.worst_billing_cost = *std::max_element(report.per_run_billing_costs.begin(), report.per_run_billing_costs.end());
  return v;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const AggregateReport& report, const SlaVerdict& verdict, const SlaSpec& sla) {
  using nlohmann::ordered_json;
  auto decimals = [](const std::vector<Rational>& xs) {
    ordered_json arr = ordered_json::array();
    for (const auto& x : xs) arr.push_back(to_decimal(x));
    return arr;
  };
  ordered_json j;
  j["scenario"] = report.scenario;
  j["runs"] = report.runs;
  j["meanSuccessRate"] = to_decimal(report.mean_success_rate);
  j["perRunSuccessRates"] = decimals(report.per_run_success_rates);
  j["meanBillingCost"] = to_decimal(report.mean_billing_cost);
  j["perRunBillingCosts"] = decimals(report.per_run_billing_costs);
  j["unfinishedRequests"] = report.total_unfinished;
  j["deadlockedRuns"] = report.deadlocked_runs;
  j["meanProvisioned"] = decimals(report.mean_provisioned);
  j["meanInUse"] = decimals(report.mean_in_use);
  ordered_json s;
  s["minSuccessRate"] = to_decimal(sla.min_success_rate);
  s["maxBillingCost"] = to_decimal(sla.max_billing_cost);
  s["deadline"] = to_decimal(sla.deadline.value());
  s["window"] = to_decimal(sla.window.value());
  s["successOk"] = verdict.success_ok;
  s["costOk"] = verdict.cost_ok;
  s["pass"] = verdict.pass;
  s["worstSuccessRate"] = to_decimal(verdict.worst_success_rate);
  s["worstBillingCost"] = to_decimal(verdict.worst_billing_cost);
  j["sla"] = std::move(s);
  return j;
}

/// Writes summary.csv, timeseries.csv and report.json into `dir`.
inline std::vector<std::filesystem::path> emit_outputs(const AggregateReport& report, const std::vector<RunMetrics>& runs,
                                                       const SlaVerdict& verdict, const SlaSpec& sla,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());

  const auto summary_path = dir / "summary.csv";
  {
    auto out = detail::open_output(summary_path);
    out << "run,seed,issued,completed,successes,success_rate,billing_cost\n";
    for (const auto& r : runs)
      out << r.run_id << ',' << r.seed << ',' << r.issued() << ',' << r.completed() << ',' << r.successes() << ','
          << to_decimal(r.success_rate()) << ',' << to_decimal(r.billing_cost) << '\n';
    detail::finish_output(out, summary_path);
  }

  const auto series_path = dir / "timeseries.csv";
  {
    auto out = detail::open_output(series_path);
    out << "run,t,provisioned,in_use\n";
    for (const auto& r : runs)
      for (const auto& s : r.samples) out << r.run_id << ',' << s.t << ',' << s.provisioned << ',' << s.in_use << '\n';
    detail::finish_output(out, series_path);
  }

  const auto report_path = dir / "report.json";
  {
    auto out = detail::open_output(report_path);
    out << report_json(report, verdict, sla).dump(2) << '\n';
    detail::finish_output(out, report_path);
  }
  return {summary_path, series_path, report_path};
}

struct ComparisonRow {
  std::string scenario;
  Rational mean_success_rate;
  Rational mean_billing_cost;
  bool sla_pass = false;
};

inline std::filesystem::path write_comparison(const std::vector<ComparisonRow>& rows, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  const auto path = dir / "comparison.csv";
  auto out = detail::open_output(path);
  out << "scenario,mean_success_rate,mean_billing_cost,sla_pass\n";
  for (const auto& r : rows)
    out << r.scenario << ',' << to_decimal(r.mean_success_rate) << ',' << to_decimal(r.mean_billing_cost) << ','
        << (r.sla_pass ? "true" : "false") << '\n';
  detail::finish_output(out, path);
  return path;
}

}  // namespace hotpool
