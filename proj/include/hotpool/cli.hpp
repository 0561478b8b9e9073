#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hotpool/config.hpp"
#include "hotpool/harness.hpp"

namespace hotpool {

namespace detail {

inline std::string verdict_line(const AggregateReport& report, const SlaVerdict& v) {
  std::string line = "SLA " + std::string(v.pass ? "PASS" : "FAIL") + " scenario=" + report.scenario +
                     " runs=" + std::to_string(report.runs) +
                     " mean_success_rate=" + to_decimal(report.mean_success_rate) +
                     (v.success_ok ? " (ok)" : " (below minimum)") +
                     " mean_billing_cost=" + to_decimal(report.mean_billing_cost) +
                     (v.cost_ok ? " (ok)" : " (over budget)") +
                     " worst_success_rate=" + to_decimal(v.worst_success_rate) +
                     " worst_billing_cost=" + to_decimal(v.worst_billing_cost);
  return line;
}

struct Experiment {
  AggregateReport report;
  SlaVerdict verdict;
  std::vector<RunMetrics> runs;
};

inline Experiment run_experiment(ScenarioConfig cfg, std::optional<std::int64_t> runs,
                                 std::optional<std::uint64_t> seed) {
  if (runs) {
    if (*runs < 1) throw ConfigError("runs must be ≥ 1");
    cfg.runs = *runs;
  }
  if (seed) cfg.seed = *seed;
  Experiment e;
  e.runs = run_all(cfg);
  e.report = aggregate(e.runs);
  e.verdict = evaluate_sla(e.report, SlaSpec{});
  return e;
}

}  // namespace detail

/// Entry point of the `hotpool` tool. Exit codes: 0 success, 1 SLA failure
/// under `simulate --strict`, 2 usage or configuration error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Hot-pool cloud service simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::int64_t> runs;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool strict = false;
  auto* simulate = app.add_subcommand("simulate", "Run every seeded run of one scenario and write its outputs");
  simulate->add_option("--config", config_path, "Scenario config (JSON)")->required();
  simulate->add_option("--runs", runs, "Override the number of runs");
  simulate->add_option("--seed", seed, "Override the master seed");
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_flag("--strict", strict, "Exit with 1 when the SLA verdict fails");

  std::vector<std::string> config_list;
  std::optional<std::int64_t> compare_runs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run several scenarios and write a comparison table");
  compare->add_option("--configs", config_list, "Comma-separated scenario configs")->required()->delimiter(',');
  compare->add_option("--out", compare_out, "Output directory")->required();
  compare->add_option("--runs", compare_runs, "Override the number of runs of every scenario");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario config");
  validate->add_option("--config", validate_path, "Scenario config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*validate) {
      ScenarioConfig cfg = load_config_file(validate_path);
      out << "valid: " << cfg.name << " (" << (cfg.is_static() ? "static" : "dynamic") << ", horizon "
          << cfg.horizon.value().get_str() << ", " << cfg.phases.size() << " phases, " << cfg.runs << " runs)\n";
      return 0;
    }

    if (*simulate) {
      ScenarioConfig cfg = load_config_file(config_path);
      auto e = detail::run_experiment(cfg, runs, seed);
      for (const auto& path : emit_outputs(e.report, e.runs, e.verdict, SlaSpec{}, out_dir))
        out << "wrote " << path.string() << "\n";
      out << detail::verdict_line(e.report, e.verdict) << "\n";
      return strict && !e.verdict.pass ? 1 : 0;
    }

    if (*compare) {
      std::vector<ScenarioConfig> configs;
      for (const auto& path : config_list) configs.push_back(load_config_file(path));
      std::vector<ComparisonRow> rows;
      for (const auto& cfg : configs) {
        auto e = detail::run_experiment(cfg, compare_runs, std::nullopt);
        emit_outputs(e.report, e.runs, e.verdict, SlaSpec{}, std::filesystem::path(compare_out) / cfg.name);
        out << detail::verdict_line(e.report, e.verdict) << "\n";
        rows.push_back(ComparisonRow{cfg.name, e.report.mean_success_rate, e.report.mean_billing_cost, e.verdict.pass});
      }
      out << "wrote " << write_comparison(rows, compare_out).string() << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace hotpool
