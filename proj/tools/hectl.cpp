// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// hectl: plan parameters, simulate encrypted closed loops, compare overheads.
//
//   hectl plan     --config builtin:batch-reactor [--scheme prelim]
//   hectl simulate --config scenario.json --override q=2^41 --out trace.csv
//   hectl compare  --config builtin:batch-reactor
//   hectl sweep    --config a.json --config b.json --seeds 4
//
// Exit codes: 0 ok, 1 parse error, 2 infeasible, 3 recovery failure,
// 4 saturation.

#include "hectl/scenario.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
  std::vector<std::string> configs;
  std::optional<std::string> scheme;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> horizon;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool many_configs = false) {
  if (many_configs) {
    cmd->add_option("--config", f.configs, "Scenario JSON path or builtin:batch-reactor")
        ->required();
  } else {
    cmd->add_option("--config", f.configs, "Scenario JSON path or builtin:batch-reactor")
        ->required()
        ->expected(1);
  }
  cmd->add_option("--scheme", f.scheme, "prelim or main");
  cmd->add_option("--backend", f.backend, "mock or lattice");
  cmd->add_option("--horizon", f.horizon, "Number of steps");
  cmd->add_option("--seed", f.seed, "Key and randomness seed");
  cmd->add_option("--override", f.overrides, "key=value (omega, s1, s2, l0, q, range_level)");
  cmd->add_option("--out", f.out, "Output path");
}

hectl::ScenarioConfig load(const std::string& source, const CommonFlags& f) {
  hectl::ScenarioConfig cfg = hectl::load_scenario(source);
  if (f.scheme) cfg.scheme = hectl::parse_scheme(*f.scheme);
  if (f.backend) {
    try {
      cfg.backend = hectl::parse_backend(*f.backend);
    } catch (const hectl::Error& e) {
      throw hectl::ParseError(e.what());
    }
  }
  if (f.horizon) cfg.horizon = *f.horizon;
  if (f.seed) cfg.seed = *f.seed;
  for (const auto& o : f.overrides) hectl::apply_override(cfg, o);
  cfg.normalize();
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw hectl::Error("cannot write '" + path + "'");
  out << text;
}

std::string summary_path(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of('/');
  const std::string stem =
      dot != std::string::npos && (slash == std::string::npos || dot > slash) ? out.substr(0, dot)
                                                                              : out;
  return stem + ".summary.json";
}

int cmd_plan(const CommonFlags& f) {
  const hectl::ScenarioConfig cfg = load(f.configs.front(), f);
  const hectl::PlanOutcome p = hectl::plan_report(cfg);
  if (!f.out.empty()) write_file(f.out, p.json + "\n");
  std::cout << p.json << "\n";
  if (!p.feasible) {
    std::cerr << "infeasible: " << p.reason << "\n";
    return hectl::kExitInfeasible;
  }
  return hectl::kExitOk;
}

int cmd_simulate(const CommonFlags& f) {
  const hectl::ScenarioConfig cfg = load(f.configs.front(), f);
  const hectl::PlanOutcome p = hectl::plan_report(cfg);
  if (!p.feasible) {
    std::cerr << "infeasible: " << p.reason << "\n";
    return hectl::kExitInfeasible;
  }
  const hectl::ClosedLoopTrace tr = hectl::run_closed_loop(cfg);
  const std::string summary = hectl::summary_json(tr);
  if (!f.out.empty()) {
    write_file(f.out, hectl::trace_csv(tr));
    write_file(summary_path(f.out), summary + "\n");
  }
  std::cout << summary << "\n";
  return hectl::exit_code_for(tr);
}

int cmd_compare(const CommonFlags& f) {
  const hectl::ScenarioConfig cfg = load(f.configs.front(), f);
  const hectl::OverheadTable t = hectl::compare_overheads(cfg);
  if (!f.out.empty()) write_file(f.out, t.render());
  std::cout << t.render();
  return hectl::kExitOk;
}

int cmd_sweep(const CommonFlags& f, unsigned seeds, unsigned threads) {
  std::vector<hectl::ScenarioConfig> configs;
  for (const auto& src : f.configs) {
    const hectl::ScenarioConfig base = load(src, f);
    for (unsigned k = 0; k < seeds; ++k) {
      hectl::ScenarioConfig c = base;
      c.seed = base.seed + k;
      configs.push_back(c);
    }
  }
  const auto traces = hectl::run_sweep(configs, threads);
  std::string out = "[\n";
  int code = hectl::kExitOk;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    out += hectl::summary_json(traces[i]);
    out += i + 1 < traces.size() ? ",\n" : "\n";
    code = std::max(code, hectl::exit_code_for(traces[i]));
  }
  out += "]\n";
  if (!f.out.empty()) write_file(f.out, out);
  std::cout << out;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted control without re-encryption: planner and simulator"};
  app.require_subcommand(1);
  CommonFlags plan_f, sim_f, cmp_f, sweep_f;
  unsigned seeds = 1, threads = 0;
  auto* plan = app.add_subcommand("plan", "Report feasibility and chosen parameters");
  add_common(plan, plan_f);
  auto* sim = app.add_subcommand("simulate", "Run the closed loop; CSV trace and JSON summary");
  add_common(sim, sim_f);
  auto* cmp = app.add_subcommand("compare", "Per-step overheads against re-encryption");
  add_common(cmp, cmp_f);
  auto* sweep = app.add_subcommand("sweep", "Independent runs in parallel");
  add_common(sweep, sweep_f, true);
  sweep->add_option("--seeds", seeds, "Seeds per config")->check(CLI::PositiveNumber);
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hectl::kExitParse;
  }

  try {
    if (plan->parsed()) return cmd_plan(plan_f);
    if (sim->parsed()) return cmd_simulate(sim_f);
    if (cmp->parsed()) return cmd_compare(cmp_f);
    if (sweep->parsed()) return cmd_sweep(sweep_f, seeds, threads);
  } catch (const hectl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return hectl::kExitParse;
  } catch (const hectl::DimensionMismatch& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return hectl::kExitParse;
  } catch (const hectl::InvalidOverride& e) {
    std::cerr << "invalid override: " << e.what() << "\n";
    return hectl::kExitInfeasible;
  } catch (const hectl::Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return hectl::kExitInfeasible;
  } catch (const hectl::AssumptionViolated& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return hectl::kExitInfeasible;
  } catch (const hectl::NoIntegerOmega& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return hectl::kExitInfeasible;
  } catch (const hectl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hectl::kExitParse;
  }
  return hectl::kExitOk;
}
