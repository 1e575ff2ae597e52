// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Scenario documents, plan reports and run summaries as JSON, plus the
// overhead comparison table. These are the pieces the command-line front end
// is built from.
//
// Matrix and vector entries are JSON strings ("1.18", "-7/20") or JSON
// integers. Binary floating-point numbers are rejected so no entry is ever
// rounded on input.

#ifndef HECTL_SCENARIO_HPP_
#define HECTL_SCENARIO_HPP_

#include "hectl/loop.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace hectl {

// "builtin:batch-reactor" or a path to a JSON file.
ScenarioConfig load_scenario(const std::string& source);
ScenarioConfig parse_scenario(std::string_view json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);

ScenarioConfig builtin_batch_reactor();

// "omega=1/10000", "q=2^41", "range_level=...", "s1=", "s2=", "l0=".
void apply_override(ScenarioConfig& cfg, const std::string& assignment);

// Decimal integer or "2^k".
BigInt parse_bigint(std::string_view text);

struct PlanOutcome {
  bool feasible = false;
  std::string reason;  // blocking condition when infeasible
  std::string json;    // deterministic report
};

PlanOutcome plan_report(const ScenarioConfig& cfg);

std::string summary_json(const ClosedLoopTrace& trace);

struct OverheadRow {
  std::string scheme;
  std::uint64_t ctrl_to_act = 0;
  std::uint64_t actuator_enc = 0;
  std::uint64_t actuator_dec = 0;
  bool measured = false;
};

struct OverheadTable {
  std::size_t n = 0, n_x = 0, w = 0;
  std::vector<OverheadRow> rows;
  std::string note;
  std::string render() const;
};

// Measures the main scheme over a short run and adds the analytic
// re-encryption row (2w ciphertexts, w Dec + w Enc at the actuator).
OverheadTable compare_overheads(const ScenarioConfig& cfg, std::uint64_t steps = 3);
// Break-even note from the Enc/Dec cost ratio of 3 to 4.
std::string break_even_note(std::size_t n, std::size_t n_x, std::size_t w);

// Exit codes shared by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitInfeasible = 2,
  kExitRecovery = 3,
  kExitSaturation = 4,
};

int exit_code_for(const ClosedLoopTrace& trace);

}  // namespace hectl

#endif  // HECTL_SCENARIO_HPP_
