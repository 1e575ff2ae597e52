// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "hectl/scenario.hpp"

#include <string>

using namespace hectl;

namespace {

const char* kSmall = R"({
  "name": "small",
  "plant": {"A": [["1/2"]], "B": [["1"]], "C": [["1"]]},
  "controller": {"F": [["1/2"]], "G": [["-1/2"]], "R": [["1/2"]],
                 "H": [["1/2"]], "J": [["-1"]], "S": [["1"]]},
  "x_p0": ["1"],
  "reference": ["2"],
  "scheme": "prelim",
  "horizon": 30
})";

}  // namespace

TEST_CASE("scenario JSON parses exact strings and integers") {
  const ScenarioConfig cfg = parse_scenario(kSmall);
  CHECK(cfg.name == "small");
  CHECK(cfg.plant.A == RationalMatrix{{"1/2"}});
  CHECK(cfg.x_p0 == RationalVector{Rational(1)});
  CHECK(cfg.scheme == Scheme::prelim);
  CHECK(cfg.horizon == 30);
  CHECK(cfg.ctrl.x0 == RationalVector{Rational(0)});

  const ScenarioConfig back = parse_scenario(scenario_to_json(cfg));
  CHECK(back.plant.A == cfg.plant.A);
  CHECK(back.ctrl.J == cfg.ctrl.J);
  CHECK(back.reference == cfg.reference);
}

TEST_CASE("scenario JSON rejects floats and malformed input") {
  CHECK_THROWS_AS(parse_scenario(R"({"plant": {"A": [[0.5]], "B": [["1"]], "C": [["1"]]},
      "controller": {"F": [["1"]], "G": [["1"]], "R": [["1"]], "H": [["1"]], "J": [["1"]], "S": [["1"]]}})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario("not json"), ParseError);
  CHECK_THROWS_AS(parse_scenario("{}"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"builtin": "other"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"builtin": "batch-reactor", "reference": ["1"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"builtin": "batch-reactor", "overrides": {"omega": 0.5}})"),
                  ParseError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ParseError);
}

TEST_CASE("builtin scenario by name and by JSON key agree") {
  const ScenarioConfig a = load_scenario("builtin:batch-reactor");
  const ScenarioConfig b = parse_scenario(R"({"builtin": "batch-reactor"})");
  CHECK(scenario_to_json(a) == scenario_to_json(b));
}

TEST_CASE("shipped fixture matches the builtin scenario") {
  const ScenarioConfig f = load_scenario(std::string(HECTL_FIXTURE_DIR) + "/batch_reactor.json");
  CHECK(scenario_to_json(f) == scenario_to_json(builtin_batch_reactor()));
}

TEST_CASE("plan reports are deterministic") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const PlanOutcome a = plan_report(cfg), b = plan_report(cfg);
  CHECK(a.feasible);
  CHECK(a.json == b.json);
  CHECK(a.json.find("\"q\": \"4611686018427387904\"") != std::string::npos);
  CHECK(a.json.find("\"omega\": \"1/10000\"") != std::string::npos);
  CHECK(a.json.find("\"s2\": \"1/100\"") != std::string::npos);
}

TEST_CASE("preliminary plan report names the blocking condition") {
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.scheme = Scheme::prelim;
  const PlanOutcome p = plan_report(cfg);
  CHECK_FALSE(p.feasible);
  CHECK(p.reason.find("rho_c >= s_F") != std::string::npos);
}

TEST_CASE("overrides are parsed and validated before simulation") {
  ScenarioConfig cfg = builtin_batch_reactor();
  apply_override(cfg, "q=2^41");
  CHECK(*cfg.overrides.q == BigInt(1) << 41);
  apply_override(cfg, "omega=1/100000");
  CHECK(*cfg.overrides.omega == Rational(1, 100000));
  CHECK(plan_report(cfg).feasible);
  CHECK_THROWS_AS(apply_override(cfg, "bogus=1"), ParseError);
  CHECK_THROWS_AS(apply_override(cfg, "q"), ParseError);
  CHECK_THROWS_AS(apply_override(cfg, "q=abc"), ParseError);
  apply_override(cfg, "omega=1/30");
  CHECK_THROWS_AS(plan_report(cfg), InvalidOverride);
  CHECK(parse_bigint("12345") == 12345);
}

TEST_CASE("prelim simulation on the small fixture") {
  const ScenarioConfig cfg = parse_scenario(kSmall);
  const ClosedLoopTrace tr = run_closed_loop(cfg);
  CHECK(tr.summary.steps == 30);
  CHECK(tr.summary.recovery_failures == 0);
  CHECK(exit_code_for(tr) == kExitOk);
  const std::string s = summary_json(tr);
  CHECK(s.find("\"recovery_failures\": 0") != std::string::npos);
}

TEST_CASE("exit codes reflect run flags") {
  ClosedLoopTrace tr;
  CHECK(exit_code_for(tr) == kExitOk);
  tr.summary.saturation_count = 1;
  CHECK(exit_code_for(tr) == kExitSaturation);
  tr.summary.recovery_failures = 1;
  CHECK(exit_code_for(tr) == kExitRecovery);
}

TEST_CASE("overhead comparison") {
  const OverheadTable t = compare_overheads(builtin_batch_reactor());
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].ctrl_to_act == 9);
  CHECK(t.rows[0].actuator_enc == 0);
  CHECK(t.rows[0].actuator_dec == 9);
  CHECK(t.rows[1].ctrl_to_act == 2);
  CHECK(t.rows[1].actuator_enc == 1);
  const std::string text = t.render();
  CHECK(text.find("n + n_x + w") != std::string::npos);
  CHECK(text.find("re-encryption is cheaper") != std::string::npos);

  CHECK(break_even_note(4, 4, 10).find("re-encryption-free scheme is competitive") !=
        std::string::npos);
  CHECK(break_even_note(4, 4, 1).find("re-encryption is cheaper") != std::string::npos);
  CHECK(break_even_note(5, 4, 3).find("break-even") != std::string::npos);
}
