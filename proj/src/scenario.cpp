// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/scenario.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hectl {

using json = nlohmann::ordered_json;

namespace {

Rational entry_from_json(const json& j, const std::string& where) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) {
    return Rational(BigInt(j.dump()));
  }
  if (j.is_number_float()) {
    throw ParseError(where + ": binary floats are not accepted; quote the value");
  }
  throw ParseError(where + ": expected a number string or integer");
}

RationalVector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  RationalVector v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    v.push_back(entry_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return v;
}

RationalMatrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ParseError(where + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  std::vector<Rational> entries;
  for (std::size_t i = 0; i < rows; ++i) {
    const RationalVector row = vector_from_json(j[i], where + "[" + std::to_string(i) + "]");
    if (i == 0) cols = row.size();
    if (row.size() != cols || cols == 0) throw ParseError(where + ": ragged or empty rows");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return RationalMatrix(rows, cols, std::move(entries));
}

json matrix_to_json(const RationalMatrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(to_string(m(i, j)));
    out.push_back(row);
  }
  return out;
}

json vector_to_json(const RationalVector& v) {
  json out = json::array();
  for (const auto& e : v) out.push_back(to_string(e));
  return out;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  return obj.at(key);
}

std::uint64_t uint_from_json(const json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw ParseError(where + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

Rational rational_field(const json& j, const std::string& where) {
  return entry_from_json(j, where);
}

json double_json(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

json certs_json(const std::vector<IntegralityCertificate>& certs,
                const std::vector<const RationalMatrix*>& sources) {
  json out = json::array();
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& c = certs[i];
    json e;
    e["name"] = c.source;
    e["scale"] = to_string(c.scale);
    e["reproduces"] = i < sources.size() && sources[i] ? c.reproduces(*sources[i]) : true;
    out.push_back(e);
  }
  return out;
}

std::string q_string(const BigInt& q) { return q.get_str(); }

}  // namespace

BigInt parse_bigint(std::string_view text) {
  std::string s(text);
  const auto caret = s.find('^');
  try {
    if (caret != std::string::npos) {
      BigInt base(s.substr(0, caret));
      const unsigned long e = std::stoul(s.substr(caret + 1));
      BigInt out;
      mpz_pow_ui(out.get_mpz_t(), base.get_mpz_t(), e);
      return out;
    }
    return BigInt(s);
  } catch (const std::exception&) {
    throw ParseError("not an integer: '" + s + "'");
  }
}

ScenarioConfig builtin_batch_reactor() {
  ScenarioConfig cfg;
  cfg.name = "batch-reactor";
  cfg.plant.A = RationalMatrix{{"1.18", "0", "0.51", "-0.4"},
                               {"-0.05", "0.66", "-0.01", "0.06"},
                               {"0.08", "0.34", "0.56", "0.38"},
                               {"0", "0.34", "0.09", "0.85"}};
  cfg.plant.B = RationalMatrix{{"0"}, {"0.47"}, {"0.21"}, {"0.21"}};
  cfg.plant.C = RationalMatrix{{"1", "0", "1", "-1"}, {"0", "1", "0", "0"}};
  cfg.ctrl.F = RationalMatrix{{"0.26", "-0.03", "-0.29", "0.31"},
                              {"-0.32", "1.24", "1.4", "-3.05"},
                              {"-0.45", "0.02", "0.87", "-0.75"},
                              {"-0.05", "-0.04", "0.72", "-0.51"}};
  cfg.ctrl.G = RationalMatrix{{"-0.52", "-0.03"}, {"5.46", "1.25"}, {"2.32", "-0.01"},
                              {"2.28", "-0.08"}};
  cfg.ctrl.R_ref = RationalMatrix::identity(4);
  cfg.ctrl.H = RationalMatrix{{"1.02", "-2.65", "-2.65", "6.28"}};
  cfg.ctrl.J = RationalMatrix{{"-11.3", "-4.09"}};
  cfg.ctrl.S = RationalMatrix{{"1", "1", "1", "1"}};
  cfg.ctrl.x0 = RationalVector(4, Rational(0));
  cfg.x_p0 = RationalVector(4, Rational(0));
  cfg.reference = {parse_rational("1.1"), parse_rational("5.2"), parse_rational("3.5"),
                   parse_rational("6.7")};
  cfg.r_e0 = RationalVector(4, Rational(0));
  cfg.observer_gain = RationalMatrix{{"2.0879", "0.0705"},
                                     {"-0.0024", "1.4954"},
                                     {"1.2623", "15.4110"},
                                     {"1.5956", "14.5017"}};
  cfg.scheme = Scheme::main;
  cfg.backend = Backend::mock;
  cfg.horizon = 600;
  cfg.seed = 1;
  return cfg;
}

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario must be a JSON object");
  ScenarioConfig cfg;
  if (doc.contains("builtin")) {
    const std::string b = doc.at("builtin").get<std::string>();
    if (b != "batch-reactor") throw ParseError("unknown builtin '" + b + "'");
    cfg = builtin_batch_reactor();
  }
  if (doc.contains("name")) cfg.name = doc.at("name").get<std::string>();
  if (doc.contains("plant")) {
    const json& p = doc.at("plant");
    cfg.plant.A = matrix_from_json(field(p, "A", "plant"), "plant.A");
    cfg.plant.B = matrix_from_json(field(p, "B", "plant"), "plant.B");
    cfg.plant.C = matrix_from_json(field(p, "C", "plant"), "plant.C");
    if (p.contains("x_p0_bound")) {
      cfg.plant.x_p0_bound = rational_field(p.at("x_p0_bound"), "plant.x_p0_bound");
    }
  }
  if (doc.contains("controller")) {
    const json& c = doc.at("controller");
    cfg.ctrl.F = matrix_from_json(field(c, "F", "controller"), "controller.F");
    cfg.ctrl.G = matrix_from_json(field(c, "G", "controller"), "controller.G");
    cfg.ctrl.R_ref = matrix_from_json(field(c, "R", "controller"), "controller.R");
    cfg.ctrl.H = matrix_from_json(field(c, "H", "controller"), "controller.H");
    cfg.ctrl.J = matrix_from_json(field(c, "J", "controller"), "controller.J");
    cfg.ctrl.S = matrix_from_json(field(c, "S", "controller"), "controller.S");
    cfg.ctrl.x0 = c.contains("x0") ? vector_from_json(c.at("x0"), "controller.x0")
                                   : RationalVector(cfg.ctrl.F.rows(), Rational(0));
  }
  if (cfg.plant.A.empty() || cfg.ctrl.F.empty()) {
    throw ParseError("scenario needs 'plant' and 'controller' (or 'builtin')");
  }
  if (doc.contains("x_p0")) cfg.x_p0 = vector_from_json(doc.at("x_p0"), "x_p0");
  if (doc.contains("reference")) cfg.reference = vector_from_json(doc.at("reference"), "reference");
  if (doc.contains("reference_schedule")) {
    cfg.reference_schedule.clear();
    const json& s = doc.at("reference_schedule");
    if (!s.is_array()) throw ParseError("reference_schedule must be an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.reference_schedule.push_back(
          vector_from_json(s[i], "reference_schedule[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("r_e0")) cfg.r_e0 = vector_from_json(doc.at("r_e0"), "r_e0");
  if (doc.contains("observer_gain")) {
    if (doc.at("observer_gain").is_null()) {
      cfg.observer_gain.reset();
    } else {
      cfg.observer_gain = matrix_from_json(doc.at("observer_gain"), "observer_gain");
    }
  }
  if (doc.contains("gain_decimals")) {
    const json& g = doc.at("gain_decimals");
    if (g.is_null()) {
      cfg.gain_decimals.reset();
    } else {
      cfg.gain_decimals = static_cast<unsigned>(uint_from_json(g, "gain_decimals"));
    }
  }
  if (doc.contains("scheme")) cfg.scheme = parse_scheme(doc.at("scheme").get<std::string>());
  if (doc.contains("backend")) {
    try {
      cfg.backend = parse_backend(doc.at("backend").get<std::string>());
    } catch (const Error& e) {
      throw ParseError(e.what());
    }
  }
  if (doc.contains("lattice")) {
    const json& l = doc.at("lattice");
    if (l.contains("dimension")) cfg.lattice.dimension = uint_from_json(l.at("dimension"), "lattice.dimension");
    if (l.contains("pk_samples")) cfg.lattice.pk_samples = uint_from_json(l.at("pk_samples"), "lattice.pk_samples");
    if (l.contains("noise_width")) {
      cfg.lattice.noise_width =
          static_cast<std::uint32_t>(uint_from_json(l.at("noise_width"), "lattice.noise_width"));
    }
    if (l.contains("delta_bits")) {
      const json& d = l.at("delta_bits");
      if (d.is_string() && d.get<std::string>() == "auto") {
        cfg.auto_delta_bits = true;
      } else {
        cfg.lattice.delta_bits = static_cast<std::uint32_t>(uint_from_json(d, "lattice.delta_bits"));
        cfg.auto_delta_bits = false;
      }
    }
  }
  if (doc.contains("horizon")) cfg.horizon = uint_from_json(doc.at("horizon"), "horizon");
  if (doc.contains("seed")) cfg.seed = uint_from_json(doc.at("seed"), "seed");
  if (doc.contains("overrides")) {
    const json& o = doc.at("overrides");
    if (!o.is_object()) throw ParseError("overrides must be an object");
    for (const auto& [key, value] : o.items()) {
      std::string v = value.is_string() ? value.get<std::string>() : value.dump();
      if (value.is_number_float()) throw ParseError("overrides." + key + ": quote the value");
      apply_override(cfg, key + "=" + v);
    }
  }
  try {
    cfg.normalize();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& source) {
  if (source == "builtin:batch-reactor") return builtin_batch_reactor();
  std::ifstream in(source);
  if (!in) throw ParseError("cannot open scenario '" + source + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["plant"]["A"] = matrix_to_json(cfg.plant.A);
  doc["plant"]["B"] = matrix_to_json(cfg.plant.B);
  doc["plant"]["C"] = matrix_to_json(cfg.plant.C);
  doc["plant"]["x_p0_bound"] = to_string(cfg.plant.x_p0_bound);
  doc["controller"]["F"] = matrix_to_json(cfg.ctrl.F);
  doc["controller"]["G"] = matrix_to_json(cfg.ctrl.G);
  doc["controller"]["R"] = matrix_to_json(cfg.ctrl.R_ref);
  doc["controller"]["H"] = matrix_to_json(cfg.ctrl.H);
  doc["controller"]["J"] = matrix_to_json(cfg.ctrl.J);
  doc["controller"]["S"] = matrix_to_json(cfg.ctrl.S);
  doc["controller"]["x0"] = vector_to_json(cfg.ctrl.x0);
  doc["x_p0"] = vector_to_json(cfg.x_p0);
  doc["reference"] = vector_to_json(cfg.reference);
  if (!cfg.reference_schedule.empty()) {
    json s = json::array();
    for (const auto& r : cfg.reference_schedule) s.push_back(vector_to_json(r));
    doc["reference_schedule"] = s;
  }
  doc["r_e0"] = vector_to_json(cfg.r_e0);
  if (cfg.observer_gain) doc["observer_gain"] = matrix_to_json(*cfg.observer_gain);
  doc["gain_decimals"] = cfg.gain_decimals ? json(*cfg.gain_decimals) : json(nullptr);
  doc["scheme"] = to_string(cfg.scheme);
  doc["backend"] = to_string(cfg.backend);
  doc["lattice"]["dimension"] = cfg.lattice.dimension;
  doc["lattice"]["pk_samples"] = cfg.lattice.pk_samples;
  doc["lattice"]["noise_width"] = cfg.lattice.noise_width;
  doc["lattice"]["delta_bits"] =
      cfg.auto_delta_bits ? json("auto") : json(cfg.lattice.delta_bits);
  doc["horizon"] = cfg.horizon;
  doc["seed"] = cfg.seed;
  json o = json::object();
  if (cfg.overrides.omega) o["omega"] = to_string(*cfg.overrides.omega);
  if (cfg.overrides.s1) o["s1"] = to_string(*cfg.overrides.s1);
  if (cfg.overrides.s2) o["s2"] = to_string(*cfg.overrides.s2);
  if (cfg.overrides.l0) o["l0"] = to_string(*cfg.overrides.l0);
  if (cfg.overrides.q) o["q"] = cfg.overrides.q->get_str();
  if (cfg.overrides.range_level) o["range_level"] = cfg.overrides.range_level->get_str();
  doc["overrides"] = o;
  return doc.dump(2);
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ParseError("override must be key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  if (key == "omega") {
    cfg.overrides.omega = parse_rational(value);
  } else if (key == "s1") {
    cfg.overrides.s1 = parse_rational(value);
  } else if (key == "s2") {
    cfg.overrides.s2 = parse_rational(value);
  } else if (key == "l0") {
    cfg.overrides.l0 = parse_rational(value);
  } else if (key == "q") {
    cfg.overrides.q = parse_bigint(value);
  } else if (key == "range_level") {
    cfg.overrides.range_level = parse_bigint(value);
  } else {
    throw ParseError("unknown override '" + key + "'");
  }
}

PlanOutcome plan_report(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  cfg.normalize();
  PlanOutcome out;
  json doc;
  doc["scenario"] = cfg.name;
  doc["scheme"] = to_string(cfg.scheme);
  const RationalMatrix GC = cfg.ctrl.G * cfg.plant.C;
  const RationalMatrix JC = cfg.ctrl.J * cfg.plant.C;
  if (cfg.scheme == Scheme::prelim) {
    const FeasibilityReport feas = check_prelim_feasible(cfg.plant, cfg.ctrl);
    doc["rho_c"] = feas.rho_c;
    doc["s_F"] = to_string(feas.s_F);
    try {
      const PrelimPlan p = plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
      out.feasible = true;
      doc["feasible"] = true;
      doc["omega"] = to_string(p.omega);
      doc["s1"] = to_string(p.s1);
      doc["s2"] = to_string(p.s2);
      doc["l0"] = to_string(p.l0);
      doc["q"] = q_string(p.q);
      doc["log2_q"] = log2_big(p.q);
      doc["q_required"] = p.q_required;
      doc["log2_q_required"] = std::log2(p.q_required);
      doc["q_overridden"] = p.q_overridden;
      doc["M_bound"] = p.M_bound;
      doc["increment_bound"] = p.increment_bound;
      doc["initial_bound"] = p.initial_bound;
      const RationalMatrix x0c = RationalMatrix::column(cfg.ctrl.x0);
      doc["certificates"] =
          certs_json(p.certificates, {&cfg.ctrl.F, &cfg.ctrl.G, &cfg.ctrl.R_ref, &cfg.ctrl.H,
                                      &cfg.ctrl.J, &cfg.ctrl.S, &x0c});
    } catch (const Infeasible& e) {
      out.feasible = false;
      out.reason = e.what();
      doc["feasible"] = false;
      doc["reason"] = out.reason;
    }
    out.json = doc.dump(2);
    return out;
  }

  try {
    const MainPlan p = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
    out.feasible = true;
    doc["feasible"] = true;
    doc["rho_c"] = p.rho_c;
    doc["observer_rho"] = p.observer_rho;
    doc["observer_exact"] = p.observer_exact;
    doc["L"] = matrix_to_json(p.L);
    doc["s1"] = to_string(p.s1);
    doc["s2"] = to_string(p.s2);
    doc["omega"] = to_string(p.omega);
    doc["l0"] = to_string(p.l0);
    doc["q"] = q_string(p.q);
    doc["log2_q"] = log2_big(p.q);
    doc["q_required"] = p.q_required;
    doc["log2_q_required"] = std::log2(p.q_required);
    doc["q_overridden"] = p.q_overridden;
    doc["q_terms"] = {{"observer", p.q_terms.observer},
                      {"reference", p.q_terms.reference},
                      {"input", p.q_terms.input},
                      {"sensor", p.q_terms.sensor}};
    doc["bootstrap_bound"] = p.bootstrap_bound;
    doc["C_e"] = p.C_e;
    doc["C_e_terms"] = p.ce.terms;
    doc["C_e_deadbeat_nominal"] = p.ce.deadbeat_nominal;
    doc["range_level"] = p.range_level.get_str();
    doc["log2_range_level"] = log2_big(p.range_level);
    const RationalMatrix s2B = p.s2 * cfg.plant.B;
    const RationalMatrix one(1, 1, {Rational(1)});
    doc["certificates"] = certs_json(
        p.certificates, {&cfg.plant.C, &cfg.ctrl.H, &JC, &cfg.ctrl.S, &cfg.plant.A, &s2B, &p.L,
                         &cfg.ctrl.F, &GC, &cfg.ctrl.R_ref, &one});
    doc["per_step_ctrl_to_act"] = cfg.plant.n() + cfg.ctrl.n_x() + cfg.plant.w();
  } catch (const AssumptionViolated& e) {
    out.reason = e.what();
  } catch (const NotObservable& e) {
    out.reason = e.what();
  } catch (const NoIntegerOmega& e) {
    out.reason = e.what();
  } catch (const Divergent& e) {
    out.reason = e.what();
  }
  if (!out.feasible) {
    doc["feasible"] = false;
    doc["reason"] = out.reason;
  }
  out.json = doc.dump(2);
  return out;
}

std::string summary_json(const ClosedLoopTrace& tr) {
  const auto& s = tr.summary;
  json doc;
  doc["scheme"] = to_string(tr.scheme);
  doc["backend"] = to_string(tr.backend);
  doc["steps"] = s.steps;
  if (tr.main_plan) {
    doc["q"] = q_string(tr.main_plan->q);
    doc["log2_q"] = log2_big(tr.main_plan->q);
  } else if (tr.prelim_plan) {
    doc["q"] = q_string(tr.prelim_plan->q);
    doc["log2_q"] = log2_big(tr.prelim_plan->q);
  }
  if (tr.backend == Backend::lattice) doc["delta_bits"] = tr.delta_bits;
  doc["max_log2_metric"] = double_json(s.max_log2_metric);
  doc["max_increment"] = s.max_increment;
  doc["final_diff_inf"] = s.final_diff;
  doc["final_state_gap"] = s.final_state_gap;
  doc["diff_monotone_from"] = s.monotone_from;
  doc["saturation_count"] = s.saturation_count;
  doc["recovery_failures"] = s.recovery_failures;
  doc["oracle_mismatches"] = s.oracle_mismatches;
  doc["identity_checks"] = s.identity_checks;
  doc["identity_mismatches"] = s.identity_mismatches;
  doc["noise_overflow"] = s.noise_overflow;
  if (s.noise_overflow) doc["noise_message"] = s.noise_message;
  doc["total_msgs_ctrl_to_act"] = s.total_msgs_ctrl_to_act;
  doc["total_enc_ops"] = s.total_enc_ops;
  doc["total_dec_ops"] = s.total_dec_ops;
  doc["actuator_enc_ops"] = s.actuator_enc_ops;
  doc["actuator_dec_ops"] = s.actuator_dec_ops;
  return doc.dump(2);
}

std::string break_even_note(std::size_t n, std::size_t n_x, std::size_t w) {
  const std::size_t lo = 3 * w, hi = 4 * w;
  const std::size_t ours = n_x + n;
  std::ostringstream os;
  os << "n_x + n = " << ours << ", (3~4)w = " << lo << "~" << hi << ": ";
  if (hi < ours) {
    os << "re-encryption is cheaper at the actuator (few inputs to re-encrypt)";
  } else if (ours < lo) {
    os << "the re-encryption-free scheme is competitive (many inputs to re-encrypt)";
  } else {
    os << "roughly break-even";
  }
  return os.str();
}

OverheadTable compare_overheads(const ScenarioConfig& cfg_in, std::uint64_t steps) {
  ScenarioConfig cfg = cfg_in;
  cfg.scheme = Scheme::main;
  cfg.horizon = steps;
  cfg.normalize();
  const ClosedLoopTrace tr = run_closed_loop(cfg);
  OverheadTable t;
  t.n = cfg.plant.n();
  t.n_x = cfg.ctrl.n_x();
  t.w = cfg.plant.w();
  OverheadRow ours{"re-encryption-free (measured)", 0, 0, 0, true};
  if (!tr.steps.empty()) {
    ours.ctrl_to_act = tr.steps.back().msgs_ctrl_to_act;
    ours.actuator_enc = tr.steps.back().actuator_enc_ops;
    ours.actuator_dec = tr.steps.back().actuator_dec_ops;
  }
  t.rows.push_back(ours);
  t.rows.push_back({"re-encryption (analytic)", 2 * t.w, t.w, t.w, false});
  t.note = break_even_note(t.n, t.n_x, t.w);
  return t;
}

std::string OverheadTable::render() const {
  std::ostringstream os;
  os << "n = " << n << ", n_x = " << n_x << ", w = " << w << "\n";
  os << "scheme                          ctrl->act  act Enc  act Dec\n";
  for (const auto& r : rows) {
    os << r.scheme;
    for (std::size_t i = r.scheme.size(); i < 32; ++i) os << ' ';
    os << std::string(9 - std::min<std::size_t>(9, std::to_string(r.ctrl_to_act).size()), ' ')
       << r.ctrl_to_act << "  "
       << std::string(7 - std::min<std::size_t>(7, std::to_string(r.actuator_enc).size()), ' ')
       << r.actuator_enc << "  "
       << std::string(7 - std::min<std::size_t>(7, std::to_string(r.actuator_dec).size()), ' ')
       << r.actuator_dec << "\n";
  }
  os << "formulas: ours n + n_x + w ciphertexts, 0 Enc, n + n_x + w Dec; "
        "re-encryption 2w ciphertexts, w Enc, w Dec\n";
  os << note << "\n";
  return os.str();
}

int exit_code_for(const ClosedLoopTrace& tr) {
  if (tr.summary.recovery_failures > 0 || tr.summary.noise_overflow ||
      tr.summary.oracle_mismatches > 0) {
    return kExitRecovery;
  }
  if (tr.summary.saturation_count > 0) return kExitSaturation;
  return kExitOk;
}

}  // namespace hectl
