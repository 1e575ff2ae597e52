// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks on the batch reactor and randomized fixtures. Prints one
// PASS/FAIL line per criterion and exits nonzero if any criterion fails.

#include "hectl/scenario.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hectl;

namespace {

// Pinned tolerances.
constexpr double kRhoC = 0.8655, kRhoCTol = 1e-3;
constexpr double kObserverRhoMax = 1e-5;
constexpr double kQPaper = 3.2508e18, kQFactor = 4.0, kLog2QPaper = 61.4955, kLog2Tol = 2.0;
constexpr double kTermRelTol = 1e-9;
constexpr double kMetricMax = 39.5 + 0.5;
constexpr double kFinalDiffMax = 1e-6;
constexpr double kStateGapMax = 1e-6;
constexpr double kRangePaper = 1.3594e13;
constexpr double kPlanSeconds = 1.0, kRunSeconds = 10.0;
constexpr int kRandomMain = 100, kRandomMainSteps = 50;
constexpr int kRandomPrelim = 20, kRandomPrelimSteps = 200;
constexpr int kHeTrials = 10000;
constexpr int kBackendSteps = 50;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd to_eigen(const RationalMatrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j).get_d();
  }
  return e;
}

double row_norm(const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Shared 600-step mock run at q = 2^41 for criteria 4, 5, 6 and 10.
struct BatchRun {
  ClosedLoopTrace trace;
  double seconds = 0;
};

const BatchRun& batch_run() {
  static const BatchRun run = [] {
    ScenarioConfig cfg = builtin_batch_reactor();
    cfg.overrides.q = BigInt(1) << 41;
    cfg.horizon = 600;
    const auto t0 = std::chrono::steady_clock::now();
    BatchRun r;
    r.trace = run_closed_loop(cfg);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

void criterion1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = builtin_batch_reactor();
  const FeasibilityReport f = check_prelim_feasible(cfg.plant, cfg.ctrl);
  bool threw = false;
  std::string reason;
  try {
    plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
  } catch (const Infeasible& e) {
    threw = true;
    reason = e.what();
  }
  const double dt = seconds_since(t0);
  o.detail << "rho_c=" << f.rho_c << " s_F=" << to_string(f.s_F)
           << " feasible=" << f.feasible << " time=" << dt << "s";
  o.require(std::abs(f.rho_c - kRhoC) <= kRhoCTol, "rho_c within 1e-3 of 0.8655");
  o.require(f.s_F == Rational(1, 100), "s_F == 1/100");
  o.require(!f.feasible && threw && reason.find("rho_c >= s_F") != std::string::npos,
            "preliminary scheme declared infeasible");
  o.require(dt < kPlanSeconds, "runtime < 1 s");
}

void criterion2(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan p = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  const double dt = seconds_since(t0);

  // Recompute every scaled matrix from the model and test integrality directly.
  const RationalMatrix& A = cfg.plant.A;
  const RationalMatrix& B = cfg.plant.B;
  const RationalMatrix& C = cfg.plant.C;
  const RationalMatrix& L = *cfg.observer_gain;
  const std::vector<std::pair<RationalMatrix, Rational>> scaled = {
      {C, p.s1},
      {cfg.ctrl.H, p.s2},
      {cfg.ctrl.J * C, p.s2},
      {cfg.ctrl.S, p.s2},
      {A, p.omega},
      {p.s2 * B, p.omega},
      {L, p.omega},
      {cfg.ctrl.F, p.omega},
      {cfg.ctrl.G * C, p.omega},
      {cfg.ctrl.R_ref, p.omega},
      {RationalMatrix(1, 1, {Rational(1)}), p.omega}};
  int integral = 0;
  for (const auto& [m, a] : scaled) {
    const RationalMatrix s = m / a;
    bool ok = true;
    for (const auto& e : s.entries()) ok = ok && e.get_den() == 1;
    integral += ok;
  }
  int reproduce = 0;
  for (std::size_t i = 0; i < p.certificates.size() && i < scaled.size(); ++i) {
    reproduce += p.certificates[i].reproduces(scaled[i].first);
  }
  const double rho = spectral_radius(A - L * C);
  o.detail << "s1=" << to_string(p.s1) << " s2=" << to_string(p.s2)
           << " omega=" << to_string(p.omega) << " certificates=" << p.certificates.size()
           << " integral=" << integral << " reproduce=" << reproduce
           << " rho(A-LC)=" << rho << " time=" << dt << "s";
  o.require(p.s1 == 1 && p.s2 == Rational(1, 100) && p.omega == Rational(1, 10000),
            "s1=1, s2=1/100, omega=1/10000");
  o.require(p.certificates.size() == 11 && integral == 11 && reproduce == 11,
            "eleven integrality certificates");
  o.require(rho <= kObserverRhoMax, "rho(A-LC) <= 1e-5 with the printed L");
  o.require(dt < kPlanSeconds, "runtime < 1 s");
}

void criterion3(Outcome& o) {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan p = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  const QBoundTerms& t = p.q_terms;
  const double qb = t.max();

  // Independent evaluation of each term in double precision.
  const Eigen::MatrixXd L = to_eigen(p.L), C = to_eigen(cfg.plant.C);
  const Eigen::MatrixXd R = to_eigen(cfg.ctrl.R_ref), S = to_eigen(cfg.ctrl.S);
  const double w = p.omega.get_d(), s1 = p.s1.get_d(), s2 = p.s2.get_d();
  Eigen::MatrixXd lcl(L.rows(), C.cols() + L.cols());
  lcl << L * C, L;
  Eigen::MatrixXd rr(R.rows(), 2 * R.cols());
  rr << R / w, -R;
  Eigen::MatrixXd ss(S.rows(), 2 * S.cols());
  ss << S / w, -S;
  const double obs = 2 * p.C_e * row_norm(lcl) / w;
  const double ref = row_norm(rr) / (w * w);
  const double inp = row_norm(ss) / (s2 * w);
  const double sen = 2 * row_norm(C / s1) * p.C_e;
  const double mx = std::max({obs, ref, inp, sen});

  o.detail << "q_bound=" << qb << " log2=" << std::log2(qb) << " terms=[" << t.observer << ", "
           << t.reference << ", " << t.input << ", " << t.sensor << "]"
           << " ratio=" << qb / kQPaper << " q=2^" << log2_big(p.q);
  o.require(qb <= kQFactor * kQPaper && qb >= kQPaper / kQFactor, "within 4x of 3.2508e18");
  o.require(std::abs(std::log2(qb) - kLog2QPaper) <= kLog2Tol, "log2 within 2 of 61.4955");
  o.require(rel_close(t.observer, obs, kTermRelTol) && rel_close(t.reference, ref, kTermRelTol) &&
                rel_close(t.input, inp, kTermRelTol) && rel_close(t.sensor, sen, kTermRelTol) &&
                rel_close(qb, mx, kTermRelTol),
            "terms match independent recomputation to 1e-9");
}

void criterion4(Outcome& o) {
  const BatchRun& r = batch_run();
  const TraceSummary& s = r.trace.summary;
  o.detail << "steps=" << s.steps << " max_log2_metric=" << s.max_log2_metric
           << " recovery_failures=" << s.recovery_failures
           << " oracle_mismatches=" << s.oracle_mismatches << " time=" << r.seconds << "s";
  o.require(s.steps == 600 && !s.noise_overflow, "600 steps completed");
  o.require(s.max_log2_metric <= kMetricMax, "max log2 metric <= 40");
  o.require(s.recovery_failures == 0 && s.oracle_mismatches == 0, "zero recovery failures");
  o.require(r.seconds < kRunSeconds, "runtime < 10 s");
}

void criterion5(Outcome& o) {
  const ClosedLoopTrace& tr = batch_run().trace;
  const TraceSummary& s = tr.summary;
  // Envelope of the input gap over consecutive 50-step windows.
  std::vector<double> env;
  for (std::size_t k = 0; k + 50 <= tr.steps.size(); k += 50) {
    double m = 0;
    for (std::size_t i = k; i < k + 50; ++i) m = std::max(m, tr.steps[i].diff_inf);
    env.push_back(m);
  }
  bool decreasing = env.size() >= 2;
  for (std::size_t i = 1; i < env.size(); ++i) decreasing = decreasing && env[i] <= env[i - 1];
  double gap_env_last = 0, gap_env_first = 0;
  for (std::size_t i = 0; i < 50 && i < tr.steps.size(); ++i) {
    gap_env_first = std::max(gap_env_first, tr.steps[i].state_gap);
    gap_env_last = std::max(gap_env_last, tr.steps[tr.steps.size() - 1 - i].state_gap);
  }
  o.detail << "final_diff=" << s.final_diff << " final_state_gap=" << s.final_state_gap
           << " diff_window_max[first,last]=[" << (env.empty() ? 0 : env.front()) << ", "
           << (env.empty() ? 0 : env.back()) << "]";
  o.require(s.final_diff <= kFinalDiffMax, "final |u^a - u| <= 1e-6");
  o.require(s.final_state_gap <= kStateGapMax && gap_env_last <= gap_env_first,
            "plant state tracks the shadow");
  o.require(decreasing, "windowed gap envelope decreasing");
}

void criterion6(Outcome& o) {
  const ClosedLoopTrace& tr = batch_run().trace;
  const MainPlan& p = *tr.main_plan;
  const double level = (2 * Rational(p.range_level).get_d() + 1) / 2;
  o.detail << "range_level=" << p.range_level.get_str() << " (2R+1)/2=" << level
           << " saturation_count=" << tr.summary.saturation_count;
  o.require(level > kRangePaper, "(2R+1)/2 > 1.3594e13");
  o.require(tr.summary.saturation_count == 0, "zero saturation flags");
}

void criterion7(Outcome& o) {
  std::mt19937_64 rng(20260701);
  int passed = 0;
  std::uint64_t checks = 0, mismatches = 0;
  for (int i = 0; i < kRandomMain; ++i) {
    ScenarioConfig cfg = hectl::testing::random_main_config(rng);
    cfg.horizon = kRandomMainSteps;
    const ClosedLoopTrace tr = run_closed_loop(cfg);
    const TraceSummary& s = tr.summary;
    checks += s.identity_checks;
    mismatches += s.identity_mismatches;
    const bool ok = s.steps == static_cast<std::uint64_t>(kRandomMainSteps) &&
                    s.identity_checks == 3u * kRandomMainSteps && s.identity_mismatches == 0 &&
                    s.recovery_failures == 0 && s.oracle_mismatches == 0;
    passed += ok;
  }
  o.detail << "systems=" << passed << "/" << kRandomMain << " identity_checks=" << checks
           << " mismatches=" << mismatches;
  o.require(passed == kRandomMain, "every system exact at every step");
}

void criterion8(Outcome& o) {
  std::mt19937_64 rng(20260702);
  int exact = 0, injectable = 0, flagged = 0;
  for (int i = 0; i < kRandomPrelim; ++i) {
    ScenarioConfig cfg = hectl::testing::random_prelim_config(rng);
    cfg.horizon = kRandomPrelimSteps;
    const ClosedLoopTrace tr = run_closed_loop(cfg);
    const TraceSummary& s = tr.summary;
    exact += s.steps == static_cast<std::uint64_t>(kRandomPrelimSteps) &&
             s.recovery_failures == 0 && s.oracle_mismatches == 0;
    if (s.max_increment < 2) continue;
    ++injectable;
    BigInt q = 2;
    while (Rational(2 * q).get_d() <= s.max_increment) q *= 2;
    ScenarioConfig bad = cfg;
    bad.overrides.q = q;
    flagged += run_closed_loop(bad).summary.recovery_failures > 0;
  }
  o.detail << "exact=" << exact << "/" << kRandomPrelim << " fault_injection flagged=" << flagged
           << "/" << injectable;
  o.require(exact == kRandomPrelim, "u~_a == u~ for all t <= 200");
  o.require(injectable > 0 && flagged == injectable, "q below the bound is flagged");
}

bool he_laws(Backend b, std::uint64_t seed, int trials, std::string& why) {
  SchemeParams p;
  p.backend = b;
  p.q = BigInt(1) << 20;
  const KeyPair k = keygen(p, seed);
  Rng rng(seed + 1);
  std::mt19937_64 gen(seed + 2);
  auto rnd = [&] { return BigInt(static_cast<unsigned long>(gen() % (1u << 20))); };
  for (int t = 0; t < trials; ++t) {
    const std::size_t n = 1 + gen() % 4, r = 1 + gen() % 4;
    std::vector<BigInt> a(n), c(n);
    for (auto& x : a) x = rnd();
    for (auto& x : c) x = rnd();
    IntMatrix M(r, n);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < n; ++j) M(i, j) = rnd();
    }
    const PlainVector ma(a, p.q), mc(c, p.q);
    const Ciphertext ea = encrypt(k.public_key, ma, rng), ec = encrypt(k.public_key, mc, rng);
    IntVector sum(n), prod(r, BigInt(0));
    for (std::size_t i = 0; i < n; ++i) sum[i] = a[i] + c[i];
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < n; ++j) prod[i] += M(i, j) * a[j];
    }
    const Ciphertext es = add(ea, ec, p), em = plain_matmul(M, ea, p);
    if (!noise_report(es, p).decryptable || !noise_report(em, p).decryptable) {
      why = "budget exceeded";
      return false;
    }
    if (decrypt(k.secret_key, ea) != ma) {
      why = "Dec(Enc(m)) != m";
      return false;
    }
    if (decrypt(k.secret_key, es) != PlainVector::reduce(sum, p.q)) {
      why = "Dec(a + b) != a + b";
      return false;
    }
    if (decrypt(k.secret_key, em) != PlainVector::reduce(prod, p.q)) {
      why = "Dec(M c) != M m";
      return false;
    }
  }
  return true;
}

void criterion9(Outcome& o) {
  std::string why_mock, why_lattice;
  const bool mock = he_laws(Backend::mock, 91, kHeTrials, why_mock);
  const bool lattice = he_laws(Backend::lattice, 92, kHeTrials, why_lattice);
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.horizon = kBackendSteps;
  const ClosedLoopTrace m = run_closed_loop(cfg);
  cfg.backend = Backend::lattice;
  const ClosedLoopTrace l = run_closed_loop(cfg);
  const bool same = m.u_a_exact.size() == static_cast<std::size_t>(kBackendSteps) &&
                    m.u_a_exact == l.u_a_exact && !l.summary.noise_overflow &&
                    l.summary.recovery_failures == 0;
  o.detail << "mock_laws=" << (mock ? "ok" : why_mock) << " lattice_laws="
           << (lattice ? "ok" : why_lattice) << " trials=" << kHeTrials
           << " lattice_delta_bits=" << l.delta_bits << " u_a_identical=" << same;
  o.require(mock, "mock laws");
  o.require(lattice, "lattice laws within budget");
  o.require(same, "lattice and mock 50-step u^a identical");
}

void criterion10(Outcome& o) {
  const ClosedLoopTrace& tr = batch_run().trace;
  const ScenarioConfig cfg = builtin_batch_reactor();
  const std::uint64_t expect = cfg.plant.n() + cfg.ctrl.n_x() + cfg.plant.w();
  bool per_step = !tr.steps.empty();
  for (const auto& s : tr.steps) {
    per_step = per_step && s.msgs_ctrl_to_act == expect && s.actuator_enc_ops == 0 &&
               s.actuator_dec_ops == expect;
  }
  o.detail << "ctrl_to_act/step=" << (tr.steps.empty() ? 0 : tr.steps[0].msgs_ctrl_to_act)
           << " expected=" << expect << " actuator_enc_total=" << tr.summary.actuator_enc_ops
           << " actuator_dec_total=" << tr.summary.actuator_dec_ops;
  o.require(per_step, "n + n_x + w ciphertexts per step, decryptions only");
  o.require(tr.summary.actuator_enc_ops == 0, "zero actuator encryptions");
}

}  // namespace

int main() {
  const std::vector<std::function<void(Outcome&)>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
