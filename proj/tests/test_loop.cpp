// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "hectl/loop.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace hectl;

namespace {

RationalVector zeros(std::size_t n) { return RationalVector(n, Rational(0)); }

PlainVector plain(const IntVector& v, const BigInt& q) { return PlainVector::reduce(v, q); }

Eigen::MatrixXd to_eigen(const RationalMatrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j).get_d();
  }
  return e;
}

Eigen::VectorXd to_eigen(const RationalVector& v) {
  Eigen::VectorXd e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i].get_d();
  return e;
}

}  // namespace

TEST_CASE("process_step examples") {
  const auto br = hectl::testing::batch_reactor();
  ProcessState s{zeros(4), 0};
  const ProcessOutput z = process_step(s, zeros(1), br.plant);
  CHECK(z.next.x_p == zeros(4));
  CHECK(z.y_p == zeros(2));
  CHECK(z.next.t == 1);

  PlantModel id{RationalMatrix::identity(2), RationalMatrix(2, 1), RationalMatrix::identity(2)};
  ProcessState k{{Rational(3), Rational(-1, 2)}, 0};
  const ProcessOutput o = process_step(k, {Rational(5)}, id);
  CHECK(o.next.x_p == k.x_p);
  CHECK(o.y_p == k.x_p);
  CHECK_THROWS(process_step(k, zeros(2), id));
}

TEST_CASE("batch reactor under its plaintext controller matches a double recursion") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const Eigen::MatrixXd A = to_eigen(cfg.plant.A), B = to_eigen(cfg.plant.B),
                        C = to_eigen(cfg.plant.C);
  const Eigen::MatrixXd F = to_eigen(cfg.ctrl.F), G = to_eigen(cfg.ctrl.G),
                        R = to_eigen(cfg.ctrl.R_ref), H = to_eigen(cfg.ctrl.H),
                        J = to_eigen(cfg.ctrl.J), S = to_eigen(cfg.ctrl.S);
  const Eigen::VectorXd r = to_eigen(cfg.reference);
  Eigen::VectorXd xp = Eigen::VectorXd::Zero(4), x = Eigen::VectorXd::Zero(4);
  ProcessState state{zeros(4), 0};
  RationalVector xc = zeros(4);
  for (int t = 0; t < 10; ++t) {
    const RationalVector y = cfg.plant.C * state.x_p;
    const RationalVector u = add(add(cfg.ctrl.H * xc, cfg.ctrl.J * y), cfg.ctrl.S * cfg.reference);
    xc = add(add(cfg.ctrl.F * xc, cfg.ctrl.G * y), cfg.ctrl.R_ref * cfg.reference);
    state = process_step(state, u, cfg.plant).next;

    const Eigen::VectorXd ye = C * xp;
    const Eigen::VectorXd ue = H * x + J * ye + S * r;
    x = F * x + G * ye + R * r;
    xp = A * xp + B * ue;
    CHECK((to_eigen(state.x_p) - xp).cwiseAbs().maxCoeff() <= 1e-12 * (1 + xp.norm()));
  }
}

TEST_CASE("centered_mod_recover examples") {
  CHECK(centered_mod_recover(BigInt(7), Rational(0), BigInt(10)) == -3);
  CHECK(centered_mod_recover(BigInt(4), Rational(0), BigInt(10)) == 4);
  CHECK(centered_mod_recover(BigInt(5), Rational(0), BigInt(10)) == -5);
  CHECK(centered_mod_recover(BigInt(3), Rational(100), BigInt(10)) == 103);
  CHECK(centered_mod_recover(BigInt(3), Rational(201, 2), BigInt(10)) == 103);
  CHECK_THROWS(centered_mod_recover(BigInt(0), Rational(0), BigInt(1)));
}

TEST_CASE("centered_mod_recover window property") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10000; ++i) {
    const BigInt q(static_cast<long>(2 + rng() % 1000));
    const long prior_num = static_cast<long>(rng() % 200001) - 100000;
    const Rational prior(prior_num, static_cast<long>(1 + rng() % 7));
    const long off = static_cast<long>(rng() % (3 * q.get_si())) - q.get_si() * 3 / 2;
    const BigInt x = floor_rational(prior) + off;
    BigInt v = x % q;
    if (v < 0) v += q;
    const BigInt got = centered_mod_recover(v, prior, q);
    CHECK((got - x) % q == 0);
    const Rational dist = Rational(x) - prior;
    if (dist >= Rational(-q, 2) && dist < Rational(q, 2)) {
      CHECK(got == x);
    } else {
      CHECK(got != x);
    }
  }
}

TEST_CASE("preliminary controller steps against a plaintext oracle") {
  std::mt19937_64 rng(43);
  const ScenarioConfig cfg = hectl::testing::random_prelim_config(rng);
  const PrelimPlan plan = plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
  SchemeParams sp;
  sp.q = plan.q;
  const KeyPair keys = keygen(sp, 1);
  Rng r(2);
  const std::size_t nx = cfg.ctrl.n_x();
  auto enc = [&](const IntVector& v) { return encrypt(keys.public_key, plain(v, sp.q), r); };

  // Zero state and zero inputs decrypt to zero.
  PrelimController zero(plan, sp, enc(IntVector(nx, BigInt(0))));
  const Ciphertext u0 = zero.step(enc({BigInt(0)}), enc({BigInt(0)}));
  CHECK(decrypt(keys.secret_key, u0) == plain({BigInt(0)}, sp.q));

  // A single sensor sample, no reference: the next state is (G/(s1 omega)) y.
  PrelimController one(plan, sp, enc(IntVector(nx, BigInt(0))));
  const IntVector y{BigInt(3)};
  const Ciphertext u1 = one.step(enc(y), enc({BigInt(0)}));
  const RationalVector want_u = (cfg.ctrl.J / (plan.s1 * plan.s2)) * to_rational(y);
  CHECK(decrypt(keys.secret_key, u1) == PlainVector::reduce(IntVector{floor_rational(want_u[0])}, sp.q));
  const RationalVector want_x = (cfg.ctrl.G / (plan.s1 * plan.omega)) * to_rational(y);
  IntVector wx;
  for (const auto& e : want_x) wx.push_back(floor_rational(e));
  CHECK(decrypt(keys.secret_key, one.state()) == plain(wx, sp.q));
}

TEST_CASE("preliminary actuator recovers with a scaled prior") {
  std::mt19937_64 rng(47);
  const ScenarioConfig cfg = hectl::testing::random_prelim_config(rng);
  ScenarioConfig c = cfg;
  c.horizon = 100;
  const PrelimPlan plan = plan_preliminary(c.plant, c.ctrl, prelim_options(c));
  const ClosedLoopTrace tr = run_prelim(c, plan);
  CHECK(tr.summary.recovery_failures == 0);
  CHECK(tr.summary.oracle_mismatches == 0);
  // The reference loop is unquantized, so the gap shrinks with the scaling.
  REQUIRE(!tr.steps.empty());
  CHECK(tr.steps.back().diff_inf <= 1e-6);
}

TEST_CASE("main controller with zero state and inputs emits zeros") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan plan = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  SchemeParams sp;
  sp.q = plan.q;
  const KeyPair keys = keygen(sp, 3);
  Rng r(4);
  auto enc0 = [&](std::size_t n) {
    return encrypt(keys.public_key, plain(IntVector(n, BigInt(0)), sp.q), r);
  };
  MainController ctrl(plan, sp, enc0(4), enc0(4), enc0(4), enc0(4), enc0(4), enc0(1));
  for (int t = 0; t < 3; ++t) {
    const Increments inc = ctrl.step(enc0(2), enc0(4));
    CHECK(decrypt(keys.secret_key, inc.alpha) == plain(IntVector(4, BigInt(0)), sp.q));
    CHECK(decrypt(keys.secret_key, inc.beta) == plain(IntVector(4, BigInt(0)), sp.q));
    CHECK(decrypt(keys.secret_key, inc.gamma) == plain(IntVector(1, BigInt(0)), sp.q));
  }
}

TEST_CASE("alpha carries the scaled innovation one step later") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan plan = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  SchemeParams sp;
  sp.q = plan.q;
  const KeyPair keys = keygen(sp, 5);
  Rng r(6);
  auto enc = [&](const IntVector& v) { return encrypt(keys.public_key, plain(v, sp.q), r); };
  const IntVector z4(4, BigInt(0)), z2(2, BigInt(0)), z1(1, BigInt(0));
  MainController ctrl(plan, sp, enc(z4), enc(z4), enc(z4), enc(z4), enc(z4), enc(z1));
  const IntVector innov{BigInt(5), BigInt(-2)};
  ctrl.step(enc(innov), enc(z4));
  const Increments inc = ctrl.step(enc(z2), enc(z4));
  const RationalVector want = (plan.L / plan.omega) * to_rational(innov);
  IntVector w;
  for (const auto& e : want) w.push_back(floor_rational(e));
  CHECK(decrypt(keys.secret_key, inc.alpha) == plain(w, sp.q));
}

TEST_CASE("reference provider keeps the scaled error within 1/(2 omega)") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan plan = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  SchemeParams sp;
  sp.q = plan.q;
  const KeyPair keys = keygen(sp, 7);
  RefProvider rp(plan, keys.public_key, 8);
  const Rational bound = 1 / (2 * plan.omega);
  Rational l = plan.l0;
  for (int t = 0; t < 600; ++t) {
    const Rational e = inf_norm_exact(scale(sub(cfg.reference, rp.r_e()), 1 / l));
    if (t > 0) CHECK(e <= bound);
    const RefProvider::Output o = rp.step(cfg.reference, l);
    CHECK_FALSE(o.saturated);
    l *= plan.omega;
  }
  RefProvider same(plan, keys.public_key, 9);
  const RefProvider::Output z = same.step(plan.r_e0, plan.l0);
  CHECK(z.increment == IntVector(4, BigInt(0)));
}

TEST_CASE("sensor with matching estimate sends a zero innovation") {
  const ScenarioConfig cfg = builtin_batch_reactor();
  const MainPlan plan = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  SchemeParams sp;
  sp.q = plan.q;
  const KeyPair keys = keygen(sp, 10);
  Rng r(11);
  Sensor sensor(plan, keys.secret_key, keys.public_key, 12);
  const IntVector yo{BigInt(-7), BigInt(40)};
  const Rational l(1, 1000);
  const RationalVector yp = scale(to_rational(yo), plan.s1 * l);
  const Sensor::Output o =
      sensor.step(encrypt(keys.public_key, plain(yo, sp.q), r), yp, l);
  CHECK(o.y_tilde == yo);
  CHECK(o.innovation == IntVector(2, BigInt(0)));
  CHECK_FALSE(o.saturated);
}

TEST_CASE("zero scenario gives an all-zero trace") {
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.reference = zeros(4);
  cfg.horizon = 20;
  const ClosedLoopTrace tr = run_closed_loop(cfg);
  for (const auto& s : tr.steps) {
    for (double u : s.u_a) CHECK(u == 0.0);
    CHECK(s.diff_inf == 0.0);
  }
  CHECK(tr.summary.identity_mismatches == 0);
}

TEST_CASE("short batch reactor run is exact against the shadow") {
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.horizon = 60;
  const ClosedLoopTrace tr = run_closed_loop(cfg);
  CHECK(tr.summary.recovery_failures == 0);
  CHECK(tr.summary.oracle_mismatches == 0);
  CHECK(tr.summary.identity_mismatches == 0);
  CHECK(tr.summary.identity_checks == 3 * 60);
  CHECK(tr.summary.saturation_count == 0);
  CHECK(tr.steps.front().msgs_ctrl_to_act == 9);
  CHECK(tr.steps.front().msgs_sensor_to_ctrl == 2);
  CHECK(tr.steps.front().msgs_provider_to_ctrl == 4);
  CHECK(tr.steps.front().msgs_ctrl_to_sensor == 2);
  const std::string csv = trace_csv(tr);
  CHECK(csv.rfind("t,u_true[0],u_a[0],diff_inf,", 0) == 0);
}

TEST_CASE("main-scheme fault injection flags a recovery failure") {
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.horizon = 50;
  cfg.overrides.q = BigInt(1) << 20;
  const ClosedLoopTrace tr = run_closed_loop(cfg);
  CHECK(tr.summary.recovery_failures > 0);
}

TEST_CASE("preliminary fault injection flags a recovery failure within 50 steps") {
  std::mt19937_64 rng(53);
  ScenarioConfig cfg = hectl::testing::random_prelim_config(rng);
  cfg.horizon = 50;
  const PrelimPlan plan = plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
  const ClosedLoopTrace ok = run_prelim(cfg, plan);
  REQUIRE(ok.summary.recovery_failures == 0);
  REQUIRE(ok.summary.max_increment >= 2);
  BigInt q = 2;
  while (Rational(2 * q).get_d() <= ok.summary.max_increment) q *= 2;
  cfg.overrides.q = q;
  const PrelimPlan bad = plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
  CHECK(run_prelim(cfg, bad).summary.recovery_failures > 0);
}

TEST_CASE("sweep runs independent seeds") {
  ScenarioConfig cfg = builtin_batch_reactor();
  cfg.horizon = 10;
  std::vector<ScenarioConfig> cfgs(3, cfg);
  for (std::size_t i = 0; i < cfgs.size(); ++i) cfgs[i].seed = 100 + i;
  const auto traces = run_sweep(cfgs, 2);
  REQUIRE(traces.size() == 3);
  for (const auto& t : traces) {
    CHECK(t.summary.recovery_failures == 0);
    CHECK(t.u_a_exact == traces[0].u_a_exact);
  }
}
