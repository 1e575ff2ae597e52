// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/loop.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

namespace hectl {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionMismatch(what);
}

RationalVector zeros(std::size_t n) { return RationalVector(n, Rational(0)); }

// Integer-valued rational vector to big integers; the caller guarantees
// integrality.
IntVector to_int(const RationalVector& v) {
  IntVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].get_den() != 1) throw Error("expected an integer vector");
    out[i] = v[i].get_num();
  }
  return out;
}

bool equal_exact(const IntVector& a, const RationalVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i].get_den() != 1 || b[i].get_num() != a[i]) return false;
  }
  return true;
}

bool equal_mod(const PlainVector& a, const RationalVector& b, const BigInt& q) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i].get_den() != 1) return false;
    BigInt r;
    mpz_fdiv_r(r.get_mpz_t(), b[i].get_num_mpz_t(), q.get_mpz_t());
    if (r != a[i]) return false;
  }
  return true;
}

double log2_inf(const IntVector& v) {
  const BigInt m = inf_norm(v);
  if (m == 0) return -std::numeric_limits<double>::infinity();
  return log2_big(m);
}

double log2_inf(const RationalVector& v) {
  Rational m = 0;
  for (const auto& e : v) m = std::max(m, Rational(abs(e)));
  if (m == 0) return -std::numeric_limits<double>::infinity();
  return log2_abs(m);
}

double inf_diff(const RationalVector& a, const RationalVector& b) {
  return inf_norm(sub(a, b));
}

IntMatrix residues(const IntegralityCertificate& cert, const BigInt& q) {
  return cert.scaled.mod(q);
}

IntMatrix scaled_identity(std::size_t n, const BigInt& k, const BigInt& q) {
  IntMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = k;
  return m.mod(q);
}

BigInt inverse_integer(const Rational& omega) {
  const Rational inv = 1 / omega;
  if (inv.get_den() != 1) throw NoIntegerOmega("1/omega is not an integer");
  return inv.get_num();
}

// Ciphertext algebra. The same step templates drive the encrypted controller
// and the noise-budget simulation used to size Delta.
struct CipherAlg {
  using V = Ciphertext;
  const SchemeParams* p;
  V add(const V& a, const V& b) const { return hectl::add(a, b, *p); }
  V mul(const IntMatrix& m, const V& a) const { return plain_matmul(m, a, *p); }
};

struct NoiseAlg {
  using V = std::vector<BigInt>;
  BigInt q;
  mutable BigInt peak = 0;
  V track(V v) const {
    for (const auto& e : v) peak = std::max(peak, e);
    return v;
  }
  V add(const V& a, const V& b) const {
    V out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return track(std::move(out));
  }
  V mul(const IntMatrix& m, const V& a) const {
    const BigInt half = q / 2;
    V out(m.rows(), BigInt(0));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        BigInt c;
        mpz_fdiv_r(c.get_mpz_t(), m(i, j).get_mpz_t(), q.get_mpz_t());
        if (c > half) c -= q;
        out[i] += abs(c) * a[j];
      }
    }
    return track(std::move(out));
  }
};

template <class Alg>
struct MainCore {
  using V = typename Alg::V;
  V x_o, x, r, x_o1, x1, u1, x_o2, x2;

  V output(const Alg& alg, const MainMatrices& m) const { return alg.mul(m.C, x_o); }

  std::array<V, 3> step(const Alg& alg, const MainMatrices& m, const V& innov,
                        const V& refinc) {
    const V u = alg.add(alg.add(alg.mul(m.H, x), alg.mul(m.J, x_o)), alg.mul(m.S, r));
    V alpha = alg.add(alg.add(x_o, alg.mul(m.A_n, x_o1)), alg.mul(m.B_n, u1));
    const V r_beta = alg.add(alg.add(x1, alg.mul(m.F_n, x2)), alg.mul(m.G_n, x_o2));
    V beta = alg.add(alg.add(alg.add(x, alg.mul(m.F_n, x1)), alg.mul(m.G_n, x_o1)),
                     alg.mul(m.W_nx_n, r_beta));
    const V r_gamma = alg.add(alg.add(u1, alg.mul(m.H_n, x1)), alg.mul(m.J_n, x_o1));
    V gamma = alg.add(alg.add(alg.add(u, alg.mul(m.H_n, x)), alg.mul(m.J_n, x_o)),
                      alg.mul(m.W_w_n, r_gamma));

    V x_o_next =
        alg.add(alg.add(alg.mul(m.A_o, x_o), alg.mul(m.B_o, u)), alg.mul(m.L_o, innov));
    V r_next = alg.add(alg.mul(m.W_r, r), alg.mul(m.W_r, refinc));
    V x_next = alg.add(alg.add(alg.mul(m.F, x), alg.mul(m.G, x_o)), alg.mul(m.R, r));

    x_o2 = std::move(x_o1);
    x2 = std::move(x1);
    x_o1 = std::move(x_o);
    x1 = std::move(x);
    u1 = u;
    x_o = std::move(x_o_next);
    x = std::move(x_next);
    r = std::move(r_next);
    return {std::move(alpha), std::move(beta), std::move(gamma)};
  }
};

template <class Alg>
typename Alg::V prelim_step(const Alg& alg, const PrelimMatrices& m, typename Alg::V& x,
                            const typename Alg::V& y, const typename Alg::V& r) {
  auto u = alg.add(alg.add(alg.mul(m.H, x), alg.mul(m.J, y)), alg.mul(m.S, r));
  x = alg.add(alg.add(alg.mul(m.F, x), alg.mul(m.G, y)), alg.mul(m.R, r));
  return u;
}

std::uint32_t bits_for(const BigInt& peak) {
  // Noise must stay strictly below Delta/2.
  const std::size_t b = peak == 0 ? 1 : mpz_sizeinbase(peak.get_mpz_t(), 2);
  return static_cast<std::uint32_t>(b + 2);
}

}  // namespace

// ------------------------------------------------------------------ plant

ProcessOutput process_step(const ProcessState& state, const RationalVector& u,
                           const PlantModel& plant) {
  require(state.x_p.size() == plant.n(), "process_step: x_p has wrong size");
  require(u.size() == plant.w(), "process_step: u has wrong size");
  ProcessOutput out;
  out.y_p = plant.C * state.x_p;
  out.next.x_p = add(plant.A * state.x_p, plant.B * u);
  out.next.t = state.t + 1;
  return out;
}

BigInt centered_mod_recover(const BigInt& v, const Rational& prior, const BigInt& q) {
  if (q < 2) throw Error("centered_mod_recover: q must be at least 2");
  const Rational shifted = (Rational(v) - prior + Rational(q, 2)) / Rational(q);
  return v - floor_rational(shifted) * q;
}

IntVector centered_mod_recover(const IntVector& v, const RationalVector& prior,
                               const BigInt& q) {
  require(v.size() == prior.size(), "centered_mod_recover: size mismatch");
  IntVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = centered_mod_recover(v[i], prior[i], q);
  return out;
}

IntVector centered_mod_recover(const PlainVector& v, const RationalVector& prior,
                               const BigInt& q) {
  return centered_mod_recover(v.entries(), prior, q);
}

// ------------------------------------------------------ preliminary scheme

PrelimMatrices PrelimMatrices::from_plan(const PrelimPlan& plan) {
  const BigInt& q = plan.q;
  PrelimMatrices m;
  m.F = residues(plan.cert("F/omega"), q);
  m.G = residues(plan.cert("G/(s1 omega)"), q);
  m.R = residues(plan.cert("R/(s1 omega)"), q);
  m.H = residues(plan.cert("H/s2"), q);
  m.J = residues(plan.cert("J/(s1 s2)"), q);
  m.S = residues(plan.cert("S/(s1 s2)"), q);
  return m;
}

PrelimController::PrelimController(const PrelimPlan& plan, const SchemeParams& params,
                                   Ciphertext x0)
    : m_(PrelimMatrices::from_plan(plan)), params_(params), x_(std::move(x0)) {}

Ciphertext PrelimController::step(const Ciphertext& y, const Ciphertext& r) {
  return prelim_step(CipherAlg{&params_}, m_, x_, y, r);
}

PrelimActuator::PrelimActuator(const PrelimPlan& plan, KeyMaterial sk, std::size_t w)
    : sk_(std::move(sk)),
      omega_(plan.omega),
      s12_(plan.s1 * plan.s2),
      q_(plan.q),
      prior_(zeros(w)) {}

PrelimActuator::Output PrelimActuator::step(const Ciphertext& u, const Rational& l) {
  Output out;
  out.decrypted = decrypt(sk_, u);
  ops_.dec += u.dimension();
  out.u_tilde = centered_mod_recover(out.decrypted, prior_, q_);
  const RationalVector ut = to_rational(out.u_tilde);
  out.u = scale(ut, s12_ * l);
  prior_ = scale(ut, 1 / omega_);
  return out;
}

// ------------------------------------------------------------- main scheme

MainMatrices MainMatrices::from_plan(const MainPlan& plan, std::size_t n_r, std::size_t w) {
  const BigInt& q = plan.q;
  MainMatrices m;
  m.A_o = residues(plan.cert("A/omega"), q);
  m.B_o = residues(plan.cert("s2B/omega"), q);
  m.L_o = residues(plan.cert("L/omega"), q);
  m.C = residues(plan.cert("C/s1"), q);
  m.F = residues(plan.cert("F/omega"), q);
  m.G = residues(plan.cert("GC/omega"), q);
  m.R = residues(plan.cert("R/omega"), q);
  m.H = residues(plan.cert("H/s2"), q);
  m.J = residues(plan.cert("JC/s2"), q);
  m.S = residues(plan.cert("S/s2"), q);
  const BigInt inv = inverse_integer(plan.omega);
  m.W_r = scaled_identity(n_r, inv, q);
  m.A_n = (-m.A_o).mod(q);
  m.B_n = (-m.B_o).mod(q);
  m.F_n = (-m.F).mod(q);
  m.G_n = (-m.G).mod(q);
  m.H_n = (-m.H).mod(q);
  m.J_n = (-m.J).mod(q);
  m.W_nx_n = scaled_identity(m.F.rows(), -inv, q);
  m.W_w_n = scaled_identity(w, -inv, q);
  return m;
}

MainController::MainController(const MainPlan& plan, const SchemeParams& params,
                               Ciphertext x_o0, Ciphertext x0, Ciphertext r0,
                               const Ciphertext& zero_n, const Ciphertext& zero_nx,
                               const Ciphertext& zero_w)
    : m_(MainMatrices::from_plan(plan, r0.dimension(), zero_w.dimension())),
      params_(params),
      x_o_(std::move(x_o0)),
      x_(std::move(x0)),
      r_(std::move(r0)),
      x_o1_(zero_n),
      x1_(zero_nx),
      u1_(zero_w),
      x_o2_(zero_n),
      x2_(zero_nx) {}

Ciphertext MainController::output_estimate() const {
  return plain_matmul(m_.C, x_o_, params_);
}

Increments MainController::step(const Ciphertext& innovation,
                                const Ciphertext& ref_increment) {
  MainCore<CipherAlg> core{x_o_, x_, r_, x_o1_, x1_, u1_, x_o2_, x2_};
  auto [a, b, g] = core.step(CipherAlg{&params_}, m_, innovation, ref_increment);
  x_o_ = std::move(core.x_o);
  x_ = std::move(core.x);
  r_ = std::move(core.r);
  x_o1_ = std::move(core.x_o1);
  x1_ = std::move(core.x1);
  u1_ = std::move(core.u1);
  x_o2_ = std::move(core.x_o2);
  x2_ = std::move(core.x2);
  return {std::move(a), std::move(b), std::move(g)};
}

Sensor::Sensor(const MainPlan& plan, KeyMaterial sk, KeyMaterial pk, std::uint64_t seed)
    : sk_(std::move(sk)),
      pk_(std::move(pk)),
      s1_(plan.s1),
      q_(plan.q),
      quant_(plan.range_level),
      rng_(seed) {}

Sensor::Output Sensor::step(const Ciphertext& y_o, const RationalVector& y_p,
                            const Rational& l) {
  require(y_o.dimension() == y_p.size(), "sensor: output size mismatch");
  Output out;
  out.decrypted = decrypt(sk_, y_o);
  ops_.dec += y_o.dimension();
  out.y_tilde = centered_mod_recover(out.decrypted, scale(y_p, 1 / (l * s1_)), q_);
  out.y_o_s = scale(to_rational(out.y_tilde), s1_ * l);
  const RationalVector gap = scale(sub(y_p, out.y_o_s), 1 / l);
  out.scaled_gap = scale(gap, 1 / s1_);
  const QuantizedVector qv = quantize_vector(gap, quant_);
  out.innovation = qv.values;
  out.saturated = qv.saturated;
  out.encrypted = encrypt(pk_, PlainVector::reduce(out.innovation, q_), rng_);
  ops_.enc += out.innovation.size();
  return out;
}

RefProvider::RefProvider(const MainPlan& plan, KeyMaterial pk, std::uint64_t seed)
    : pk_(std::move(pk)), q_(plan.q), quant_(plan.range_level), rng_(seed), r_e_(plan.r_e0) {}

RefProvider::Output RefProvider::step(const RationalVector& r, const Rational& l) {
  require(r.size() == r_e_.size(), "reference provider: size mismatch");
  Output out;
  const QuantizedVector qv = quantize_vector(scale(sub(r, r_e_), 1 / l), quant_);
  out.increment = qv.values;
  out.saturated = qv.saturated;
  r_e_ = add(r_e_, scale(to_rational(out.increment), l));
  out.encrypted = encrypt(pk_, PlainVector::reduce(out.increment, q_), rng_);
  ops_.enc += out.increment.size();
  return out;
}

MainActuator::MainActuator(const MainPlan& plan, const PlantModel& plant,
                           const ControllerModel& ctrl, KeyMaterial sk)
    : sk_(std::move(sk)),
      q_(plan.q),
      s2_(plan.s2),
      A_(plant.A),
      B_(plant.B),
      F_(ctrl.F),
      GC_(ctrl.G * plant.C),
      H_(ctrl.H),
      JC_(ctrl.J * plant.C),
      x_o1_(zeros(plant.n())),
      x_o2_(zeros(plant.n())),
      x1_(zeros(ctrl.n_x())),
      x2_(zeros(ctrl.n_x())),
      u1_(zeros(plant.w())) {}

MainActuator::Output MainActuator::step(const Increments& inc, const Rational& l) {
  Output out;
  out.dec_alpha = decrypt(sk_, inc.alpha);
  out.dec_beta = decrypt(sk_, inc.beta);
  out.dec_gamma = decrypt(sk_, inc.gamma);
  ops_.dec += inc.alpha.dimension() + inc.beta.dimension() + inc.gamma.dimension();
  out.alpha = centered_mod_recover(out.dec_alpha, zeros(out.dec_alpha.size()), q_);
  out.beta = centered_mod_recover(out.dec_beta, zeros(out.dec_beta.size()), q_);
  out.gamma = centered_mod_recover(out.dec_gamma, zeros(out.dec_gamma.size()), q_);

  out.x_o = add(add(scale(to_rational(out.alpha), l), A_ * x_o1_), B_ * u1_);
  const RationalVector carry_x = sub(sub(x1_, F_ * x2_), GC_ * x_o2_);
  out.x = add(add(add(scale(to_rational(out.beta), l), F_ * x1_), GC_ * x_o1_), carry_x);
  const RationalVector carry_u = sub(sub(u1_, H_ * x1_), JC_ * x_o1_);
  out.u = add(add(add(scale(to_rational(out.gamma), s2_ * l), H_ * out.x), JC_ * out.x_o),
              carry_u);

  x_o2_ = std::move(x_o1_);
  x_o1_ = out.x_o;
  x2_ = std::move(x1_);
  x1_ = out.x;
  u1_ = out.u;
  return out;
}

// --------------------------------------------------------- orchestration

std::string to_string(Scheme s) { return s == Scheme::prelim ? "prelim" : "main"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "prelim" || name == "preliminary") return Scheme::prelim;
  if (name == "main") return Scheme::main;
  throw ParseError("unknown scheme '" + name + "'");
}

void ScenarioConfig::normalize() {
  plant.validate();
  ctrl.validate(plant);
  const std::size_t n = plant.n();
  const std::size_t nr = ctrl.n_r();
  if (x_p0.empty()) x_p0 = zeros(n);
  if (reference.empty()) reference = zeros(nr);
  if (r_e0.empty()) r_e0 = zeros(nr);
  require(x_p0.size() == n, "x_p0 must have n entries");
  require(reference.size() == nr, "reference must have n_r entries");
  require(r_e0.size() == nr, "r_e0 must have n_r entries");
  for (const auto& r : reference_schedule) {
    require(r.size() == nr, "reference schedule entries must have n_r entries");
  }
  const Rational xn = inf_norm_exact(x_p0);
  if (plant.x_p0_bound < xn) plant.x_p0_bound = xn;
  if (horizon == 0) throw Error("horizon must be positive");
}

RationalVector ScenarioConfig::reference_at(std::uint64_t t) const {
  if (reference_schedule.empty()) return reference;
  return reference_schedule[std::min<std::size_t>(t, reference_schedule.size() - 1)];
}

PrelimOptions prelim_options(const ScenarioConfig& cfg) {
  PrelimOptions o;
  o.omega = cfg.overrides.omega;
  o.s1 = cfg.overrides.s1;
  o.s2 = cfg.overrides.s2;
  o.l0 = cfg.overrides.l0;
  o.q = cfg.overrides.q;
  Rational rb = inf_norm_exact(cfg.reference);
  for (const auto& r : cfg.reference_schedule) rb = std::max(rb, inf_norm_exact(r));
  o.reference_bound = rb;
  return o;
}

MainOptions main_options(const ScenarioConfig& cfg) {
  MainOptions o;
  o.observer_gain = cfg.observer_gain;
  o.gain_decimals = cfg.gain_decimals;
  o.omega = cfg.overrides.omega;
  o.s1 = cfg.overrides.s1;
  o.s2 = cfg.overrides.s2;
  o.l0 = cfg.overrides.l0;
  o.q = cfg.overrides.q;
  o.range_level = cfg.overrides.range_level;
  o.reference = cfg.reference_at(0);
  o.r_e0 = cfg.r_e0;
  return o;
}

std::uint32_t auto_delta_bits(const MainPlan& plan, const LatticeParams& lp,
                              std::uint64_t horizon, std::size_t n_r, std::size_t w) {
  SchemeParams sp;
  sp.q = plan.q;
  sp.backend = Backend::lattice;
  sp.lattice = lp;
  const BigInt fresh = sp.fresh_noise_bound();
  const MainMatrices m = MainMatrices::from_plan(plan, n_r, w);
  const std::size_t n = m.A_o.rows();
  const std::size_t nx = m.F.rows();
  const std::size_t v = m.C.rows();
  NoiseAlg alg{plan.q};
  alg.peak = fresh;
  using V = NoiseAlg::V;
  MainCore<NoiseAlg> core{V(n, fresh),  V(nx, fresh), V(n_r, fresh), V(n, fresh),
                          V(nx, fresh), V(w, fresh),  V(n, fresh),   V(nx, fresh)};
  for (std::uint64_t t = 0; t < horizon; ++t) {
    core.output(alg, m);
    core.step(alg, m, V(v, fresh), V(n_r, fresh));
  }
  return bits_for(alg.peak);
}

std::uint32_t auto_delta_bits(const PrelimPlan& plan, const LatticeParams& lp,
                              std::uint64_t horizon) {
  SchemeParams sp;
  sp.q = plan.q;
  sp.backend = Backend::lattice;
  sp.lattice = lp;
  const BigInt fresh = sp.fresh_noise_bound();
  const PrelimMatrices m = PrelimMatrices::from_plan(plan);
  NoiseAlg alg{plan.q};
  alg.peak = fresh;
  using V = NoiseAlg::V;
  V x(m.F.rows(), fresh);
  for (std::uint64_t t = 0; t < horizon; ++t) {
    prelim_step(alg, m, x, V(m.G.cols(), fresh), V(m.R.cols(), fresh));
  }
  return bits_for(alg.peak);
}

namespace {

SchemeParams scheme_params(const ScenarioConfig& cfg, const BigInt& q,
                           std::uint32_t delta_bits) {
  SchemeParams sp;
  sp.q = q;
  sp.backend = cfg.backend;
  sp.lattice = cfg.lattice;
  sp.lattice.delta_bits = delta_bits;
  return sp;
}

// Unencrypted original controller driving its own copy of the plant.
struct TruthLoop {
  const PlantModel& plant;
  const ControllerModel& ctrl;
  RationalVector x_p;
  RationalVector x;

  RationalVector step(const RationalVector& r) {
    const RationalVector y = plant.C * x_p;
    const RationalVector u = add(add(ctrl.H * x, ctrl.J * y), ctrl.S * r);
    x = add(add(ctrl.F * x, ctrl.G * y), ctrl.R_ref * r);
    x_p = add(plant.A * x_p, plant.B * u);
    return u;
  }
};

std::vector<double> to_doubles(const RationalVector& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].get_d();
  return out;
}

void finish_summary(ClosedLoopTrace& tr) {
  auto& s = tr.summary;
  s.steps = tr.steps.size();
  if (tr.steps.empty()) return;
  s.final_diff = tr.steps.back().diff_inf;
  s.final_state_gap = tr.steps.back().state_gap;
  std::uint64_t last_rise = 0;
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    const auto& r = tr.steps[i];
    s.total_msgs_ctrl_to_act += r.msgs_ctrl_to_act;
    s.total_enc_ops += r.enc_ops;
    s.total_dec_ops += r.dec_ops;
    s.actuator_enc_ops += r.actuator_enc_ops;
    s.actuator_dec_ops += r.actuator_dec_ops;
    if (i > 0 && r.diff_inf > tr.steps[i - 1].diff_inf) last_rise = r.t;
  }
  s.monotone_from = last_rise;
}

}  // namespace

ClosedLoopTrace run_main(const ScenarioConfig& cfg_in, const MainPlan& plan,
                         const RunOptions& opts) {
  ScenarioConfig cfg = cfg_in;
  cfg.normalize();
  const PlantModel& plant = cfg.plant;
  const ControllerModel& ctrl = cfg.ctrl;
  const std::size_t n = plant.n(), w = plant.w();
  const std::size_t nx = ctrl.n_x(), nr = ctrl.n_r();

  ClosedLoopTrace tr;
  tr.scheme = Scheme::main;
  tr.backend = cfg.backend;
  tr.main_plan = plan;
  std::uint32_t dbits = cfg.lattice.delta_bits;
  if (cfg.backend == Backend::lattice && cfg.auto_delta_bits) {
    dbits = auto_delta_bits(plan, cfg.lattice, cfg.horizon, nr, w);
  }
  tr.delta_bits = cfg.backend == Backend::lattice ? dbits : 0;
  const SchemeParams sp = scheme_params(cfg, plan.q, dbits);
  const KeyPair keys = keygen(sp, cfg.seed);
  const BigInt& q = plan.q;
  const Rational& w_ = plan.omega;
  const Rational& s1 = plan.s1;
  const Rational& s2 = plan.s2;

  // Setup: initial scaled states, encrypted once before the loop starts.
  Rng setup_rng(cfg.seed ^ 0x5e70u);
  const RationalVector xbar0 = scale(ctrl.x0, 1 / plan.l0);
  const RationalVector rbar0 = scale(plan.r_e0, 1 / plan.l0);
  auto enc = [&](const RationalVector& x) {
    return encrypt(keys.public_key, PlainVector::reduce(to_int(x), q), setup_rng);
  };
  MainController controller(plan, sp, enc(zeros(n)), enc(xbar0), enc(rbar0), enc(zeros(n)),
                            enc(zeros(nx)), enc(zeros(w)));
  Sensor sensor(plan, keys.secret_key, keys.public_key, cfg.seed * 3 + 1);
  RefProvider provider(plan, keys.public_key, cfg.seed * 3 + 2);
  MainActuator actuator(plan, plant, ctrl, keys.secret_key);

  // Integer shadow of the encrypted controller, over Z without reduction.
  const RationalMatrix C_s1 = plant.C / s1;
  const RationalMatrix Aw = plant.A / w_, Bw = s2 * plant.B / w_, Lw = plan.L / w_;
  const RationalMatrix Fw = ctrl.F / w_, GCw = ctrl.G * plant.C / w_, Rw = ctrl.R_ref / w_;
  const RationalMatrix Hs = ctrl.H / s2, JCs = ctrl.J * plant.C / s2, Ss = ctrl.S / s2;
  RationalVector o_xo = zeros(n), o_x = xbar0, o_r = rbar0;
  RationalVector o_xo1 = zeros(n), o_x1 = zeros(nx), o_u1 = zeros(w);
  RationalVector o_xo2 = zeros(n), o_x2 = zeros(nx);

  TruthLoop truth{plant, ctrl, cfg.x_p0, ctrl.x0};
  ProcessState plant_state{cfg.x_p0, 0};
  Rational l = plan.l0;
  const bool constant_ref = cfg.reference_schedule.empty();
  std::vector<RationalVector> ebar_r;  // (r - r_e(t)) / l(t)
  RationalVector prev_innov_rhs;       // Q(C ebar_o(t-1)) computed independently

  auto& sum = tr.summary;
  try {
    for (std::uint64_t t = 0; t < cfg.horizon; ++t) {
      StepRecord rec;
      rec.t = t;
      const RationalVector r = cfg.reference_at(t);
      const RationalVector y_p = plant.C * plant_state.x_p;

      // Controller -> sensors.
      const Ciphertext y_o = controller.output_estimate();
      const Sensor::Output so = sensor.step(y_o, y_p, l);
      const RationalVector o_y = C_s1 * o_xo;
      if (!equal_mod(so.decrypted, o_y, q)) rec.oracle_mismatch = true;
      if (!equal_exact(so.y_tilde, o_y)) rec.recovery_failure = true;
      rec.log2_sensor_gap = log2_inf(so.scaled_gap);

      // Independent Q(C ebar_o(t)) from the plant state and the shadow estimate.
      const RationalVector ebar_o = sub(scale(plant_state.x_p, 1 / l), o_xo);
      const QuantizedVector innov_rhs =
          quantize_vector(plant.C * ebar_o, QuantizerSpec(plan.range_level));

      // Reference provider.
      ebar_r.push_back(scale(sub(r, provider.r_e()), 1 / l));
      const RefProvider::Output po = provider.step(r, l);
      rec.saturated = so.saturated || po.saturated;

      // Controller -> actuator.
      const Increments inc = controller.step(so.encrypted, po.encrypted);
      const MainActuator::Output ao = actuator.step(inc, l);

      // Shadow increments by the defining formulas.
      const RationalVector o_u = add(add(Hs * o_x, JCs * o_xo), Ss * o_r);
      const RationalVector o_alpha = sub(sub(o_xo, Aw * o_xo1), Bw * o_u1);
      const RationalVector o_rb = sub(sub(o_x1, Fw * o_x2), GCw * o_xo2);
      const RationalVector o_beta =
          sub(sub(sub(o_x, Fw * o_x1), GCw * o_xo1), scale(o_rb, 1 / w_));
      const RationalVector o_rg = sub(sub(o_u1, Hs * o_x1), JCs * o_xo1);
      const RationalVector o_gamma =
          sub(sub(sub(o_u, Hs * o_x), JCs * o_xo), scale(o_rg, 1 / w_));
      if (!equal_mod(ao.dec_alpha, o_alpha, q) || !equal_mod(ao.dec_beta, o_beta, q) ||
          !equal_mod(ao.dec_gamma, o_gamma, q)) {
        rec.oracle_mismatch = true;
      }
      if (!equal_exact(ao.alpha, o_alpha) || !equal_exact(ao.beta, o_beta) ||
          !equal_exact(ao.gamma, o_gamma)) {
        rec.recovery_failure = true;
      }

      // Closed-form right-hand sides.
      if (opts.check_identities) {
        std::vector<std::pair<const IntVector*, RationalVector>> checks;
        if (t == 0) {
          checks.push_back({&ao.alpha, o_xo});
          checks.push_back({&ao.beta, xbar0});
          checks.push_back({&ao.gamma, Ss * rbar0});
        } else {
          checks.push_back({&ao.alpha, Lw * prev_innov_rhs});
        }
        if (constant_ref) {
          if (t == 1) {
            checks.push_back({&ao.beta, sub(Rw * rbar0, scale(xbar0, 1 / w_))});
          } else if (t >= 2) {
            checks.push_back({&ao.beta, sub(scale(Rw * ebar_r[t - 2], 1 / w_),
                                            Rw * ebar_r[t - 1])});
          }
          if (t >= 1) {
            checks.push_back({&ao.gamma, sub(scale(Ss * ebar_r[t - 1], 1 / w_),
                                             Ss * ebar_r[t])});
          }
        }
        for (const auto& [got, want] : checks) {
          ++sum.identity_checks;
          if (!equal_exact(*got, want)) rec.identity_mismatch = true;
        }
      }
      prev_innov_rhs = to_rational(innov_rhs.values);

      rec.log2_alpha = log2_inf(ao.alpha);
      rec.log2_beta = log2_inf(ao.beta);
      rec.log2_gamma = log2_inf(ao.gamma);
      const double metric =
          std::max({rec.log2_alpha, rec.log2_beta, rec.log2_gamma, rec.log2_sensor_gap});
      if (t == 0 || metric > sum.max_log2_metric) sum.max_log2_metric = metric;

      // Shadow update with the inputs the parties actually sent.
      const RationalVector o_xo_next =
          add(add(Aw * o_xo, Bw * o_u), Lw * to_rational(so.innovation));
      const RationalVector o_x_next = add(add(Fw * o_x, GCw * o_xo), Rw * o_r);
      const RationalVector o_r_next = scale(add(o_r, to_rational(po.increment)), 1 / w_);
      o_xo2 = std::move(o_xo1);
      o_x2 = std::move(o_x1);
      o_xo1 = o_xo;
      o_x1 = o_x;
      o_u1 = o_u;
      o_xo = o_xo_next;
      o_x = o_x_next;
      o_r = o_r_next;

      // Plant and ground truth.
      const RationalVector u_true = truth.step(r);
      const ProcessOutput po_plant = process_step(plant_state, ao.u, plant);
      plant_state = po_plant.next;
      rec.u_true = to_doubles(u_true);
      rec.u_a = to_doubles(ao.u);
      rec.diff_inf = inf_diff(ao.u, u_true);
      rec.state_gap = inf_diff(plant_state.x_p, truth.x_p);
      tr.u_a_exact.push_back(ao.u);

      rec.msgs_ctrl_to_act =
          inc.alpha.dimension() + inc.beta.dimension() + inc.gamma.dimension();
      rec.msgs_sensor_to_ctrl = so.encrypted.dimension();
      rec.msgs_provider_to_ctrl = po.encrypted.dimension();
      rec.msgs_ctrl_to_sensor = y_o.dimension();
      rec.enc_ops = so.innovation.size() + po.increment.size();
      rec.dec_ops = y_o.dimension() + rec.msgs_ctrl_to_act;
      rec.actuator_enc_ops = 0;
      rec.actuator_dec_ops = rec.msgs_ctrl_to_act;

      sum.saturation_count += rec.saturated;
      sum.recovery_failures += rec.recovery_failure;
      sum.oracle_mismatches += rec.oracle_mismatch;
      sum.identity_mismatches += rec.identity_mismatch;
      tr.steps.push_back(std::move(rec));
      l *= w_;
    }
  } catch (const NoiseOverflow& e) {
    sum.noise_overflow = true;
    sum.noise_message = e.what();
  }
  // The actuator's own counters are the source of truth for its encryptions.
  if (actuator.counters().enc != 0) throw Error("actuator performed an encryption");
  finish_summary(tr);
  return tr;
}

ClosedLoopTrace run_prelim(const ScenarioConfig& cfg_in, const PrelimPlan& plan,
                           const RunOptions&) {
  ScenarioConfig cfg = cfg_in;
  cfg.normalize();
  const PlantModel& plant = cfg.plant;
  const ControllerModel& ctrl = cfg.ctrl;
  const std::size_t w = plant.w();

  ClosedLoopTrace tr;
  tr.scheme = Scheme::prelim;
  tr.backend = cfg.backend;
  tr.prelim_plan = plan;
  std::uint32_t dbits = cfg.lattice.delta_bits;
  if (cfg.backend == Backend::lattice && cfg.auto_delta_bits) {
    dbits = auto_delta_bits(plan, cfg.lattice, cfg.horizon);
  }
  tr.delta_bits = cfg.backend == Backend::lattice ? dbits : 0;
  const SchemeParams sp = scheme_params(cfg, plan.q, dbits);
  const KeyPair keys = keygen(sp, cfg.seed);
  const BigInt& q = plan.q;
  const Rational& w_ = plan.omega;
  const Rational& s1 = plan.s1;
  const Rational& s2 = plan.s2;

  const RationalVector xbar0 = scale(ctrl.x0, 1 / (s1 * plan.l0));
  Rng setup_rng(cfg.seed ^ 0x5e70u);
  PrelimController controller(
      plan, sp,
      encrypt(keys.public_key, PlainVector::reduce(to_int(xbar0), q), setup_rng));
  PrelimActuator actuator(plan, keys.secret_key, w);
  Rng sensor_rng(cfg.seed * 3 + 1), provider_rng(cfg.seed * 3 + 2);
  // Signals shrink with l(t), so the input quantizers never need to clip.
  const QuantizerSpec wide(BigInt(1) << 4096);

  const RationalMatrix Fw = ctrl.F / w_, Gw = ctrl.G / (s1 * w_), Rw = ctrl.R_ref / (s1 * w_);
  const RationalMatrix Hs = ctrl.H / s2, Js = ctrl.J / (s1 * s2), Ss = ctrl.S / (s1 * s2);
  RationalVector o_x = xbar0;
  RationalVector o_u_prev = RationalVector(w, Rational(0));

  TruthLoop truth{plant, ctrl, cfg.x_p0, ctrl.x0};
  ProcessState plant_state{cfg.x_p0, 0};
  Rational l = plan.l0;
  auto& sum = tr.summary;
  try {
    for (std::uint64_t t = 0; t < cfg.horizon; ++t) {
      StepRecord rec;
      rec.t = t;
      const RationalVector r = cfg.reference_at(t);
      const RationalVector y_p = plant.C * plant_state.x_p;
      const QuantizedVector yq = quantize_vector(scale(y_p, 1 / l), wide);
      const QuantizedVector rq = quantize_vector(scale(r, 1 / l), wide);
      rec.saturated = yq.saturated || rq.saturated;
      const Ciphertext y_ct =
          encrypt(keys.public_key, PlainVector::reduce(yq.values, q), sensor_rng);
      const Ciphertext r_ct =
          encrypt(keys.public_key, PlainVector::reduce(rq.values, q), provider_rng);
      const Ciphertext u_ct = controller.step(y_ct, r_ct);
      const PrelimActuator::Output ao = actuator.step(u_ct, l);

      const RationalVector ybar = to_rational(yq.values), rbar = to_rational(rq.values);
      const RationalVector o_u = add(add(Hs * o_x, Js * ybar), Ss * rbar);
      o_x = add(add(Fw * o_x, Gw * ybar), Rw * rbar);
      if (!equal_mod(ao.decrypted, o_u, q)) rec.oracle_mismatch = true;
      if (!equal_exact(ao.u_tilde, o_u)) rec.recovery_failure = true;
      const double incr = inf_norm(sub(o_u, scale(o_u_prev, 1 / w_)));
      sum.max_increment = std::max(sum.max_increment, incr);
      o_u_prev = o_u;

      const RationalVector u_true = truth.step(r);
      plant_state = process_step(plant_state, ao.u, plant).next;
      rec.u_true = to_doubles(u_true);
      rec.u_a = to_doubles(ao.u);
      rec.diff_inf = inf_diff(ao.u, u_true);
      rec.state_gap = inf_diff(plant_state.x_p, truth.x_p);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rec.log2_alpha = rec.log2_beta = rec.log2_gamma = rec.log2_sensor_gap = nan;
      const double lg = log2_inf(ao.u_tilde);
      if (t == 0 || lg > sum.max_log2_metric) sum.max_log2_metric = lg;
      tr.u_a_exact.push_back(ao.u);

      rec.msgs_ctrl_to_act = u_ct.dimension();
      rec.msgs_sensor_to_ctrl = y_ct.dimension();
      rec.msgs_provider_to_ctrl = r_ct.dimension();
      rec.msgs_ctrl_to_sensor = 0;
      rec.enc_ops = y_ct.dimension() + r_ct.dimension();
      rec.dec_ops = u_ct.dimension();
      rec.actuator_enc_ops = 0;
      rec.actuator_dec_ops = u_ct.dimension();

      sum.saturation_count += rec.saturated;
      sum.recovery_failures += rec.recovery_failure;
      sum.oracle_mismatches += rec.oracle_mismatch;
      tr.steps.push_back(std::move(rec));
      l *= w_;
    }
  } catch (const NoiseOverflow& e) {
    sum.noise_overflow = true;
    sum.noise_message = e.what();
  }
  finish_summary(tr);
  return tr;
}

ClosedLoopTrace run_closed_loop(const ScenarioConfig& cfg_in, const RunOptions& opts) {
  ScenarioConfig cfg = cfg_in;
  cfg.normalize();
  if (cfg.scheme == Scheme::prelim) {
    const PrelimPlan plan = plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
    return run_prelim(cfg, plan, opts);
  }
  const MainPlan plan = plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
  return run_main(cfg, plan, opts);
}

std::vector<ClosedLoopTrace> run_sweep(const std::vector<ScenarioConfig>& configs,
                                       unsigned threads) {
  std::vector<ClosedLoopTrace> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(configs.size(), 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run_closed_loop(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string trace_csv(const ClosedLoopTrace& trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  const std::size_t w = trace.steps.empty() ? 0 : trace.steps.front().u_a.size();
  os << "t";
  for (std::size_t i = 0; i < w; ++i) os << ",u_true[" << i << "]";
  for (std::size_t i = 0; i < w; ++i) os << ",u_a[" << i << "]";
  os << ",diff_inf,log2_alpha,log2_beta,log2_gamma,log2_sensor_gap,saturated,"
        "msgs_ctrl_to_act,enc_ops,dec_ops\n";
  for (const auto& r : trace.steps) {
    os << r.t;
    for (double x : r.u_true) os << ',' << x;
    for (double x : r.u_a) os << ',' << x;
    os << ',' << r.diff_inf << ',' << r.log2_alpha << ',' << r.log2_beta << ','
       << r.log2_gamma << ',' << r.log2_sensor_gap << ',' << (r.saturated ? 1 : 0) << ','
       << r.msgs_ctrl_to_act << ',' << r.enc_ops << ',' << r.dec_ops << '\n';
  }
  return os.str();
}

}  // namespace hectl
