// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Five-party closed loop: plant, sensor, encrypted controller, actuator and
// reference provider, for both the preliminary and the main scheme.
//
// Key roles: sensor and actuator hold the full key; controller and reference
// provider only see the public key. All plant-side signals are exact
// rationals. The quantizer is the only bridge into the integer domain.

#ifndef HECTL_LOOP_HPP_
#define HECTL_LOOP_HPP_

#include "hectl/exactmat.hpp"
#include "hectl/he.hpp"
#include "hectl/model.hpp"
#include "hectl/planner.hpp"
#include "hectl/quantizer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hectl {

// ------------------------------------------------------------------ plant

struct ProcessState {
  RationalVector x_p;
  std::uint64_t t = 0;
};

struct ProcessOutput {
  ProcessState next;
  RationalVector y_p;  // C x_p at the current t, before the update
};

ProcessOutput process_step(const ProcessState& state, const RationalVector& u,
                           const PlantModel& plant);

// The integer congruent to v mod q with x - prior in [-q/2, q/2):
//   x = v - floor((v - prior + q/2) / q) q.
BigInt centered_mod_recover(const BigInt& v, const Rational& prior, const BigInt& q);
IntVector centered_mod_recover(const IntVector& v, const RationalVector& prior,
                               const BigInt& q);
IntVector centered_mod_recover(const PlainVector& v, const RationalVector& prior,
                               const BigInt& q);

// Per-party operation counters, in scalar elements (one ciphertext per entry).
struct OpCounters {
  std::uint64_t enc = 0;
  std::uint64_t dec = 0;
};

// ------------------------------------------------------ preliminary scheme

struct PrelimMatrices {
  IntMatrix F, G, R, H, J, S;  // residues mod q
  static PrelimMatrices from_plan(const PrelimPlan& plan);
};

class PrelimController {
 public:
  PrelimController(const PrelimPlan& plan, const SchemeParams& params,
                   Ciphertext x0);
  // u(t) = H x ⊕ J y ⊕ S r, then x(t+1) = F x ⊕ G y ⊕ R r.
  Ciphertext step(const Ciphertext& y, const Ciphertext& r);
  const Ciphertext& state() const { return x_; }

 private:
  PrelimMatrices m_;
  SchemeParams params_;
  Ciphertext x_;
};

class PrelimActuator {
 public:
  PrelimActuator(const PrelimPlan& plan, KeyMaterial sk, std::size_t w);

  struct Output {
    PlainVector decrypted;
    IntVector u_tilde;  // recovered u~_a(t)
    RationalVector u;   // s1 s2 l u~_a(t)
  };
  // Prior for the lift is u~_a(t-1)/omega (zero at t = 0).
  Output step(const Ciphertext& u, const Rational& l);
  const OpCounters& counters() const { return ops_; }

 private:
  KeyMaterial sk_;
  Rational omega_;
  Rational s12_;
  BigInt q_;
  RationalVector prior_;
  OpCounters ops_;
};

// ------------------------------------------------------------- main scheme

struct MainMatrices {
  // Residues mod q.
  IntMatrix A_o, B_o, L_o, C, F, G, R, H, J, S;
  IntMatrix W_r;                        // I_{n_r}/omega
  IntMatrix A_n, B_n, F_n, G_n, H_n, J_n;  // negated
  IntMatrix W_nx_n, W_w_n;              // -I/omega sized for r_beta, r_gamma
  static MainMatrices from_plan(const MainPlan& plan, std::size_t n_r, std::size_t w);
};

struct Increments {
  Ciphertext alpha;
  Ciphertext beta;
  Ciphertext gamma;
};

class MainController {
 public:
  // x_o0, x0, r0 encrypt the initial scaled states; zero_* encrypt zero
  // vectors used as the pre-initial memory.
  MainController(const MainPlan& plan, const SchemeParams& params, Ciphertext x_o0,
                 Ciphertext x0, Ciphertext r0, const Ciphertext& zero_n,
                 const Ciphertext& zero_nx, const Ciphertext& zero_w);

  // y_o(t) = C x_o(t), sent to the sensors.
  Ciphertext output_estimate() const;
  // Emits alpha, beta, gamma for time t and advances the state to t + 1.
  Increments step(const Ciphertext& innovation, const Ciphertext& ref_increment);

  const Ciphertext& x_o() const { return x_o_; }
  const Ciphertext& x() const { return x_; }
  const Ciphertext& r() const { return r_; }

 private:
  MainMatrices m_;
  SchemeParams params_;
  Ciphertext x_o_, x_, r_;       // time t
  Ciphertext x_o1_, x1_, u1_;    // t - 1
  Ciphertext x_o2_, x2_;         // t - 2
};

class Sensor {
 public:
  Sensor(const MainPlan& plan, KeyMaterial sk, KeyMaterial pk, std::uint64_t seed);

  struct Output {
    PlainVector decrypted;
    IntVector y_tilde;           // lifted (C/s1) xbar_o
    RationalVector y_o_s;        // s1 l y_tilde
    IntVector innovation;        // Q((y_p - y_o^s)/l)
    RationalVector scaled_gap;   // (y_p - y_o^s)/(l s1)
    bool saturated = false;
    Ciphertext encrypted;
  };
  Output step(const Ciphertext& y_o, const RationalVector& y_p, const Rational& l);
  const OpCounters& counters() const { return ops_; }

 private:
  KeyMaterial sk_, pk_;
  Rational s1_;
  BigInt q_;
  QuantizerSpec quant_;
  Rng rng_;
  OpCounters ops_;
};

class RefProvider {
 public:
  RefProvider(const MainPlan& plan, KeyMaterial pk, std::uint64_t seed);

  struct Output {
    IntVector increment;  // Q((r - r_e)/l)
    bool saturated = false;
    Ciphertext encrypted;
  };
  // Also advances r_e(t+1) = r_e(t) + l Q((r - r_e)/l).
  Output step(const RationalVector& r, const Rational& l);
  const RationalVector& r_e() const { return r_e_; }
  const OpCounters& counters() const { return ops_; }

 private:
  KeyMaterial pk_;
  BigInt q_;
  QuantizerSpec quant_;
  Rng rng_;
  RationalVector r_e_;
  OpCounters ops_;
};

class MainActuator {
 public:
  MainActuator(const MainPlan& plan, const PlantModel& plant,
               const ControllerModel& ctrl, KeyMaterial sk);

  struct Output {
    PlainVector dec_alpha, dec_beta, dec_gamma;
    IntVector alpha, beta, gamma;  // centered lifts with prior 0
    RationalVector x_o, x, u;      // reconstructed x_o^a, x^a, u^a
  };
  Output step(const Increments& inc, const Rational& l);
  const OpCounters& counters() const { return ops_; }

 private:
  KeyMaterial sk_;
  BigInt q_;
  Rational s2_;
  RationalMatrix A_, B_, F_, GC_, H_, JC_;
  RationalVector x_o1_, x_o2_, x1_, x2_, u1_;
  OpCounters ops_;
};

// --------------------------------------------------------- orchestration

enum class Scheme { prelim, main };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);

struct Overrides {
  std::optional<Rational> omega, s1, s2, l0;
  std::optional<BigInt> q, range_level;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PlantModel plant;
  ControllerModel ctrl;
  RationalVector x_p0;
  RationalVector reference;  // constant reference
  // Optional time-varying reference, r(t) = schedule[min(t, size-1)].
  // Experimental: the 1/(2 omega) error bound is only claimed for constants.
  std::vector<RationalVector> reference_schedule;
  RationalVector r_e0;
  std::optional<RationalMatrix> observer_gain;
  std::optional<unsigned> gain_decimals = 4;
  Scheme scheme = Scheme::main;
  Backend backend = Backend::mock;
  LatticeParams lattice;
  bool auto_delta_bits = true;
  std::uint64_t horizon = 600;
  std::uint64_t seed = 1;
  Overrides overrides;

  // Fills defaults (zero vectors) and checks dimensions.
  void normalize();
  RationalVector reference_at(std::uint64_t t) const;
};

PrelimOptions prelim_options(const ScenarioConfig& cfg);
MainOptions main_options(const ScenarioConfig& cfg);

struct StepRecord {
  std::uint64_t t = 0;
  std::vector<double> u_true;
  std::vector<double> u_a;
  double diff_inf = 0;
  double log2_alpha = 0;
  double log2_beta = 0;
  double log2_gamma = 0;
  double log2_sensor_gap = 0;
  bool saturated = false;
  bool recovery_failure = false;
  bool oracle_mismatch = false;
  bool identity_mismatch = false;
  double state_gap = 0;  // ||x_p - x_p^shadow||_inf
  std::uint64_t msgs_ctrl_to_act = 0;
  std::uint64_t msgs_sensor_to_ctrl = 0;
  std::uint64_t msgs_provider_to_ctrl = 0;
  std::uint64_t msgs_ctrl_to_sensor = 0;
  std::uint64_t enc_ops = 0;
  std::uint64_t dec_ops = 0;
  std::uint64_t actuator_enc_ops = 0;
  std::uint64_t actuator_dec_ops = 0;
};

struct TraceSummary {
  std::uint64_t steps = 0;
  double max_log2_metric = 0;
  double final_diff = 0;
  double final_state_gap = 0;
  std::uint64_t saturation_count = 0;
  std::uint64_t recovery_failures = 0;
  std::uint64_t oracle_mismatches = 0;
  std::uint64_t identity_mismatches = 0;
  std::uint64_t identity_checks = 0;
  bool noise_overflow = false;
  std::string noise_message;
  // Largest |u~(t) - u~(t-1)/omega| (preliminary scheme).
  double max_increment = 0;
  std::uint64_t total_msgs_ctrl_to_act = 0;
  std::uint64_t total_enc_ops = 0;
  std::uint64_t total_dec_ops = 0;
  std::uint64_t actuator_enc_ops = 0;
  std::uint64_t actuator_dec_ops = 0;
  // Diff is eventually nonincreasing from this step on.
  std::uint64_t monotone_from = 0;
};

struct ClosedLoopTrace {
  Scheme scheme = Scheme::main;
  Backend backend = Backend::mock;
  std::vector<StepRecord> steps;
  std::vector<RationalVector> u_a_exact;
  TraceSummary summary;
  std::optional<MainPlan> main_plan;
  std::optional<PrelimPlan> prelim_plan;
  std::uint32_t delta_bits = 0;
};

struct RunOptions {
  bool check_identities = true;
};

// Plans (honoring overrides) and runs the scenario.
ClosedLoopTrace run_closed_loop(const ScenarioConfig& cfg, const RunOptions& opts = {});
ClosedLoopTrace run_main(const ScenarioConfig& cfg, const MainPlan& plan,
                         const RunOptions& opts = {});
ClosedLoopTrace run_prelim(const ScenarioConfig& cfg, const PrelimPlan& plan,
                           const RunOptions& opts = {});

// Independent runs on a thread pool; results keep input order.
std::vector<ClosedLoopTrace> run_sweep(const std::vector<ScenarioConfig>& configs,
                                       unsigned threads = 0);

// Lattice Delta size that keeps decryption exact for the horizon.
std::uint32_t auto_delta_bits(const MainPlan& plan, const LatticeParams& lp,
                              std::uint64_t horizon, std::size_t n_r, std::size_t w);
std::uint32_t auto_delta_bits(const PrelimPlan& plan, const LatticeParams& lp,
                              std::uint64_t horizon);

// CSV in the documented column order.
std::string trace_csv(const ClosedLoopTrace& trace);

}  // namespace hectl

#endif  // HECTL_LOOP_HPP_
