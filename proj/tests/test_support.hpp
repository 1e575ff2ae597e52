// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures and generators for the test binaries.

#ifndef HECTL_TEST_SUPPORT_HPP_
#define HECTL_TEST_SUPPORT_HPP_

#include "hectl/exactmat.hpp"
#include "hectl/loop.hpp"
#include "hectl/model.hpp"
#include "hectl/scenario.hpp"

#include <algorithm>
#include <optional>
#include <random>

namespace hectl::testing {

struct Fixture {
  PlantModel plant;
  ControllerModel ctrl;
  std::optional<RationalMatrix> paper_L;
  RationalVector reference;
};

inline Fixture batch_reactor() {
  const ScenarioConfig cfg = builtin_batch_reactor();
  return {cfg.plant, cfg.ctrl, cfg.observer_gain, cfg.reference};
}

// Entries p/q with |p| <= span and q in 1..9.
inline RationalMatrix random_rational_matrix(std::mt19937_64& rng, std::size_t r,
                                             std::size_t c, long span) {
  std::uniform_int_distribution<long> num(-span, span), den(1, 9);
  RationalMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      Rational x(num(rng), den(rng));
      x.canonicalize();
      m(i, j) = x;
    }
  }
  return m;
}

// Entries k/10^digits with |k| <= span.
inline RationalMatrix random_decimal_matrix(std::mt19937_64& rng, std::size_t r,
                                            std::size_t c, long span, unsigned digits) {
  std::uniform_int_distribution<long> num(-span, span);
  BigInt den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, digits);
  RationalMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      Rational x(BigInt(num(rng)), den);
      x.canonicalize();
      m(i, j) = x;
    }
  }
  return m;
}

inline RationalMatrix random_int_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                        long span) {
  return random_decimal_matrix(rng, r, c, span, 0);
}

inline RationalVector random_decimal_vector(std::mt19937_64& rng, std::size_t n, long span,
                                            unsigned digits) {
  return random_decimal_matrix(rng, n, 1, span, digits).entries();
}

// Random stable closed loop with small dimensions that plan_main accepts,
// using the exact deadbeat gain.
inline ScenarioConfig random_main_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim3(1, 3), dim2(1, 2);
  for (;;) {
    ScenarioConfig cfg;
    const std::size_t n = dim3(rng), nx = dim3(rng), w = dim2(rng), nr = dim2(rng);
    const std::size_t v = std::min(n, dim2(rng));
    cfg.plant.A = random_decimal_matrix(rng, n, n, 6, 1);
    cfg.plant.B = random_decimal_matrix(rng, n, w, 10, 1);
    cfg.plant.C = random_decimal_matrix(rng, v, n, 10, 1);
    cfg.ctrl.F = random_decimal_matrix(rng, nx, nx, 5, 1);
    cfg.ctrl.G = random_decimal_matrix(rng, nx, v, 5, 1);
    cfg.ctrl.R_ref = random_decimal_matrix(rng, nx, nr, 5, 1);
    cfg.ctrl.H = random_decimal_matrix(rng, w, nx, 5, 1);
    cfg.ctrl.J = random_decimal_matrix(rng, w, v, 5, 1);
    cfg.ctrl.S = random_decimal_matrix(rng, w, nr, 5, 1);
    cfg.ctrl.x0 = random_decimal_vector(rng, nx, 10, 1);
    cfg.x_p0 = random_decimal_vector(rng, n, 10, 1);
    cfg.reference = random_decimal_vector(rng, nr, 20, 1);
    cfg.gain_decimals = std::nullopt;
    cfg.horizon = 50;
    try {
      cfg.normalize();
      if (spectral_radius(block_closed_loop(cfg.plant, cfg.ctrl)) >= 0.95) continue;
      plan_main(cfg.plant, cfg.ctrl, main_options(cfg));
    } catch (const Error&) {
      continue;
    }
    return cfg;
  }
}

// Random fixture for the preliminary scheme: F has entries on the half grid,
// so s_F = 1/2, and the closed loop contracts faster than 1/2.
inline ScenarioConfig random_prelim_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim2(1, 2);
  for (;;) {
    ScenarioConfig cfg;
    const std::size_t n = dim2(rng), nx = dim2(rng);
    cfg.plant.A = random_decimal_matrix(rng, n, n, 3, 0) / Rational(4);
    cfg.plant.B = random_decimal_matrix(rng, n, 1, 2, 0) / Rational(2);
    cfg.plant.C = random_decimal_matrix(rng, 1, n, 2, 0) / Rational(2);
    cfg.ctrl.F = random_decimal_matrix(rng, nx, nx, 2, 0) / Rational(2);
    cfg.ctrl.G = random_decimal_matrix(rng, nx, 1, 4, 0) / Rational(4);
    cfg.ctrl.R_ref = random_decimal_matrix(rng, nx, 1, 4, 0) / Rational(4);
    cfg.ctrl.H = random_decimal_matrix(rng, 1, nx, 4, 0) / Rational(4);
    cfg.ctrl.J = random_decimal_matrix(rng, 1, 1, 4, 0) / Rational(4);
    cfg.ctrl.S = random_decimal_matrix(rng, 1, 1, 4, 0) / Rational(4);
    cfg.ctrl.x0 = RationalVector(nx, Rational(0));
    cfg.x_p0 = random_decimal_vector(rng, n, 4, 0);
    cfg.reference = random_decimal_vector(rng, 1, 4, 0);
    cfg.scheme = Scheme::prelim;
    cfg.horizon = 200;
    if (cfg.ctrl.F.is_zero() || max_integer_scale(cfg.ctrl.F) != Rational(1, 2)) continue;
    if (inf_norm_exact(cfg.x_p0) == 0 && inf_norm_exact(cfg.reference) == 0) continue;
    try {
      cfg.normalize();
      const double rho = spectral_radius(block_closed_loop(cfg.plant, cfg.ctrl));
      if (rho >= 0.45) continue;
      plan_preliminary(cfg.plant, cfg.ctrl, prelim_options(cfg));
    } catch (const Error&) {
      continue;
    }
    return cfg;
  }
}

}  // namespace hectl::testing

#endif  // HECTL_TEST_SUPPORT_HPP_
