// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Parameter selection for the two encrypted-controller constructions.
//
// The preliminary scheme encrypts the given controller directly after
// scaling by omega; it needs rho_c < s_F. The main scheme runs a deadbeat
// observer and a copy of the controller inside the encrypted domain and only
// ever transmits bounded increments, so omega can be as small as integrality
// demands.

#ifndef HECTL_PLANNER_HPP_
#define HECTL_PLANNER_HPP_

#include "hectl/exactmat.hpp"
#include "hectl/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hectl {

class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class NotObservable : public Error {
 public:
  using Error::Error;
};

class Divergent : public Error {
 public:
  using Error::Error;
};

// Raised when no omega (or a supplied override) makes every scaled matrix
// integer. The message names the blocking matrix.
class NoIntegerOmega : public Error {
 public:
  using Error::Error;
};

class InvalidOverride : public Error {
 public:
  using Error::Error;
};

// Smallest power of two strictly greater than x (at least 2).
BigInt pow2_above(double x);

const IntegralityCertificate& find_certificate(
    const std::vector<IntegralityCertificate>& certs, const std::string& name);

// ------------------------------------------------------------ preliminary

struct FeasibilityReport {
  double rho_c = 0;
  Rational s_F;
  bool feasible = false;
};

// Throws AssumptionViolated when rho_c >= 1.
FeasibilityReport check_prelim_feasible(const PlantModel& plant,
                                        const ControllerModel& ctrl);

struct PrelimOptions {
  std::optional<Rational> omega;
  std::optional<Rational> s1;
  std::optional<Rational> s2;
  std::optional<Rational> l0;
  std::optional<BigInt> q;
  // Infinity-norm bound on the (constant) reference r.
  Rational reference_bound = 0;
};

struct PrelimPlan {
  Rational omega;
  Rational s1;
  Rational s2;
  Rational l0;
  BigInt q;
  double M_bound = 0;
  double rho_c = 0;
  Rational s_F;
  // Bounds on |u~(t) - u~(t-1)/omega| for t >= 1 and on |u~(0)|.
  double increment_bound = 0;
  double initial_bound = 0;
  double q_required = 0;
  bool q_overridden = false;
  std::vector<IntegralityCertificate> certificates;

  const IntegralityCertificate& cert(const std::string& name) const {
    return find_certificate(certificates, name);
  }
};

PrelimPlan plan_preliminary(const PlantModel& plant, const ControllerModel& ctrl,
                            const PrelimOptions& options = {});

// sup ||delta(t)||_2 for the scaled increment dynamics
//   delta(t+1) = (A_cl/omega) delta(t) + (Bbar/omega) ebar(t),
// with ||ebar|| <= sqrt(v+w+n_r) (1/2 + 1/(2 omega)) and ||delta(first)|| <=
// delta0_bound. Throws Divergent unless rho(A_cl/omega) < 1.
double compute_M(const PlantModel& plant, const ControllerModel& ctrl,
                 const Rational& omega, double delta0_bound);

// ------------------------------------------------------------------- main

struct DeadbeatDesign {
  RationalMatrix gain;        // rounded to the decimal grid when requested
  RationalMatrix exact_gain;  // exactly deadbeat: (A - L C)^n = 0
  double residual_rho = 0;    // rho(A - gain C); 0 when exactly nilpotent
  bool exact = false;         // gain itself is exactly deadbeat
  std::size_t observability_index = 0;
};

// decimals = nullopt keeps the exact rational gain. Throws NotObservable.
DeadbeatDesign design_deadbeat_observer(
    const RationalMatrix& A, const RationalMatrix& C,
    std::optional<unsigned> decimals = 4);

// rho(M), reported as exactly 0 when M is nilpotent in exact arithmetic.
double residual_spectral_radius(const RationalMatrix& M);

struct CeBound {
  double value = 0;
  double transient = 0;
  double series = 0;
  std::size_t terms = 0;
  // ||E^K|| / ||E||^K at the truncation index (0 when exactly nilpotent).
  double nilpotent_residue = 0;
  bool exact_nilpotent = false;
  // True when the finite sum was used because the residue is below 1e-12
  // although E is not exactly nilpotent.
  bool deadbeat_nominal = false;
};

CeBound compute_Ce(const RationalMatrix& A, const RationalMatrix& C,
                   const RationalMatrix& L, const Rational& omega,
                   double e0_bound);

struct QBoundTerms {
  double observer = 0;    // 2 C_e ||[LC L]|| / omega
  double reference = 0;   // ||[R/omega -R]|| / omega^2
  double input = 0;       // ||[S/omega -S]|| / (s2 omega)
  double sensor = 0;      // 2 ||C/s1|| C_e
  double max() const;
};

QBoundTerms q_bound_main(const RationalMatrix& L, const RationalMatrix& C,
                         const RationalMatrix& R_ref, const RationalMatrix& S,
                         const Rational& s1, const Rational& s2,
                         const Rational& omega, double C_e);

struct MainOptions {
  std::optional<RationalMatrix> observer_gain;
  std::optional<unsigned> gain_decimals = 4;
  std::optional<Rational> omega;
  std::optional<Rational> s1;
  std::optional<Rational> s2;
  std::optional<Rational> l0;
  std::optional<BigInt> q;
  std::optional<BigInt> range_level;
  // Constant reference and the provider's initial estimate.
  RationalVector reference;
  RationalVector r_e0;
};

struct MainPlan {
  RationalMatrix L;
  Rational omega;
  Rational s1;
  Rational s2;
  Rational l0;
  BigInt q;
  double C_e = 0;
  BigInt range_level;
  std::vector<IntegralityCertificate> certificates;

  double rho_c = 0;
  double observer_rho = 0;
  bool observer_exact = false;
  CeBound ce;
  QBoundTerms q_terms;
  // Extra requirement from the first steps, where increments involve the
  // initial state and the first reference error instead of the steady bounds.
  double bootstrap_bound = 0;
  double q_required = 0;
  bool q_overridden = false;
  double reference_error0 = 0;  // ||r - r_e(0)|| / l0
  RationalVector r_e0;

  const IntegralityCertificate& cert(const std::string& name) const {
    return find_certificate(certificates, name);
  }
};

// True iff A/w, s2 B/w, L/w, F/w, GC/w, R/w and 1/w are all integer.
bool omega_admissible_main(const PlantModel& plant, const ControllerModel& ctrl,
                           const RationalMatrix& L, const Rational& s2,
                           const Rational& omega);

MainPlan plan_main(const PlantModel& plant, const ControllerModel& ctrl,
                   const MainOptions& options = {});

}  // namespace hectl

#endif  // HECTL_PLANNER_HPP_
