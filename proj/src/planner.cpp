// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/planner.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace hectl {
namespace {

constexpr double kResidueTolerance = 1e-12;
constexpr std::size_t kMaxSeriesTerms = 1000000;

Eigen::MatrixXd to_eigen(const RationalMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).get_d();
  }
  return out;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double row_sum_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

RationalMatrix zeros(std::size_t r, std::size_t c) { return RationalMatrix(r, c); }

std::string describe(const Rational& r) {
  std::ostringstream os;
  os << to_string(r) << " (" << r.get_d() << ")";
  return os.str();
}

IntegralityCertificate require_integer(const RationalMatrix& m, const Rational& a,
                                       const std::string& name, bool from_override) {
  auto cert = integer_after_scale(m, a, name);
  if (!cert) {
    const std::string msg = name + " is not an integer matrix for scale " + to_string(a);
    if (from_override) throw InvalidOverride(msg);
    throw NoIntegerOmega(msg);
  }
  return std::move(*cert);
}

// Largest scale l0 <= 1 such that every entry of v / (base * l0) is integer.
Rational initial_scale(const RationalVector& v, const Rational& base) {
  const auto g = rational_gcd(v);
  if (!g) return Rational(1);
  const Rational t = *g / base;
  if (t <= 1) return t;
  return t / Rational(ceil_rational(t));
}

RationalMatrix round_to_grid(const RationalMatrix& m, unsigned decimals) {
  BigInt scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, decimals);
  RationalMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const Rational x = m(i, j) * scale;
      BigInt k = floor_rational(abs(x) + Rational(1, 2));
      if (x < 0) k = -k;
      out(i, j) = Rational(k, scale);
      out(i, j).canonicalize();
    }
  }
  return out;
}

RationalMatrix select_columns(const RationalMatrix& m, std::size_t first,
                              std::size_t count) {
  RationalMatrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, first + j);
  }
  return out;
}

RationalMatrix observability(const RationalMatrix& A, const RationalMatrix& C,
                             std::size_t blocks) {
  RationalMatrix O = C;
  RationalMatrix row = C;
  for (std::size_t k = 1; k < blocks; ++k) {
    row = row * A;
    O = vstack(O, row);
  }
  return O;
}

}  // namespace

BigInt pow2_above(double x) {
  if (!std::isfinite(x)) throw Error("modulus bound is not finite");
  if (x < 1) return BigInt(2);
  int e = 0;
  std::frexp(x, &e);  // 2^(e-1) <= x < 2^e
  BigInt q;
  mpz_ui_pow_ui(q.get_mpz_t(), 2, static_cast<unsigned long>(std::max(e, 1)));
  return q;
}

const IntegralityCertificate& find_certificate(
    const std::vector<IntegralityCertificate>& certs, const std::string& name) {
  for (const auto& c : certs) {
    if (c.source == name) return c;
  }
  throw Error("no certificate named " + name);
}

// ------------------------------------------------------------ preliminary

FeasibilityReport check_prelim_feasible(const PlantModel& plant,
                                        const ControllerModel& ctrl) {
  FeasibilityReport r;
  r.rho_c = spectral_radius(block_closed_loop(plant, ctrl));
  if (r.rho_c >= 1) {
    throw AssumptionViolated("closed loop is not stable: rho_c = " +
                             std::to_string(r.rho_c));
  }
  r.s_F = max_integer_scale(ctrl.F);
  r.feasible = r.rho_c < r.s_F.get_d();
  return r;
}

double compute_M(const PlantModel& plant, const ControllerModel& ctrl,
                 const Rational& omega, double delta0_bound) {
  const RationalMatrix Acl = block_closed_loop(plant, ctrl) / omega;
  if (spectral_radius(Acl) >= 1) {
    throw Divergent("rho(A_cl / omega) >= 1; omega must exceed rho_c");
  }
  const std::size_t nx = ctrl.n_x();
  const RationalMatrix& B = plant.B;
  const RationalMatrix top = hstack(hstack(B * ctrl.J, B), B * ctrl.S);
  const RationalMatrix bottom =
      hstack(hstack(ctrl.G, zeros(nx, plant.w())), ctrl.R_ref);
  const double bbar = norm2(vstack(top, bottom) / omega);
  const double w = omega.get_d();
  const double e_max =
      std::sqrt(static_cast<double>(plant.v() + plant.w() + ctrl.n_r())) *
      (0.5 + 0.5 / w);

  const Eigen::MatrixXd P = to_eigen(Acl);
  Eigen::MatrixXd Pk = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  double sup = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double nk = spectral_norm(Pk);
    if (!std::isfinite(nk)) throw Divergent("compute_M: powers overflow");
    sup = std::max(sup, nk);
    sum += nk;
    if (nk == 0.0 || nk < kResidueTolerance * sum) break;
    if (k >= kMaxSeriesTerms) throw Divergent("compute_M: series did not converge");
    Pk = P * Pk;
  }
  return sup * delta0_bound + sum * bbar * e_max;
}

PrelimPlan plan_preliminary(const PlantModel& plant, const ControllerModel& ctrl,
                            const PrelimOptions& opt) {
  plant.validate();
  ctrl.validate(plant);
  if (ctrl.n_x() == 0) throw Infeasible("controller has no state; s_F is undefined");
  if (ctrl.F.is_zero()) throw Infeasible("F is zero; s_F is undefined");

  PrelimPlan plan;
  const FeasibilityReport feas = check_prelim_feasible(plant, ctrl);
  plan.rho_c = feas.rho_c;
  plan.s_F = feas.s_F;
  if (!feas.feasible) {
    throw Infeasible("rho_c >= s_F: rho_c = " + std::to_string(feas.rho_c) +
                     ", s_F = " + describe(feas.s_F));
  }

  // omega: largest g/m in (rho_c, s_F] below 1, g the unclamped gcd of F.
  if (opt.omega) {
    plan.omega = *opt.omega;
    if (plan.omega <= 0 || plan.omega >= 1 || plan.omega > plan.s_F ||
        plan.omega.get_d() <= plan.rho_c) {
      throw InvalidOverride("omega override must lie in (rho_c, s_F] and below 1");
    }
  } else {
    const Rational g = *rational_gcd(ctrl.F);
    BigInt m = ceil_rational(g / plan.s_F);
    const BigInt above = floor_rational(g) + 1;
    if (m < above) m = above;
    plan.omega = g / Rational(m);
    if (plan.omega.get_d() <= plan.rho_c) {
      throw Infeasible("no omega in (rho_c, s_F] below 1 makes F/omega integer");
    }
  }
  const bool over = opt.omega.has_value();
  const Rational& w = plan.omega;

  if (opt.s2) {
    plan.s2 = *opt.s2;
  } else {
    plan.s2 = ctrl.H.is_zero() ? Rational(1) : max_integer_scale(ctrl.H);
  }
  if (plan.s2 <= 0) throw InvalidOverride("s2 must be positive");

  if (opt.s1) {
    plan.s1 = *opt.s1;
  } else {
    std::vector<Rational> cand;
    if (auto g = rational_gcd(ctrl.G)) cand.push_back(*g / w);
    if (auto g = rational_gcd(ctrl.R_ref)) cand.push_back(*g / w);
    if (auto g = rational_gcd(ctrl.J)) cand.push_back(*g / plan.s2);
    if (auto g = rational_gcd(ctrl.S)) cand.push_back(*g / plan.s2);
    plan.s1 = rational_gcd(cand).value_or(Rational(1));
  }
  if (plan.s1 <= 0) throw InvalidOverride("s1 must be positive");
  const Rational& s1 = plan.s1;
  const Rational& s2 = plan.s2;

  plan.l0 = opt.l0 ? *opt.l0 : initial_scale(ctrl.x0, s1);
  if (plan.l0 <= 0) throw InvalidOverride("l0 must be positive");

  auto& certs = plan.certificates;
  certs.push_back(require_integer(ctrl.F, w, "F/omega", over));
  certs.push_back(require_integer(ctrl.G, s1 * w, "G/(s1 omega)", over || opt.s1));
  certs.push_back(require_integer(ctrl.R_ref, s1 * w, "R/(s1 omega)", over || opt.s1));
  certs.push_back(require_integer(ctrl.H, s2, "H/s2", opt.s2.has_value()));
  certs.push_back(require_integer(ctrl.J, s1 * s2, "J/(s1 s2)", opt.s1 || opt.s2));
  certs.push_back(require_integer(ctrl.S, s1 * s2, "S/(s1 s2)", opt.s1 || opt.s2));
  certs.push_back(require_integer(RationalMatrix::column(ctrl.x0), s1 * plan.l0,
                                  "x0/(s1 l0)", true));

  // Bound on the first increment delta(1) = z(1) - z(0)/omega, z = [xp; x]/l.
  const double wd = w.get_d();
  const double l0 = plan.l0.get_d();
  const std::size_t n = plant.n();
  const std::size_t nx = ctrl.n_x();
  const RationalMatrix Acl = block_closed_loop(plant, ctrl);
  const RationalMatrix& B = plant.B;
  const double z0 = std::sqrt(static_cast<double>(n)) * plant.x_p0_bound.get_d() / l0 +
                    norm2(RationalMatrix::column(ctrl.x0)) / l0;
  const RationalMatrix err_gain =
      block2x2(B * ctrl.J, B * ctrl.S, ctrl.G, ctrl.R_ref);
  const RationalMatrix ref_gain = vstack(B * ctrl.S, ctrl.R_ref);
  const double r0 = std::sqrt(static_cast<double>(ctrl.n_r())) *
                    opt.reference_bound.get_d() / l0;
  const double delta1 =
      (norm2(Acl - RationalMatrix::identity(n + nx)) * z0 +
       norm2(err_gain) * std::sqrt(static_cast<double>(plant.v() + ctrl.n_r())) / 2 +
       norm2(ref_gain) * r0) /
      wd;
  plan.M_bound = compute_M(plant, ctrl, w, delta1);

  const double scale = Rational(s1 * s2).get_d();
  const double nJ = inf_norm(ctrl.J);
  const double nS = inf_norm(ctrl.S);
  plan.increment_bound =
      (inf_norm(hstack(ctrl.J * plant.C, ctrl.H)) * plan.M_bound +
       (nJ + nS) * (0.5 + 0.5 / wd)) /
      scale;
  plan.initial_bound =
      (inf_norm(ctrl.H) * inf_norm(ctrl.x0) / l0 +
       nJ * (inf_norm(plant.C) * plant.x_p0_bound.get_d() / l0 + 0.5) +
       nS * (opt.reference_bound.get_d() / l0 + 0.5)) /
      scale;
  plan.q_required = 2 * std::max(plan.increment_bound, plan.initial_bound);
  if (opt.q) {
    if (*opt.q < 2) throw InvalidOverride("q must be at least 2");
    plan.q = *opt.q;
    plan.q_overridden = true;
  } else {
    plan.q = pow2_above(plan.q_required);
  }
  return plan;
}

// ------------------------------------------------------------------- main

double residual_spectral_radius(const RationalMatrix& M) {
  if (!M.square()) throw NonSquare("residual_spectral_radius: not square");
  if (M.pow(static_cast<unsigned>(M.rows())).is_zero()) return 0.0;
  return spectral_radius(M);
}

DeadbeatDesign design_deadbeat_observer(const RationalMatrix& A,
                                        const RationalMatrix& C,
                                        std::optional<unsigned> decimals) {
  if (!A.square()) throw NonSquare("design_deadbeat_observer: A not square");
  if (C.cols() != A.rows() || C.rows() == 0) {
    throw DimensionMismatch("design_deadbeat_observer: C must be v x n");
  }
  const std::size_t n = A.rows();
  const std::size_t v = C.rows();

  std::size_t mu = 1;
  RationalMatrix O = C;
  while (O.rank() < n) {
    if (mu >= n) throw NotObservable("(A, C) is not observable");
    O = observability(A, C, ++mu);
  }

  DeadbeatDesign d;
  d.observability_index = mu;
  const unsigned n_u = static_cast<unsigned>(n);
  if (v * mu == n) {
    // Square observability block: L = A^mu O_mu^{-1} [0 ... 0 I_v].
    d.exact_gain = select_columns(A.pow(static_cast<unsigned>(mu)) * O.inverse(),
                                  n - v, v);
  } else {
    // Ackermann on a single output combination c = w^T C: L = A^n O_c^{-1} e_n w^T.
    std::mt19937 rng(12345);
    std::uniform_int_distribution<int> pick(-3, 3);
    bool found = false;
    for (std::size_t attempt = 0; attempt < 200 && !found; ++attempt) {
      RationalMatrix wt(1, v);
      if (attempt < v) {
        wt(0, attempt) = 1;
      } else {
        for (std::size_t i = 0; i < v; ++i) wt(0, i) = pick(rng);
      }
      const RationalMatrix c = wt * C;
      const RationalMatrix Oc = observability(A, c, n);
      if (Oc.rank() < n) continue;
      const RationalMatrix lc = select_columns(A.pow(n_u) * Oc.inverse(), n - 1, 1);
      d.exact_gain = lc * wt;
      found = true;
    }
    if (!found) {
      throw NotObservable(
          "no single output combination observes (A, C); multi-output deadbeat "
          "placement for non-cyclic A is not supported");
    }
  }
  if (!(A - d.exact_gain * C).pow(n_u).is_zero()) {
    throw Error("design_deadbeat_observer: internal check failed, gain not deadbeat");
  }

  d.gain = decimals ? round_to_grid(d.exact_gain, *decimals) : d.exact_gain;
  const RationalMatrix E = A - d.gain * C;
  d.exact = E.pow(n_u).is_zero();
  d.residual_rho = d.exact ? 0.0 : spectral_radius(E);
  return d;
}

CeBound compute_Ce(const RationalMatrix& A, const RationalMatrix& C,
                   const RationalMatrix& L, const Rational& omega,
                   double e0_bound) {
  if (omega <= 0) throw Error("compute_Ce: omega must be positive");
  const std::size_t n = A.rows();
  const RationalMatrix E = A - L * C;
  CeBound ce;

  // Look for a truncation index K <= n where E^K vanishes (exactly, or to a
  // relative residue of 1e-12).
  const Rational e_norm = inf_norm_exact(E);
  std::vector<RationalMatrix> powers{RationalMatrix::identity(n)};
  std::size_t K = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    powers.push_back(powers.back() * E);
    const RationalMatrix& Ek = powers.back();
    if (Ek.is_zero()) {
      K = k;
      ce.exact_nilpotent = true;
      ce.nilpotent_residue = 0;
      break;
    }
    Rational denom = 1;
    for (std::size_t j = 0; j < k; ++j) denom *= e_norm;
    const double rel = Rational(inf_norm_exact(Ek) / denom).get_d();
    if (rel <= kResidueTolerance) {
      K = k;
      ce.nilpotent_residue = rel;
      ce.deadbeat_nominal = true;
      break;
    }
  }

  if (K > 0) {
    Rational wpow = 1;  // omega^k
    for (std::size_t k = 0; k < K; ++k) {
      const double t = Rational(inf_norm_exact(powers[k]) / wpow).get_d() * e0_bound;
      ce.transient = std::max(ce.transient, t);
      wpow *= omega;  // now omega^(k+1)
      ce.series += Rational(inf_norm_exact(powers[k] * L) / wpow).get_d() / 2;
    }
    ce.terms = K;
  } else {
    const RationalMatrix Ew = E / omega;
    if (spectral_radius(Ew) >= 1) {
      throw Divergent("rho((A - LC)/omega) >= 1 and A - LC is not deadbeat");
    }
    const Eigen::MatrixXd P = to_eigen(Ew);
    const Eigen::MatrixXd Lw = to_eigen(L / omega);
    Eigen::MatrixXd Pk = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t k = 0;; ++k) {
      ce.transient = std::max(ce.transient, row_sum_norm(Pk) * e0_bound);
      const double term = row_sum_norm(Pk * Lw) / 2;
      ce.series += term;
      ce.terms = k + 1;
      if (term == 0.0 || term < kResidueTolerance * ce.series) {
        if (row_sum_norm(Pk) < kResidueTolerance * (1 + ce.series)) break;
      }
      if (k >= kMaxSeriesTerms) throw Divergent("compute_Ce: series did not converge");
      Pk = P * Pk;
    }
  }
  ce.value = std::max(0.5, ce.transient + ce.series);
  return ce;
}

double QBoundTerms::max() const {
  return std::max(std::max(observer, reference), std::max(input, sensor));
}

QBoundTerms q_bound_main(const RationalMatrix& L, const RationalMatrix& C,
                         const RationalMatrix& R_ref, const RationalMatrix& S,
                         const Rational& s1, const Rational& s2,
                         const Rational& omega, double C_e) {
  QBoundTerms t;
  t.observer = 2 * C_e * Rational(inf_norm_exact(hstack(L * C, L)) / omega).get_d();
  t.reference =
      Rational(inf_norm_exact(hstack(R_ref / omega, -R_ref)) / (omega * omega)).get_d();
  t.input = Rational(inf_norm_exact(hstack(S / omega, -S)) / (s2 * omega)).get_d();
  t.sensor = 2 * inf_norm_exact(C / s1).get_d() * C_e;
  return t;
}

bool omega_admissible_main(const PlantModel& plant, const ControllerModel& ctrl,
                           const RationalMatrix& L, const Rational& s2,
                           const Rational& omega) {
  if (omega <= 0 || omega >= 1) return false;
  const Rational one(1);
  return is_integer_after_scale(plant.A, omega) &&
         is_integer_after_scale(s2 * plant.B, omega) &&
         is_integer_after_scale(L, omega) &&
         is_integer_after_scale(ctrl.F, omega) &&
         is_integer_after_scale(ctrl.G * plant.C, omega) &&
         is_integer_after_scale(ctrl.R_ref, omega) &&
         is_integer_after_scale(RationalMatrix(1, 1, {one}), omega);
}

MainPlan plan_main(const PlantModel& plant, const ControllerModel& ctrl,
                   const MainOptions& opt) {
  plant.validate();
  ctrl.validate(plant);
  MainPlan plan;
  plan.rho_c = spectral_radius(block_closed_loop(plant, ctrl));
  if (plan.rho_c >= 1) {
    throw AssumptionViolated("closed loop is not stable: rho_c = " +
                             std::to_string(plan.rho_c));
  }

  const RationalMatrix& A = plant.A;
  const RationalMatrix& B = plant.B;
  const RationalMatrix& C = plant.C;
  if (observability(A, C, plant.n()).rank() < plant.n()) {
    throw NotObservable("(A, C) is not observable");
  }
  if (opt.observer_gain) {
    if (opt.observer_gain->rows() != plant.n() || opt.observer_gain->cols() != plant.v()) {
      throw DimensionMismatch("observer gain must be n x v");
    }
    plan.L = *opt.observer_gain;
  } else {
    plan.L = design_deadbeat_observer(A, C, opt.gain_decimals).gain;
  }
  const RationalMatrix E = A - plan.L * C;
  plan.observer_rho = residual_spectral_radius(E);
  plan.observer_exact = plan.observer_rho == 0.0;

  const RationalMatrix JC = ctrl.J * C;
  const RationalMatrix GC = ctrl.G * C;

  plan.s1 = opt.s1 ? *opt.s1 : max_integer_scale(C);
  if (plan.s1 <= 0) throw InvalidOverride("s1 must be positive");
  if (opt.s2) {
    plan.s2 = *opt.s2;
  } else {
    std::vector<Rational> scales;
    for (const RationalMatrix* m : {&ctrl.H, &JC, &ctrl.S}) {
      if (!m->is_zero()) scales.push_back(max_integer_scale(*m));
    }
    plan.s2 = rational_gcd(scales).value_or(Rational(1));
  }
  if (plan.s2 <= 0) throw InvalidOverride("s2 must be positive");

  if (opt.omega) {
    plan.omega = *opt.omega;
    if (plan.omega <= 0 || plan.omega >= 1) {
      throw InvalidOverride("omega override must lie in (0, 1)");
    }
  } else {
    bool found = false;
    Rational w(1, 10);
    for (int k = 1; k <= 12; ++k, w /= 10) {
      if (omega_admissible_main(plant, ctrl, plan.L, plan.s2, w)) {
        plan.omega = w;
        found = true;
        break;
      }
    }
    if (!found) {
      std::vector<Rational> all{Rational(1)};
      for (const RationalMatrix* m : std::initializer_list<const RationalMatrix*>{&A, &plan.L, &ctrl.F, &GC, &ctrl.R_ref}) {
        all.insert(all.end(), m->entries().begin(), m->entries().end());
      }
      const RationalMatrix s2B = plan.s2 * B;
      all.insert(all.end(), s2B.entries().begin(), s2B.entries().end());
      const Rational g = *rational_gcd(all);
      BigInt den = g.get_den();
      if (den < 2) den = 2;
      plan.omega = Rational(1, den);
      plan.omega.canonicalize();
    }
  }
  const Rational& w = plan.omega;
  const Rational& s1 = plan.s1;
  const Rational& s2 = plan.s2;
  const bool ow = opt.omega.has_value();

  const std::size_t nr = ctrl.n_r();
  RationalVector r = opt.reference.empty() ? RationalVector(nr) : opt.reference;
  plan.r_e0 = opt.r_e0.empty() ? RationalVector(nr) : opt.r_e0;
  if (r.size() != nr || plan.r_e0.size() != nr) {
    throw DimensionMismatch("reference vectors must have n_r entries");
  }

  if (opt.l0) {
    plan.l0 = *opt.l0;
    if (plan.l0 <= 0) throw InvalidOverride("l0 must be positive");
  } else {
    RationalVector joint = ctrl.x0;
    joint.insert(joint.end(), plan.r_e0.begin(), plan.r_e0.end());
    plan.l0 = initial_scale(joint, Rational(1));
  }

  auto& certs = plan.certificates;
  certs.push_back(require_integer(C, s1, "C/s1", opt.s1.has_value()));
  certs.push_back(require_integer(ctrl.H, s2, "H/s2", opt.s2.has_value()));
  certs.push_back(require_integer(JC, s2, "JC/s2", opt.s2.has_value()));
  certs.push_back(require_integer(ctrl.S, s2, "S/s2", opt.s2.has_value()));
  certs.push_back(require_integer(A, w, "A/omega", ow));
  certs.push_back(require_integer(s2 * B, w, "s2B/omega", ow || opt.s2));
  certs.push_back(require_integer(plan.L, w, "L/omega", ow || opt.observer_gain));
  certs.push_back(require_integer(ctrl.F, w, "F/omega", ow));
  certs.push_back(require_integer(GC, w, "GC/omega", ow));
  certs.push_back(require_integer(ctrl.R_ref, w, "R/omega", ow));
  certs.push_back(require_integer(RationalMatrix(1, 1, {Rational(1)}), w, "1/omega", ow));
  // Initial scaled states must be integer as well.
  require_integer(RationalMatrix::column(ctrl.x0), plan.l0, "x0/l0", true);
  require_integer(RationalMatrix::column(plan.r_e0), plan.l0, "r_e0/l0", true);

  const double l0 = plan.l0.get_d();
  const double wd = w.get_d();
  plan.ce = compute_Ce(A, C, plan.L, w, plant.x_p0_bound.get_d() / l0);
  plan.C_e = plan.ce.value;
  plan.q_terms = q_bound_main(plan.L, C, ctrl.R_ref, ctrl.S, s1, s2, w, plan.C_e);

  // First steps: beta(0), beta(1), gamma(0) carry the initial states, and
  // beta(2), gamma(1) see the unreduced first reference error.
  const double x0n = inf_norm(ctrl.x0) / l0;
  const double re0n = inf_norm(plan.r_e0) / l0;
  const double er0 = inf_norm(sub(r, plan.r_e0)) / l0;
  plan.reference_error0 = er0;
  const double nR = inf_norm(ctrl.R_ref);
  const double nS = inf_norm(ctrl.S);
  const double s2d = s2.get_d();
  const double boot = std::max(
      {x0n, (nR * re0n + x0n) / wd, nS * re0n / s2d,
       nR * er0 / (wd * wd) + nR / wd * 0.5 / wd,
       nS * er0 / (s2d * wd) + nS / s2d * 0.5 / wd});
  plan.bootstrap_bound = 2 * boot;
  plan.q_required = std::max(plan.q_terms.max(), plan.bootstrap_bound);

  if (opt.q) {
    if (*opt.q < 2) throw InvalidOverride("q must be at least 2");
    plan.q = *opt.q;
    plan.q_overridden = true;
  } else {
    plan.q = pow2_above(plan.q_required);
  }

  // Smallest R with (2R + 1)/2 > X, i.e. R = floor(X - 1/2) + 1.
  const double X = std::max({inf_norm(C) * plan.C_e, 0.5 / wd, er0});
  Rational Xr;
  mpq_set_d(Xr.get_mpq_t(), X);
  BigInt R = floor_rational(Xr - Rational(1, 2)) + 1;
  if (R < 1) R = 1;
  if (opt.range_level) {
    if (*opt.range_level < 1) throw InvalidOverride("range_level must be >= 1");
    plan.range_level = *opt.range_level;
  } else {
    plan.range_level = R;
  }
  return plan;
}

}  // namespace hectl
