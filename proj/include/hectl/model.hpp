// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Plant (A, B, C) and pre-given controller (F, G, R, H, J, S, x0).

#ifndef HECTL_MODEL_HPP_
#define HECTL_MODEL_HPP_

#include "hectl/exactmat.hpp"

namespace hectl {

struct PlantModel {
  RationalMatrix A;  // n x n
  RationalMatrix B;  // n x w
  RationalMatrix C;  // v x n
  // Infinity-norm bound on the (unknown to the controller) initial state.
  Rational x_p0_bound = 0;

  std::size_t n() const { return A.rows(); }
  std::size_t w() const { return B.cols(); }
  std::size_t v() const { return C.rows(); }

  // Throws DimensionMismatch / Error.
  void validate() const;
};

struct ControllerModel {
  RationalMatrix F;      // n_x x n_x
  RationalMatrix G;      // n_x x v
  RationalMatrix R_ref;  // n_x x n_r
  RationalMatrix H;      // w x n_x
  RationalMatrix J;      // w x v
  RationalMatrix S;      // w x n_r
  RationalVector x0;     // n_x

  std::size_t n_x() const { return F.rows(); }
  std::size_t n_r() const { return R_ref.cols(); }

  void validate(const PlantModel& plant) const;
};

// [[A + BJC, BH], [GC, F]].
RationalMatrix block_closed_loop(const PlantModel& plant,
                                 const ControllerModel& ctrl);

}  // namespace hectl

#endif  // HECTL_MODEL_HPP_
