// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/model.hpp"

#include <string>

namespace hectl {
namespace {

void expect_shape(const RationalMatrix& m, std::size_t rows, std::size_t cols,
                  const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionMismatch(std::string(name) + " must be " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
  }
}

}  // namespace

void PlantModel::validate() const {
  if (n() == 0) throw DimensionMismatch("plant A must be nonempty");
  expect_shape(A, n(), n(), "A");
  if (w() == 0) throw DimensionMismatch("plant B must have at least one column");
  if (v() == 0) throw DimensionMismatch("plant C must have at least one row");
  expect_shape(B, n(), w(), "B");
  expect_shape(C, v(), n(), "C");
  if (x_p0_bound < 0) throw Error("x_p0_bound must be nonnegative");
}

void ControllerModel::validate(const PlantModel& plant) const {
  const std::size_t nx = n_x();
  expect_shape(F, nx, nx, "F");
  expect_shape(G, nx, plant.v(), "G");
  expect_shape(R_ref, nx, n_r(), "R");
  expect_shape(H, plant.w(), nx, "H");
  expect_shape(J, plant.w(), plant.v(), "J");
  expect_shape(S, plant.w(), n_r(), "S");
  if (x0.size() != nx) {
    throw DimensionMismatch("controller x0 must have " + std::to_string(nx) +
                            " entries");
  }
}

RationalMatrix block_closed_loop(const PlantModel& plant,
                                 const ControllerModel& ctrl) {
  plant.validate();
  ctrl.validate(plant);
  const RationalMatrix& A = plant.A;
  const RationalMatrix& B = plant.B;
  const RationalMatrix& C = plant.C;
  return block2x2(A + B * ctrl.J * C, B * ctrl.H, ctrl.G * C, ctrl.F);
}

}  // namespace hectl
