// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Mid-tread saturating quantizer and the zoom sequence l(t+1) = omega l(t).
//
// For chi >= -1/2 the quantizer returns psi with (2psi-1)/2 <= chi < (2psi+1)/2;
// for chi < -1/2 it mirrors, q(chi) = -q(-chi). The tie chi = -1/2 maps to 0.
// Inputs with |chi| >= (2R+1)/2 clamp to +-R and raise the saturation flag.

#ifndef HECTL_QUANTIZER_HPP_
#define HECTL_QUANTIZER_HPP_

#include "hectl/exactmat.hpp"

#include <cstdint>
#include <span>

namespace hectl {

struct QuantizerSpec {
  BigInt range_level = 1;

  explicit QuantizerSpec(BigInt r = 1);
};

struct Quantized {
  BigInt value;
  bool saturated = false;
};

struct QuantizedVector {
  IntVector values;
  bool saturated = false;
};

Quantized quantize_scalar(const Rational& chi, const QuantizerSpec& spec);
// The double is converted exactly to a rational first. Throws on non-finite.
Quantized quantize_scalar(double chi, const QuantizerSpec& spec);

QuantizedVector quantize_vector(const RationalVector& x, const QuantizerSpec& spec);
QuantizedVector quantize_vector(std::span<const double> x, const QuantizerSpec& spec);

class ScalingState {
 public:
  // Throws Error unless l > 0 and 0 < omega < 1.
  ScalingState(Rational l, Rational omega, std::uint64_t t = 0);

  const Rational& l() const { return l_; }
  const Rational& omega() const { return omega_; }
  std::uint64_t t() const { return t_; }

 private:
  Rational l_;
  Rational omega_;
  std::uint64_t t_;
};

ScalingState advance_scaling(const ScalingState& s);

}  // namespace hectl

#endif  // HECTL_QUANTIZER_HPP_
