// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/quantizer.hpp"

#include <cmath>
#include <utility>

namespace hectl {

QuantizerSpec::QuantizerSpec(BigInt r) : range_level(std::move(r)) {
  if (range_level < 1) throw Error("quantizer range_level must be >= 1");
}

Quantized quantize_scalar(const Rational& chi, const QuantizerSpec& spec) {
  const Rational half(1, 2);
  // Saturation threshold (2R+1)/2 = R + 1/2.
  const Rational limit = Rational(spec.range_level) + half;
  if (abs(chi) >= limit) {
    return {chi > 0 ? spec.range_level : BigInt(-spec.range_level), true};
  }
  if (chi >= -half) return {floor_rational(chi + half), false};
  return {-floor_rational(-chi + half), false};
}

Quantized quantize_scalar(double chi, const QuantizerSpec& spec) {
  if (!std::isfinite(chi)) throw Error("quantize_scalar: input is not finite");
  Rational exact;
  mpq_set_d(exact.get_mpq_t(), chi);
  return quantize_scalar(exact, spec);
}

QuantizedVector quantize_vector(const RationalVector& x, const QuantizerSpec& spec) {
  QuantizedVector out;
  out.values.reserve(x.size());
  for (const auto& chi : x) {
    Quantized q = quantize_scalar(chi, spec);
    out.saturated = out.saturated || q.saturated;
    out.values.push_back(std::move(q.value));
  }
  return out;
}

QuantizedVector quantize_vector(std::span<const double> x, const QuantizerSpec& spec) {
  QuantizedVector out;
  out.values.reserve(x.size());
  for (const double chi : x) {
    Quantized q = quantize_scalar(chi, spec);
    out.saturated = out.saturated || q.saturated;
    out.values.push_back(std::move(q.value));
  }
  return out;
}

ScalingState::ScalingState(Rational l, Rational omega, std::uint64_t t)
    : l_(std::move(l)), omega_(std::move(omega)), t_(t) {
  if (l_ <= 0) throw Error("scaling state: l must be positive");
  if (omega_ <= 0 || omega_ >= 1) throw Error("scaling state: omega must lie in (0, 1)");
}

ScalingState advance_scaling(const ScalingState& s) {
  return ScalingState(s.l() * s.omega(), s.omega(), s.t() + 1);
}

}  // namespace hectl
