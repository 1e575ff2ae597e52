// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exact rational matrices over GMP, plus the handful of floating-point
// summaries (norms, spectral radius) the planner needs.

#ifndef HECTL_EXACTMAT_HPP_
#define HECTL_EXACTMAT_HPP_

#include <gmpxx.h>

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hectl {

using BigInt = mpz_class;
using Rational = mpq_class;
using RationalVector = std::vector<Rational>;
using IntVector = std::vector<BigInt>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonSquare : public Error {
 public:
  using Error::Error;
};

class ZeroMatrix : public Error {
 public:
  using Error::Error;
};

// Accepts "12", "-0.26", "1.5e-3", "-7/20". Decimal input is converted
// exactly, never through a binary float.
Rational parse_rational(std::string_view text);

// Canonical "p/q" form, or "p" when the denominator is 1.
std::string to_string(const Rational& value);

// Floor and ceiling of a rational as big integers.
BigInt floor_rational(const Rational& value);
BigInt ceil_rational(const Rational& value);

// Exact log2 for a positive big integer, accurate to double precision even
// beyond the double range.
double log2_big(const BigInt& value);
double log2_abs(const Rational& value);

class IntMatrix {
 public:
  IntMatrix() = default;
  IntMatrix(std::size_t rows, std::size_t cols);
  IntMatrix(std::size_t rows, std::size_t cols, std::vector<BigInt> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const BigInt& operator()(std::size_t i, std::size_t j) const {
    return entries_[i * cols_ + j];
  }
  BigInt& operator()(std::size_t i, std::size_t j) {
    return entries_[i * cols_ + j];
  }
  const std::vector<BigInt>& entries() const { return entries_; }

  // Canonical residues in [0, q).
  IntMatrix mod(const BigInt& q) const;
  IntMatrix operator-() const;

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<BigInt> entries_;
};

IntVector multiply(const IntMatrix& m, const IntVector& v);

class RationalMatrix {
 public:
  RationalMatrix() = default;
  RationalMatrix(std::size_t rows, std::size_t cols);
  RationalMatrix(std::size_t rows, std::size_t cols,
                 std::vector<Rational> entries);
  // Row-major literal with string entries, e.g. {{"1.18", "0"}, {"-1/2", "3"}}.
  RationalMatrix(
      std::initializer_list<std::initializer_list<std::string_view>> rows);

  static RationalMatrix identity(std::size_t n);
  static RationalMatrix column(const RationalVector& v);
  static RationalMatrix from_int(const IntMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  bool is_zero() const;

  const Rational& operator()(std::size_t i, std::size_t j) const {
    return entries_[i * cols_ + j];
  }
  Rational& operator()(std::size_t i, std::size_t j) {
    return entries_[i * cols_ + j];
  }
  const std::vector<Rational>& entries() const { return entries_; }

  RationalMatrix transpose() const;
  RationalMatrix pow(unsigned k) const;
  // Gauss-Jordan inverse; throws Error on a singular matrix.
  RationalMatrix inverse() const;
  std::size_t rank() const;
  std::vector<double> to_double() const;

  RationalMatrix operator-() const;
  RationalMatrix& operator+=(const RationalMatrix& other);
  RationalMatrix& operator-=(const RationalMatrix& other);
  RationalMatrix& operator*=(const Rational& scalar);
  RationalMatrix& operator/=(const Rational& scalar);

  friend bool operator==(const RationalMatrix&, const RationalMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Rational> entries_;
};

RationalMatrix operator+(RationalMatrix a, const RationalMatrix& b);
RationalMatrix operator-(RationalMatrix a, const RationalMatrix& b);
RationalMatrix operator*(const RationalMatrix& a, const RationalMatrix& b);
RationalMatrix operator*(RationalMatrix a, const Rational& s);
RationalMatrix operator*(const Rational& s, RationalMatrix a);
RationalMatrix operator/(RationalMatrix a, const Rational& s);
RationalVector operator*(const RationalMatrix& a, const RationalVector& v);

RationalVector add(const RationalVector& a, const RationalVector& b);
RationalVector sub(const RationalVector& a, const RationalVector& b);
RationalVector scale(const RationalVector& a, const Rational& s);
RationalVector to_rational(const IntVector& v);

RationalMatrix hstack(const RationalMatrix& a, const RationalMatrix& b);
RationalMatrix vstack(const RationalMatrix& a, const RationalMatrix& b);
RationalMatrix block2x2(const RationalMatrix& a, const RationalMatrix& b,
                        const RationalMatrix& c, const RationalMatrix& d);

// Rational gcd of the nonzero entries: gcd(numerators) / lcm(denominators).
// Returns nullopt when every entry is zero.
std::optional<Rational> rational_gcd(const std::vector<Rational>& values);
std::optional<Rational> rational_gcd(const RationalMatrix& m);

// Largest a in (0, 1] with m / a integer. Throws ZeroMatrix.
Rational max_integer_scale(const RationalMatrix& m);

struct IntegralityCertificate {
  Rational scale;
  IntMatrix scaled;
  std::string source;

  // Exact check that scale * scaled reproduces the source matrix.
  bool reproduces(const RationalMatrix& source_matrix) const;
};

// Certificate when every entry of m / a is an integer, nullopt otherwise.
std::optional<IntegralityCertificate> integer_after_scale(
    const RationalMatrix& m, const Rational& a, std::string source = {});
bool is_integer_after_scale(const RationalMatrix& m, const Rational& a);

// Max absolute row sum. The exact variant is used wherever the result feeds
// a bound that must not round down.
Rational inf_norm_exact(const RationalMatrix& m);
double inf_norm(const RationalMatrix& m);
Rational inf_norm_exact(const RationalVector& v);
double inf_norm(const RationalVector& v);
BigInt inf_norm(const IntVector& v);
// Spectral norm (largest singular value), in double precision.
double norm2(const RationalMatrix& m);

// Largest eigenvalue modulus, computed in double precision.
double spectral_radius(const RationalMatrix& m);

}  // namespace hectl

#endif  // HECTL_EXACTMAT_HPP_
