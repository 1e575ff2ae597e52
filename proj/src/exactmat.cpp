// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/exactmat.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <utility>

namespace hectl {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
}

BigInt parse_integer(std::string_view s, std::string_view whole) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) {
    throw ParseError("not a rational literal: '" + std::string(whole) + "'");
  }
  BigInt value(std::string(s), 10);
  return negative ? BigInt(-value) : value;
}

BigInt pow10(unsigned long k) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, k);
  return r;
}

Eigen::MatrixXd to_eigen(const RationalMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).get_d();
  }
  return out;
}

void require_same_shape(const RationalMatrix& a, const RationalMatrix& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw ParseError("empty rational literal");
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    BigInt num = parse_integer(trim(s.substr(0, slash)), s);
    std::string_view den_text = trim(s.substr(slash + 1));
    if (!all_digits(den_text)) {
      throw ParseError("bad denominator in '" + std::string(s) + "'");
    }
    BigInt den(std::string(den_text), 10);
    if (den == 0) throw ParseError("zero denominator in '" + std::string(s) + "'");
    Rational r(num, den);
    r.canonicalize();
    return r;
  }

  std::string_view body = s;
  long exponent = 0;
  if (const auto e = body.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_text = body.substr(e + 1);
    body = body.substr(0, e);
    bool neg = false;
    if (!exp_text.empty() && (exp_text.front() == '-' || exp_text.front() == '+')) {
      neg = exp_text.front() == '-';
      exp_text.remove_prefix(1);
    }
    if (!all_digits(exp_text) || exp_text.size() > 5) {
      throw ParseError("bad exponent in '" + std::string(s) + "'");
    }
    exponent = std::stol(std::string(exp_text));
    if (neg) exponent = -exponent;
  }
  bool negative = false;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  std::string digits;
  long frac_len = 0;
  if (const auto dot = body.find('.'); dot != std::string_view::npos) {
    std::string_view ip = body.substr(0, dot);
    std::string_view fp = body.substr(dot + 1);
    if ((ip.empty() && fp.empty()) || (!ip.empty() && !all_digits(ip)) ||
        (!fp.empty() && !all_digits(fp))) {
      throw ParseError("not a rational literal: '" + std::string(s) + "'");
    }
    digits = std::string(ip) + std::string(fp);
    frac_len = static_cast<long>(fp.size());
  } else {
    if (!all_digits(body)) {
      throw ParseError("not a rational literal: '" + std::string(s) + "'");
    }
    digits = std::string(body);
  }
  BigInt num(digits, 10);
  if (negative) num = -num;
  const long shift = exponent - frac_len;
  Rational r;
  if (shift >= 0) {
    r = Rational(num * pow10(static_cast<unsigned long>(shift)));
  } else {
    r = Rational(num, pow10(static_cast<unsigned long>(-shift)));
  }
  r.canonicalize();
  return r;
}

std::string to_string(const Rational& value) {
  if (value.get_den() == 1) return value.get_num().get_str();
  return value.get_num().get_str() + "/" + value.get_den().get_str();
}

BigInt floor_rational(const Rational& value) {
  BigInt r;
  mpz_fdiv_q(r.get_mpz_t(), value.get_num_mpz_t(), value.get_den_mpz_t());
  return r;
}

BigInt ceil_rational(const Rational& value) {
  BigInt r;
  mpz_cdiv_q(r.get_mpz_t(), value.get_num_mpz_t(), value.get_den_mpz_t());
  return r;
}

double log2_big(const BigInt& value) {
  if (value == 0) return -std::numeric_limits<double>::infinity();
  long exp = 0;
  const double mant = mpz_get_d_2exp(&exp, value.get_mpz_t());
  return std::log2(std::fabs(mant)) + static_cast<double>(exp);
}

double log2_abs(const Rational& value) {
  if (value == 0) return -std::numeric_limits<double>::infinity();
  return log2_big(value.get_num()) - log2_big(value.get_den());
}

// ---------------------------------------------------------------- IntMatrix

IntMatrix::IntMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols) {}

IntMatrix::IntMatrix(std::size_t rows, std::size_t cols,
                     std::vector<BigInt> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows * cols) {
    throw DimensionMismatch("IntMatrix: entry count does not match shape");
  }
}

IntMatrix IntMatrix::mod(const BigInt& q) const {
  IntMatrix out(rows_, cols_);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    mpz_fdiv_r(out.entries_[k].get_mpz_t(), entries_[k].get_mpz_t(),
               q.get_mpz_t());
  }
  return out;
}

IntMatrix IntMatrix::operator-() const {
  IntMatrix out(rows_, cols_);
  for (std::size_t k = 0; k < entries_.size(); ++k) out.entries_[k] = -entries_[k];
  return out;
}

IntVector multiply(const IntMatrix& m, const IntVector& v) {
  if (m.cols() != v.size()) throw DimensionMismatch("multiply: shape mismatch");
  IntVector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m(i, j) * v[j];
  }
  return out;
}

// ----------------------------------------------------------- RationalMatrix

RationalMatrix::RationalMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols) {}

RationalMatrix::RationalMatrix(std::size_t rows, std::size_t cols,
                               std::vector<Rational> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows * cols) {
    throw DimensionMismatch("RationalMatrix: entry count does not match shape");
  }
  for (auto& e : entries_) e.canonicalize();
}

RationalMatrix::RationalMatrix(
    std::initializer_list<std::initializer_list<std::string_view>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  entries_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw DimensionMismatch("ragged matrix literal");
    for (const auto& cell : row) entries_.push_back(parse_rational(cell));
  }
}

RationalMatrix RationalMatrix::identity(std::size_t n) {
  RationalMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1;
  return out;
}

RationalMatrix RationalMatrix::column(const RationalVector& v) {
  return RationalMatrix(v.size(), 1, v);
}

RationalMatrix RationalMatrix::from_int(const IntMatrix& m) {
  std::vector<Rational> e(m.entries().begin(), m.entries().end());
  return RationalMatrix(m.rows(), m.cols(), std::move(e));
}

bool RationalMatrix::is_zero() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const Rational& e) { return e == 0; });
}

RationalMatrix RationalMatrix::transpose() const {
  RationalMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  }
  return out;
}

RationalMatrix RationalMatrix::pow(unsigned k) const {
  if (!square()) throw NonSquare("pow: matrix is not square");
  RationalMatrix result = identity(rows_);
  RationalMatrix base = *this;
  while (k > 0) {
    if (k & 1U) result = result * base;
    k >>= 1U;
    if (k > 0) base = base * base;
  }
  return result;
}

RationalMatrix RationalMatrix::inverse() const {
  if (!square()) throw NonSquare("inverse: matrix is not square");
  const std::size_t n = rows_;
  RationalMatrix a = *this;
  RationalMatrix inv = identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a(pivot, col) == 0) ++pivot;
    if (pivot == n) throw Error("inverse: matrix is singular");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(pivot, j), a(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const Rational p = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= p;
      inv(col, j) /= p;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col || a(i, col) == 0) continue;
      const Rational f = a(i, col);
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) -= f * a(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

std::size_t RationalMatrix::rank() const {
  RationalMatrix a = *this;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < cols_ && rank < rows_; ++col) {
    std::size_t pivot = rank;
    while (pivot < rows_ && a(pivot, col) == 0) ++pivot;
    if (pivot == rows_) continue;
    for (std::size_t j = 0; j < cols_; ++j) std::swap(a(pivot, j), a(rank, j));
    for (std::size_t i = rank + 1; i < rows_; ++i) {
      if (a(i, col) == 0) continue;
      const Rational f = a(i, col) / a(rank, col);
      for (std::size_t j = col; j < cols_; ++j) a(i, j) -= f * a(rank, j);
    }
    ++rank;
  }
  return rank;
}

std::vector<double> RationalMatrix::to_double() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.get_d());
  return out;
}

RationalMatrix RationalMatrix::operator-() const {
  RationalMatrix out = *this;
  for (auto& e : out.entries_) e = -e;
  return out;
}

RationalMatrix& RationalMatrix::operator+=(const RationalMatrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
  return *this;
}

RationalMatrix& RationalMatrix::operator-=(const RationalMatrix& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= other.entries_[k];
  return *this;
}

RationalMatrix& RationalMatrix::operator*=(const Rational& scalar) {
  for (auto& e : entries_) e *= scalar;
  return *this;
}

RationalMatrix& RationalMatrix::operator/=(const Rational& scalar) {
  if (scalar == 0) throw Error("division by zero");
  for (auto& e : entries_) e /= scalar;
  return *this;
}

RationalMatrix operator+(RationalMatrix a, const RationalMatrix& b) {
  return a += b;
}
RationalMatrix operator-(RationalMatrix a, const RationalMatrix& b) {
  return a -= b;
}
RationalMatrix operator*(RationalMatrix a, const Rational& s) { return a *= s; }
RationalMatrix operator*(const Rational& s, RationalMatrix a) { return a *= s; }
RationalMatrix operator/(RationalMatrix a, const Rational& s) { return a /= s; }

RationalMatrix operator*(const RationalMatrix& a, const RationalMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: shape mismatch");
  RationalMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Rational& aik = a(i, k);
      if (aik == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

RationalVector operator*(const RationalMatrix& a, const RationalVector& v) {
  if (a.cols() != v.size()) throw DimensionMismatch("matvec: shape mismatch");
  RationalVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0) out[i] += a(i, j) * v[j];
    }
  }
  return out;
}

RationalVector add(const RationalVector& a, const RationalVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector add: size mismatch");
  RationalVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

RationalVector sub(const RationalVector& a, const RationalVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector sub: size mismatch");
  RationalVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

RationalVector scale(const RationalVector& a, const Rational& s) {
  RationalVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

RationalVector to_rational(const IntVector& v) {
  return RationalVector(v.begin(), v.end());
}

RationalMatrix hstack(const RationalMatrix& a, const RationalMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("hstack: row mismatch");
  RationalMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

RationalMatrix vstack(const RationalMatrix& a, const RationalMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("vstack: column mismatch");
  RationalMatrix out(a.rows() + b.rows(), a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i) out(a.rows() + i, j) = b(i, j);
  }
  return out;
}

RationalMatrix block2x2(const RationalMatrix& a, const RationalMatrix& b,
                        const RationalMatrix& c, const RationalMatrix& d) {
  return vstack(hstack(a, b), hstack(c, d));
}

// ------------------------------------------------------------- integrality

std::optional<Rational> rational_gcd(const std::vector<Rational>& values) {
  BigInt num_gcd = 0;
  BigInt den_lcm = 1;
  bool any = false;
  for (const auto& v : values) {
    if (v == 0) continue;
    any = true;
    mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), v.get_num_mpz_t());
    mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), v.get_den_mpz_t());
  }
  if (!any) return std::nullopt;
  Rational g(num_gcd, den_lcm);
  g.canonicalize();
  return g;
}

std::optional<Rational> rational_gcd(const RationalMatrix& m) {
  return rational_gcd(m.entries());
}

Rational max_integer_scale(const RationalMatrix& m) {
  const auto g = rational_gcd(m);
  if (!g) throw ZeroMatrix("max_integer_scale: matrix has no nonzero entry");
  if (*g <= 1) return *g;
  // Largest g/k with k a positive integer that does not exceed 1.
  BigInt k = g->get_num() / g->get_den();
  if (k * g->get_den() != g->get_num()) k += 1;
  return *g / Rational(k);
}

bool IntegralityCertificate::reproduces(const RationalMatrix& source_matrix) const {
  if (source_matrix.rows() != scaled.rows() ||
      source_matrix.cols() != scaled.cols()) {
    return false;
  }
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    for (std::size_t j = 0; j < scaled.cols(); ++j) {
      if (Rational(scaled(i, j)) * scale != source_matrix(i, j)) return false;
    }
  }
  return true;
}

std::optional<IntegralityCertificate> integer_after_scale(
    const RationalMatrix& m, const Rational& a, std::string source) {
  if (a <= 0) throw Error("integer_after_scale: scale must be positive");
  IntMatrix scaled(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const Rational q = m(i, j) / a;
      if (q.get_den() != 1) return std::nullopt;
      scaled(i, j) = q.get_num();
    }
  }
  return IntegralityCertificate{a, std::move(scaled), std::move(source)};
}

bool is_integer_after_scale(const RationalMatrix& m, const Rational& a) {
  return integer_after_scale(m, a).has_value();
}

// ------------------------------------------------------------------ norms

Rational inf_norm_exact(const RationalMatrix& m) {
  Rational best = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Rational row = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) row += abs(m(i, j));
    if (row > best) best = row;
  }
  return best;
}

double inf_norm(const RationalMatrix& m) { return inf_norm_exact(m).get_d(); }

Rational inf_norm_exact(const RationalVector& v) {
  Rational best = 0;
  for (const auto& e : v) {
    if (abs(e) > best) best = abs(e);
  }
  return best;
}

double inf_norm(const RationalVector& v) { return inf_norm_exact(v).get_d(); }

BigInt inf_norm(const IntVector& v) {
  BigInt best = 0;
  for (const auto& e : v) {
    if (abs(e) > best) best = abs(e);
  }
  return best;
}

double norm2(const RationalMatrix& m) {
  if (m.empty()) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  return svd.singularValues()(0);
}

double spectral_radius(const RationalMatrix& m) {
  if (!m.square()) throw NonSquare("spectral_radius: matrix is not square");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(m), false);
  if (solver.info() != Eigen::Success) {
    throw Error("spectral_radius: eigenvalue iteration did not converge");
  }
  double rho = 0.0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    rho = std::max(rho, std::abs(solver.eigenvalues()(k)));
  }
  return rho;
}

}  // namespace hectl
