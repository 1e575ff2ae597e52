// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Additively homomorphic encryption over the message space Z_q^n.
//
// Two backends share one interface:
//   mock     carries the residue vector in the clear. Exact and fast; used
//            for long-horizon oracle runs.
//   lattice  a public-key LWE scheme with ciphertext modulus Q = q * Delta,
//            Delta = 2^delta_bits. Because Q is a multiple of q, Delta-scaled
//            sums wrap modulo q exactly, so the message space is Z_q itself.
//            Dimensions default to toy sizes; no security level is claimed.
//
// Lattice noise is tracked as a per-entry upper bound. decrypt() refuses to
// return a value once the bound reaches Delta/2.

#ifndef HECTL_HE_HPP_
#define HECTL_HE_HPP_

#include "hectl/exactmat.hpp"

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hectl {

class BadParams : public Error {
 public:
  using Error::Error;
};
class OutOfRange : public Error {
 public:
  using Error::Error;
};
class WrongKeyRole : public Error {
 public:
  using Error::Error;
};
class NoiseOverflow : public Error {
 public:
  using Error::Error;
};
class KeyMismatch : public Error {
 public:
  using Error::Error;
};

enum class Backend : std::uint8_t { mock = 0, lattice = 1 };

std::string to_string(Backend b);
Backend parse_backend(const std::string& name);

struct LatticeParams {
  std::size_t dimension = 16;    // secret length
  std::size_t pk_samples = 32;   // rows of the public matrix
  std::uint32_t noise_width = 4; // errors drawn uniformly from [-w, w]
  std::uint32_t delta_bits = 128;
  // Number of fresh-ciphertext additions the noise budget must absorb.
  std::uint64_t declared_adds = 0;
};

struct SchemeParams {
  BigInt q{2};
  Backend backend = Backend::mock;
  LatticeParams lattice;

  BigInt delta() const;
  BigInt ciphertext_modulus() const;
  // Worst-case noise of a fresh encryption.
  BigInt fresh_noise_bound() const;
  // Throws BadParams.
  void validate() const;
};

// Deterministic randomness source. Not thread-safe; use one per party.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  BigInt uniform(const BigInt& bound);  // [0, bound)
  long small(std::uint32_t width);      // [-width, width]
  bool bit();

 private:
  gmp_randclass state_;
};

struct KeyData;

enum class KeyRole { public_only, full };

class KeyMaterial {
 public:
  KeyRole role() const { return role_; }
  const SchemeParams& params() const { return *params_; }
  std::uint64_t key_id() const { return key_id_; }

 private:
  friend struct KeyAccess;
  KeyRole role_ = KeyRole::public_only;
  std::shared_ptr<const SchemeParams> params_;
  std::shared_ptr<const KeyData> data_;
  std::uint64_t key_id_ = 0;
};

struct KeyPair {
  KeyMaterial public_key;
  KeyMaterial secret_key;
};

class PlainVector {
 public:
  PlainVector() = default;
  // Throws OutOfRange unless every entry lies in [0, q).
  PlainVector(std::vector<BigInt> entries, const BigInt& q);
  // Reduces arbitrary integers into [0, q).
  static PlainVector reduce(const IntVector& values, const BigInt& q);

  std::size_t size() const { return entries_.size(); }
  const std::vector<BigInt>& entries() const { return entries_; }
  const BigInt& operator[](std::size_t i) const { return entries_[i]; }

  // JSON array of decimal integers (strings once they exceed 64 bits).
  std::string to_json() const;
  static PlainVector from_json(const std::string& text, const BigInt& q);

  friend bool operator==(const PlainVector&, const PlainVector&) = default;

 private:
  std::vector<BigInt> entries_;
};

class Ciphertext {
 public:
  Backend backend() const { return backend_; }
  std::size_t dimension() const { return body_.size(); }
  std::uint64_t adds() const { return adds_; }
  std::uint64_t plain_mults() const { return plain_mults_; }
  std::uint64_t key_id() const { return key_id_; }
  // Largest per-entry noise bound (0 for mock).
  BigInt noise_bound() const;

  // [u32 payload length][u8 backend tag][payload], little-endian.
  std::vector<std::uint8_t> serialize() const;
  static Ciphertext deserialize(std::span<const std::uint8_t> blob);

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;

 private:
  friend struct CiphertextAccess;
  Backend backend_ = Backend::mock;
  std::uint64_t key_id_ = 0;
  std::uint64_t adds_ = 0;
  std::uint64_t plain_mults_ = 0;
  std::size_t mask_dim_ = 0;
  std::vector<BigInt> body_;   // mock: residue; lattice: b
  std::vector<BigInt> mask_;   // lattice: a, row-major dimension x mask_dim
  std::vector<BigInt> noise_;  // lattice: per-entry noise bound
};

struct NoiseReport {
  bool unbounded = false;    // mock backend
  double remaining_bits = 0; // log2(Delta/2) - log2(noise bound)
  // Further fresh additions the noise budget can absorb.
  BigInt remaining_fresh_adds;
  bool decryptable = true;
};

KeyPair keygen(const SchemeParams& params, std::uint64_t seed);
Ciphertext encrypt(const KeyMaterial& pk, const PlainVector& v, Rng& rng);
// Throws WrongKeyRole, NoiseOverflow, KeyMismatch.
PlainVector decrypt(const KeyMaterial& sk, const Ciphertext& c);
Ciphertext add(const Ciphertext& c1, const Ciphertext& c2, const SchemeParams& params);
// m holds residues mod q; the lattice backend multiplies by centered
// representatives so noise grows with the smaller magnitude.
Ciphertext plain_matmul(const IntMatrix& m, const Ciphertext& c,
                        const SchemeParams& params);
NoiseReport noise_report(const Ciphertext& c, const SchemeParams& params);

}  // namespace hectl

#endif  // HECTL_HE_HPP_
