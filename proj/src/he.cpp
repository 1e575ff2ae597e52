// Copyright 2026 The hectl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "hectl/he.hpp"

#include "json.hpp"

#include <limits>
#include <utility>

namespace hectl {

struct KeyData {
  std::size_t dim = 0;
  std::size_t samples = 0;
  std::vector<BigInt> pk_a;  // samples x dim
  std::vector<BigInt> pk_b;  // samples
  std::vector<BigInt> sk;    // dim, empty in a public-only handle
};

struct KeyAccess {
  static KeyMaterial make(KeyRole role, std::shared_ptr<const SchemeParams> params,
                          std::shared_ptr<const KeyData> data, std::uint64_t id) {
    KeyMaterial k;
    k.role_ = role;
    k.params_ = std::move(params);
    k.data_ = std::move(data);
    k.key_id_ = id;
    return k;
  }
  static const KeyData* data(const KeyMaterial& k) { return k.data_.get(); }
  static bool valid(const KeyMaterial& k) { return k.params_ != nullptr; }
};

struct CiphertextAccess {
  static Ciphertext& mut(Ciphertext& c) { return c; }
  static Backend& backend(Ciphertext& c) { return c.backend_; }
  static std::uint64_t& key_id(Ciphertext& c) { return c.key_id_; }
  static std::uint64_t& adds(Ciphertext& c) { return c.adds_; }
  static std::uint64_t& plain_mults(Ciphertext& c) { return c.plain_mults_; }
  static std::size_t& mask_dim(Ciphertext& c) { return c.mask_dim_; }
  static std::vector<BigInt>& body(Ciphertext& c) { return c.body_; }
  static std::vector<BigInt>& mask(Ciphertext& c) { return c.mask_; }
  static std::vector<BigInt>& noise(Ciphertext& c) { return c.noise_; }
  static const std::vector<BigInt>& body(const Ciphertext& c) { return c.body_; }
  static const std::vector<BigInt>& mask(const Ciphertext& c) { return c.mask_; }
  static const std::vector<BigInt>& noise(const Ciphertext& c) { return c.noise_; }
  static std::size_t mask_dim(const Ciphertext& c) { return c.mask_dim_; }
};

namespace {

using CA = CiphertextAccess;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

BigInt mod_positive(const BigInt& x, const BigInt& m) {
  BigInt r;
  mpz_fdiv_r(r.get_mpz_t(), x.get_mpz_t(), m.get_mpz_t());
  return r;
}

void check_compatible(const Ciphertext& a, const Ciphertext& b) {
  if (a.backend() != b.backend()) throw BadParams("ciphertexts use different backends");
  if (a.key_id() != b.key_id()) throw KeyMismatch("ciphertexts under different keys");
  if (a.dimension() != b.dimension()) throw DimensionMismatch("ciphertext dimensions differ");
}

void check_budget(const std::vector<BigInt>& noise, const SchemeParams& p) {
  const BigInt half = p.delta() / 2;
  for (const auto& e : noise) {
    if (e >= half) throw NoiseOverflow("lattice noise bound exceeds Delta/2");
  }
}

// ---- little-endian byte helpers for serialization

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_big(std::vector<std::uint8_t>& out, const BigInt& v) {
  if (v < 0) throw Error("serialize: negative integer in ciphertext");
  std::size_t count = 0;
  std::vector<std::uint8_t> bytes((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8 + 1);
  mpz_export(bytes.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  put_u32(out, static_cast<std::uint32_t>(count));
  out.insert(out.end(), bytes.begin(), bytes.begin() + static_cast<long>(count));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  BigInt big() {
    const std::uint32_t len = u32();
    need(len);
    BigInt v;
    if (len > 0) mpz_import(v.get_mpz_t(), len, 1, 1, 1, 0, data_.data() + pos_);
    pos_ += len;
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > data_.size()) throw Error("deserialize: truncated ciphertext blob");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(Backend b) { return b == Backend::mock ? "mock" : "lattice"; }

Backend parse_backend(const std::string& name) {
  if (name == "mock") return Backend::mock;
  if (name == "lattice") return Backend::lattice;
  throw BadParams("unknown backend '" + name + "'");
}

// ------------------------------------------------------------ parameters

BigInt SchemeParams::delta() const {
  if (backend == Backend::mock) return BigInt(1);
  BigInt d;
  mpz_ui_pow_ui(d.get_mpz_t(), 2, lattice.delta_bits);
  return d;
}

BigInt SchemeParams::ciphertext_modulus() const { return q * delta(); }

BigInt SchemeParams::fresh_noise_bound() const {
  if (backend == Backend::mock) return BigInt(0);
  return BigInt(static_cast<unsigned long>(lattice.noise_width)) *
         BigInt(static_cast<unsigned long>(lattice.pk_samples + 1));
}

void SchemeParams::validate() const {
  if (q < 2) throw BadParams("q must be at least 2");
  if (backend == Backend::mock) return;
  if (lattice.dimension == 0 || lattice.pk_samples == 0) {
    throw BadParams("lattice dimension and sample count must be positive");
  }
  if (lattice.delta_bits < 2) throw BadParams("delta_bits must be at least 2");
  const BigInt half = delta() / 2;
  const BigInt need =
      fresh_noise_bound() * BigInt(std::to_string(lattice.declared_adds + 1), 10);
  if (need >= half) {
    throw BadParams("noise budget too small: " + std::to_string(lattice.declared_adds) +
                    " declared additions exceed Delta/2");
  }
}

// ------------------------------------------------------------------- Rng

Rng::Rng(std::uint64_t seed) : state_(gmp_randinit_mt) {
  state_.seed(BigInt(std::to_string(seed), 10));
}

BigInt Rng::uniform(const BigInt& bound) { return state_.get_z_range(bound); }

long Rng::small(std::uint32_t width) {
  const BigInt r = state_.get_z_range(BigInt(2UL * width + 1));
  return static_cast<long>(r.get_si()) - static_cast<long>(width);
}

bool Rng::bit() { return state_.get_z_bits(1) != 0; }

// ----------------------------------------------------------- PlainVector

PlainVector::PlainVector(std::vector<BigInt> entries, const BigInt& q)
    : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e < 0 || e >= q) throw OutOfRange("plaintext entry outside [0, q)");
  }
}

PlainVector PlainVector::reduce(const IntVector& values, const BigInt& q) {
  std::vector<BigInt> r;
  r.reserve(values.size());
  for (const auto& v : values) r.push_back(mod_positive(v, q));
  return PlainVector(std::move(r), q);
}

std::string PlainVector::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries_) {
    if (e.fits_ulong_p() && sizeof(unsigned long) >= 8) {
      arr.push_back(static_cast<std::uint64_t>(e.get_ui()));
    } else {
      arr.push_back(e.get_str());
    }
  }
  return arr.dump();
}

PlainVector PlainVector::from_json(const std::string& text, const BigInt& q) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_array()) throw Error("plain vector JSON must be an array");
  std::vector<BigInt> out;
  for (const auto& e : j) {
    if (e.is_number_unsigned()) {
      out.emplace_back(std::to_string(e.get<std::uint64_t>()), 10);
    } else if (e.is_string()) {
      out.emplace_back(e.get<std::string>(), 10);
    } else {
      throw Error("plain vector entries must be nonnegative integers");
    }
  }
  return PlainVector(std::move(out), q);
}

// ------------------------------------------------------------ Ciphertext

BigInt Ciphertext::noise_bound() const {
  BigInt m = 0;
  for (const auto& e : noise_) {
    if (e > m) m = e;
  }
  return m;
}

std::vector<std::uint8_t> Ciphertext::serialize() const {
  std::vector<std::uint8_t> payload;
  put_u64(payload, key_id_);
  put_u64(payload, adds_);
  put_u64(payload, plain_mults_);
  put_u32(payload, static_cast<std::uint32_t>(body_.size()));
  put_u32(payload, static_cast<std::uint32_t>(mask_dim_));
  for (const auto& v : body_) put_big(payload, v);
  for (const auto& v : mask_) put_big(payload, v);
  for (const auto& v : noise_) put_big(payload, v);

  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(payload.size() + 1));
  out.push_back(static_cast<std::uint8_t>(backend_));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Ciphertext Ciphertext::deserialize(std::span<const std::uint8_t> blob) {
  Reader r(blob);
  const std::uint32_t len = r.u32();
  if (static_cast<std::size_t>(len) + 4 != blob.size()) {
    throw Error("deserialize: length prefix does not match blob size");
  }
  Ciphertext c;
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Backend::lattice)) {
    throw Error("deserialize: unknown backend tag");
  }
  c.backend_ = static_cast<Backend>(tag);
  c.key_id_ = r.u64();
  c.adds_ = r.u64();
  c.plain_mults_ = r.u64();
  const std::uint32_t dim = r.u32();
  c.mask_dim_ = r.u32();
  if (c.backend_ == Backend::mock && c.mask_dim_ != 0) {
    throw Error("deserialize: mock ciphertext with a mask");
  }
  for (std::uint32_t i = 0; i < dim; ++i) c.body_.push_back(r.big());
  for (std::size_t i = 0; i < static_cast<std::size_t>(dim) * c.mask_dim_; ++i) {
    c.mask_.push_back(r.big());
  }
  if (c.backend_ == Backend::lattice) {
    for (std::uint32_t i = 0; i < dim; ++i) c.noise_.push_back(r.big());
  }
  if (!r.done()) throw Error("deserialize: trailing bytes in ciphertext blob");
  return c;
}

// ------------------------------------------------------------ operations

KeyPair keygen(const SchemeParams& params, std::uint64_t seed) {
  params.validate();
  auto shared = std::make_shared<const SchemeParams>(params);
  const std::uint64_t id =
      splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(params.backend) + 1));
  if (params.backend == Backend::mock) {
    return {KeyAccess::make(KeyRole::public_only, shared, nullptr, id),
            KeyAccess::make(KeyRole::full, shared, nullptr, id)};
  }
  Rng rng(seed);
  const BigInt Q = params.ciphertext_modulus();
  const std::size_t d = params.lattice.dimension;
  const std::size_t m = params.lattice.pk_samples;
  auto full = std::make_shared<KeyData>();
  full->dim = d;
  full->samples = m;
  full->sk.resize(d);
  for (auto& s : full->sk) s = rng.uniform(Q);
  full->pk_a.resize(m * d);
  full->pk_b.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    BigInt acc = rng.small(params.lattice.noise_width);
    for (std::size_t j = 0; j < d; ++j) {
      BigInt& a = full->pk_a[i * d + j];
      a = rng.uniform(Q);
      acc += a * full->sk[j];
    }
    full->pk_b[i] = mod_positive(acc, Q);
  }
  auto pub = std::make_shared<KeyData>(*full);
  pub->sk.clear();
  return {KeyAccess::make(KeyRole::public_only, shared, pub, id),
          KeyAccess::make(KeyRole::full, shared, full, id)};
}

Ciphertext encrypt(const KeyMaterial& pk, const PlainVector& v, Rng& rng) {
  if (!KeyAccess::valid(pk)) throw BadParams("encrypt: empty key handle");
  const SchemeParams& p = pk.params();
  for (const auto& e : v.entries()) {
    if (e < 0 || e >= p.q) throw OutOfRange("encrypt: plaintext entry outside [0, q)");
  }
  Ciphertext c;
  CA::backend(c) = p.backend;
  CA::key_id(c) = pk.key_id();
  if (p.backend == Backend::mock) {
    CA::body(c) = v.entries();
    return c;
  }
  const KeyData& k = *KeyAccess::data(pk);
  const BigInt Q = p.ciphertext_modulus();
  const BigInt delta = p.delta();
  const std::size_t d = k.dim;
  CA::mask_dim(c) = d;
  auto& body = CA::body(c);
  auto& mask = CA::mask(c);
  auto& noise = CA::noise(c);
  body.resize(v.size());
  mask.assign(v.size() * d, BigInt(0));
  noise.assign(v.size(), p.fresh_noise_bound());
  for (std::size_t i = 0; i < v.size(); ++i) {
    BigInt b = rng.small(p.lattice.noise_width);
    b += delta * v[i];
    for (std::size_t s = 0; s < k.samples; ++s) {
      if (!rng.bit()) continue;
      for (std::size_t j = 0; j < d; ++j) mask[i * d + j] += k.pk_a[s * d + j];
      b += k.pk_b[s];
    }
    for (std::size_t j = 0; j < d; ++j) mask[i * d + j] = mod_positive(mask[i * d + j], Q);
    body[i] = mod_positive(b, Q);
  }
  return c;
}

PlainVector decrypt(const KeyMaterial& sk, const Ciphertext& c) {
  if (!KeyAccess::valid(sk)) throw BadParams("decrypt: empty key handle");
  if (sk.role() != KeyRole::full) throw WrongKeyRole("decrypt requires a full key");
  if (sk.key_id() != c.key_id()) throw KeyMismatch("ciphertext was made under another key");
  const SchemeParams& p = sk.params();
  if (c.backend() != p.backend) throw BadParams("decrypt: backend mismatch");
  if (p.backend == Backend::mock) return PlainVector(CA::body(c), p.q);

  check_budget(CA::noise(c), p);
  const KeyData& k = *KeyAccess::data(sk);
  const BigInt Q = p.ciphertext_modulus();
  const BigInt delta = p.delta();
  const BigInt half = delta / 2;
  const std::size_t d = CA::mask_dim(c);
  std::vector<BigInt> out(c.dimension());
  for (std::size_t i = 0; i < c.dimension(); ++i) {
    BigInt phase = CA::body(c)[i];
    for (std::size_t j = 0; j < d; ++j) phase -= CA::mask(c)[i * d + j] * k.sk[j];
    phase = mod_positive(phase, Q);
    BigInt m;
    mpz_fdiv_q(m.get_mpz_t(), BigInt(phase + half).get_mpz_t(), delta.get_mpz_t());
    out[i] = mod_positive(m, p.q);
  }
  return PlainVector(std::move(out), p.q);
}

Ciphertext add(const Ciphertext& c1, const Ciphertext& c2, const SchemeParams& p) {
  check_compatible(c1, c2);
  Ciphertext c = c1;
  CA::adds(c) = c1.adds() + c2.adds() + 1;
  CA::plain_mults(c) = c1.plain_mults() + c2.plain_mults();
  const BigInt modulus = p.backend == Backend::mock ? p.q : p.ciphertext_modulus();
  auto& body = CA::body(c);
  for (std::size_t i = 0; i < body.size(); ++i) {
    body[i] = mod_positive(body[i] + CA::body(c2)[i], modulus);
  }
  if (p.backend == Backend::lattice) {
    auto& mask = CA::mask(c);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = mod_positive(mask[i] + CA::mask(c2)[i], modulus);
    }
    auto& noise = CA::noise(c);
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += CA::noise(c2)[i];
    check_budget(noise, p);
  }
  return c;
}

Ciphertext plain_matmul(const IntMatrix& m, const Ciphertext& c, const SchemeParams& p) {
  if (m.cols() != c.dimension()) throw DimensionMismatch("plain_matmul: shape mismatch");
  Ciphertext out;
  CA::backend(out) = c.backend();
  CA::key_id(out) = c.key_id();
  CA::adds(out) = c.adds();
  CA::plain_mults(out) = c.plain_mults() + 1;
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  if (p.backend == Backend::mock) {
    std::vector<BigInt> body(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      BigInt acc = 0;
      for (std::size_t j = 0; j < cols; ++j) acc += m(i, j) * CA::body(c)[j];
      body[i] = mod_positive(acc, p.q);
    }
    CA::body(out) = std::move(body);
    return out;
  }

  const BigInt Q = p.ciphertext_modulus();
  const BigInt half_q = p.q / 2;
  const std::size_t d = CA::mask_dim(c);
  CA::mask_dim(out) = d;
  std::vector<BigInt> body(rows), mask(rows * d), noise(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      BigInt coef = mod_positive(m(i, j), p.q);
      if (coef > half_q) coef -= p.q;
      if (coef == 0) continue;
      body[i] += coef * CA::body(c)[j];
      for (std::size_t k = 0; k < d; ++k) mask[i * d + k] += coef * CA::mask(c)[j * d + k];
      noise[i] += abs(coef) * CA::noise(c)[j];
    }
    body[i] = mod_positive(body[i], Q);
    for (std::size_t k = 0; k < d; ++k) mask[i * d + k] = mod_positive(mask[i * d + k], Q);
  }
  check_budget(noise, p);
  CA::body(out) = std::move(body);
  CA::mask(out) = std::move(mask);
  CA::noise(out) = std::move(noise);
  return out;
}

NoiseReport noise_report(const Ciphertext& c, const SchemeParams& p) {
  NoiseReport r;
  if (c.backend() == Backend::mock) {
    r.unbounded = true;
    r.remaining_bits = std::numeric_limits<double>::infinity();
    return r;
  }
  const BigInt half = p.delta() / 2;
  const BigInt bound = c.noise_bound();
  r.decryptable = bound < half;
  r.remaining_bits = log2_big(half) - (bound > 0 ? log2_big(bound) : 0.0);
  const BigInt fresh = p.fresh_noise_bound();
  if (r.decryptable && fresh > 0) {
    r.remaining_fresh_adds = (half - 1 - bound) / fresh;
  }
  return r;
}

}  // namespace hectl
