// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace synthgt {

// 64-bit FNV-1a, used for config hashes, checkpoint hashes and fold audits.
class Fnv1a {
 public:
  void update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(std::span<const double> values) {
    update(values.data(), values.size_bytes());
  }
  void update(std::uint64_t v) { update(&v, sizeof v); }

  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::string Fnv1a::hex() const { return to_hex(state_); }

inline std::string hash_string(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.hex();
}

}  // namespace synthgt
