#pragma once

// Reference binary arithmetic. Nothing here knows about grids or the
// cellular rule; every accuracy number in the project is checked against it.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncamul/rng.hpp"

namespace ncamul {

/// Non-negative binary integer, one bit per element, least significant
/// bit first. Always canonical: no leading (high) zeros, zero is a single 0.
class BitVec {
 public:
  BitVec() : bits_{0} {}

  /// Canonicalizes. Every element must be 0 or 1.
  explicit BitVec(std::vector<std::uint8_t> bits);

  static BitVec from_u64(std::uint64_t value);
  /// Parses a decimal string of digits.
  static BitVec from_decimal(const std::string& digits);

  std::size_t size() const { return bits_.size(); }
  std::uint8_t bit(std::size_t i) const { return i < bits_.size() ? bits_[i] : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  bool is_zero() const { return bits_.size() == 1 && bits_[0] == 0; }

  /// Throws std::overflow_error if the value needs more than 64 bits.
  std::uint64_t to_u64() const;
  std::string to_decimal() const;
  /// LSB-first 0/1 characters, e.g. 35 -> "110001".
  std::string to_lsb_string() const;

  friend bool operator==(const BitVec&, const BitVec&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Exact product via shift-and-add on the bit vectors.
BitVec multiply_oracle(const BitVec& a, const BitVec& b);

/// Uniform n-bit draw. With msb_set the range is [2^(n-1), 2^n), otherwise
/// [0, 2^n). Throws std::invalid_argument for n == 0.
BitVec random_nbit(std::size_t n, bool msb_set, Rng& rng);

/// Number of base-10 digits; zero has one digit.
std::size_t decimal_digit_count(const BitVec& x);

}  // namespace ncamul
