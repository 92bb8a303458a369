#include "ncamul/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace ncamul {

namespace {

void canonicalize(std::vector<std::uint8_t>& bits) {
  while (bits.size() > 1 && bits.back() == 0) bits.pop_back();
  if (bits.empty()) bits.push_back(0);
}

// Packs into 32-bit little-endian limbs for radix conversion.
std::vector<std::uint32_t> to_limbs(const BitVec& x) {
  std::vector<std::uint32_t> limbs((x.size() + 31) / 32, 0);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x.bit(i)) limbs[i / 32] |= 1u << (i % 32);
  return limbs;
}

// Divides limbs in place, returns the remainder.
std::uint32_t divmod_small(std::vector<std::uint32_t>& limbs, std::uint32_t divisor) {
  std::uint64_t rem = 0;
  for (std::size_t k = limbs.size(); k-- > 0;) {
    const std::uint64_t cur = (rem << 32) | limbs[k];
    limbs[k] = static_cast<std::uint32_t>(cur / divisor);
    rem = cur % divisor;
  }
  while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  return static_cast<std::uint32_t>(rem);
}

}  // namespace

BitVec::BitVec(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_)
    if (b > 1) throw std::invalid_argument("BitVec: element is not 0 or 1");
  canonicalize(bits_);
}

BitVec BitVec::from_u64(std::uint64_t value) {
  std::vector<std::uint8_t> bits;
  for (; value != 0; value >>= 1) bits.push_back(static_cast<std::uint8_t>(value & 1));
  return BitVec(std::move(bits));
}

BitVec BitVec::from_decimal(const std::string& digits) {
  if (digits.empty()) throw std::invalid_argument("BitVec: empty decimal string");
  // Schoolbook: halve the decimal string repeatedly, collecting remainders.
  std::vector<std::uint8_t> dec;
  for (char c : digits) {
    if (c < '0' || c > '9') throw std::invalid_argument("BitVec: invalid decimal digit");
    dec.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  std::vector<std::uint8_t> bits;
  while (!(dec.empty() || (dec.size() == 1 && dec[0] == 0))) {
    std::vector<std::uint8_t> half;
    int rem = 0;
    for (auto d : dec) {
      const int cur = rem * 10 + d;
      const int q = cur / 2;
      rem = cur % 2;
      if (!half.empty() || q != 0) half.push_back(static_cast<std::uint8_t>(q));
    }
    bits.push_back(static_cast<std::uint8_t>(rem));
    dec = std::move(half);
  }
  return BitVec(std::move(bits));
}

std::uint64_t BitVec::to_u64() const {
  if (bits_.size() > 64) throw std::overflow_error("BitVec: value exceeds 64 bits");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) v |= static_cast<std::uint64_t>(bits_[i]) << i;
  return v;
}

std::string BitVec::to_decimal() const {
  auto limbs = to_limbs(*this);
  while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  if (limbs.empty()) return "0";
  std::string out;
  while (!limbs.empty()) {
    std::uint32_t chunk = divmod_small(limbs, 1000000000u);
    for (int k = 0; k < 9; ++k) {
      out.push_back(static_cast<char>('0' + chunk % 10));
      chunk /= 10;
    }
  }
  while (out.size() > 1 && out.back() == '0') out.pop_back();
  std::reverse(out.begin(), out.end());
  return out;
}

std::string BitVec::to_lsb_string() const {
  std::string s;
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

BitVec multiply_oracle(const BitVec& a, const BitVec& b) {
  std::vector<std::uint8_t> acc(a.size() + b.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.bit(i)) continue;
    std::uint8_t carry = 0;
    std::size_t k = 0;
    for (; k < b.size(); ++k) {
      const std::uint8_t s = static_cast<std::uint8_t>(acc[i + k] + b.bit(k) + carry);
      acc[i + k] = s & 1;
      carry = s >> 1;
    }
    for (std::size_t p = i + k; carry != 0; ++p) {
      const std::uint8_t s = static_cast<std::uint8_t>(acc[p] + carry);
      acc[p] = s & 1;
      carry = s >> 1;
    }
  }
  return BitVec(std::move(acc));
}

BitVec random_nbit(std::size_t n, bool msb_set, Rng& rng) {
  if (n == 0) throw std::invalid_argument("random_nbit: n must be >= 1");
  std::vector<std::uint8_t> bits(n);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) word = rng.next_u64();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1);
  }
  if (msb_set) bits[n - 1] = 1;
  return BitVec(std::move(bits));
}

std::size_t decimal_digit_count(const BitVec& x) { return x.to_decimal().size(); }

}  // namespace ncamul
