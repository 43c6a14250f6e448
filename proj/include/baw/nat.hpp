#pragma once

// Arbitrary-precision natural numbers plus the small arithmetic vocabulary the
// rest of the library is built from: truncated subtraction, binary length,
// shift-style padding and prefix extraction, block decoding, a self-delimiting
// pair code, and length-scaled growth functions indexed by a binary fraction.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace baw {

using Nat = boost::multiprecision::cpp_int;

// Thrown when an operation would materialize a number too large to handle at
// desk scale (e.g. a shift by 2^40 bits).  This is a resource guard, not part
// of the arithmetic semantics: the functions are total on Nat in principle.
class resource_error : public std::runtime_error {
 public:
  explicit resource_error(const std::string& what) : std::runtime_error(what) {}
};

// Hard cap on the bit width any single value may reach: 1 GiB of bits.
inline constexpr std::uint64_t max_value_bits = std::uint64_t{1} << 30;

inline std::size_t checked_shift(const Nat& n, const char* who) {
  if (n > max_value_bits) {
    throw resource_error(std::string(who) + ": shift amount " + n.str() +
                         " exceeds the desk-scale width cap");
  }
  return static_cast<std::size_t>(n);
}

// --- base functions -------------------------------------------------------

inline Nat monus(const Nat& a, const Nat& b) { return a > b ? Nat(a - b) : Nat(0); }

inline Nat half(const Nat& a) { return a >> 1; }

// len(a) = number of bits in the binary expansion; len(0) = 0.
inline Nat len(const Nat& a) {
  if (a == 0) return 0;
  return Nat(boost::multiprecision::msb(a) + 1);
}

inline Nat pow2(const Nat& k) {
  return Nat(1) << checked_shift(k, "pow2");
}

// pad(x, y) = x * 2^len(y): append len(y) zero bits to x.
inline Nat pad(const Nat& x, const Nat& y) {
  if (x == 0) return 0;
  return x << checked_shift(len(y), "pad");
}

// msp(x, i) = floor(x / 2^i): drop the i low bits.
inline Nat msp(const Nat& x, const Nat& i) {
  if (i >= len(x)) return 0;
  return x >> static_cast<std::size_t>(i);
}

// smash(x, y) = 2^(len(x) * len(y)).
inline Nat smash(const Nat& x, const Nat& y) {
  return pow2(len(x) * len(y));
}

// --- derived functions ----------------------------------------------------

// lsp(x, i) = x mod 2^i: the i low bits.  The definitional form is
// x -. msp(x,i) * 2^min(len(x), i); it agrees with a plain mask.
inline Nat lsp(const Nat& x, const Nat& i) {
  if (i >= len(x)) return x;
  std::size_t k = static_cast<std::size_t>(i);
  return x & ((Nat(1) << k) - 1);
}

// bhat(m, x, w): the x-th block of m bits of w, blocks counted from the low
// end.  Width 0 yields 0.
inline Nat bhat(const Nat& m, const Nat& x, const Nat& w) {
  if (m == 0) return 0;
  Nat lo = x * m;
  if (lo >= len(w)) return 0;
  return lsp(msp(w, lo), m);
}

inline Nat bit(const Nat& i, const Nat& x) { return bhat(1, i, x); }

inline Nat knot(const Nat& x) { return monus(1, x); }
inline Nat kand(const Nat& x, const Nat& y) { return x * y; }
// kleq(x, y) is 1 exactly when y <= x (the truth value of "y <= x").
inline Nat kleq(const Nat& x, const Nat& y) { return knot(monus(y, x)); }

// cond(s, y, z): y if s = 0, else z.
inline Nat cond(const Nat& s, const Nat& y, const Nat& z) {
  return s == 0 ? y : z;
}

inline Nat nat_max(const Nat& x, const Nat& y) { return x > y ? x : y; }
inline Nat nat_min(const Nat& x, const Nat& y) { return x < y ? x : y; }

// --- pair code ------------------------------------------------------------
//
// pair(x, y) stores x and y in two fields of len(max(x,y))+1 bits each, every
// field carrying a leading marker one so the split point is recoverable from
// the total length alone.

inline Nat pair_code(const Nat& x, const Nat& y) {
  Nat m = len(nat_max(x, y));
  Nat block = pow2(m);  // the marker bit
  Nat b = block * 2;    // field width as a power of two
  return (block + y) * b + (block + x);
}

// Field width of a pair code: floor(len(w)/2).
inline Nat pair_half(const Nat& w) { return half(len(w)); }

inline Nat pair_left(const Nat& w) {
  Nat h = pair_half(w);
  return bhat(monus(h, 1), 0, bhat(h, 0, w));
}

inline Nat pair_right(const Nat& w) {
  Nat h = pair_half(w);
  return bhat(monus(h, 1), 0, bhat(h, 1, w));
}

inline bool is_pair(const Nat& w) {
  Nat h = pair_half(w);
  if (bit(monus(h, 1), w) != 1) return false;
  return 2 * len(nat_max(pair_left(w), pair_right(w))) + 2 == len(w);
}

// Tuples associate to the right: <a,b,c> = pair(a, pair(b, c)).
inline Nat tuple_code(const std::vector<Nat>& parts) {
  if (parts.empty()) throw std::invalid_argument("tuple_code: empty tuple");
  Nat acc = parts.back();
  for (std::size_t k = parts.size() - 1; k-- > 0;) {
    acc = pair_code(parts[k], acc);
  }
  return acc;
}

// proj(w, j, n): the j-th component (1-based) of an n-tuple.  The last
// component is whatever remains on the right spine.
inline Nat proj(const Nat& w, std::size_t j, std::size_t n) {
  if (j < 1 || j > n) throw std::invalid_argument("proj: index out of range");
  Nat acc = w;
  for (std::size_t k = 1; k < j; ++k) acc = pair_right(acc);
  if (j < n) acc = pair_left(acc);
  return acc;
}

// --- growth functions -----------------------------------------------------
//
// An epsilon spec is a positive binary fraction 0.e1e2...es, or exactly 1
// (unit = true, no fraction bits).  ell_eps(e, x) = 2^ceil(e * len(len(x)))
// computed through the complement trick below, so ell_{1/2}(x) doubles in
// length-of-length steps and ell_1(x) = 2^lenlen(x).

struct EpsilonSpec {
  bool unit = false;          // true: epsilon = 1
  std::vector<bool> bits;     // fraction bits e1..es (ignored if unit)

  bool is_zero() const {
    if (unit) return false;
    for (bool b : bits)
      if (b) return false;
    return true;
  }

  // User-facing specs must be positive.
  void validate() const {
    if (unit && !bits.empty())
      throw std::invalid_argument("EpsilonSpec: unit value carries no fraction bits");
    if (is_zero())
      throw std::invalid_argument("EpsilonSpec: epsilon must be positive");
  }

  std::string to_string() const {
    if (unit) return "1.0b";
    std::string s = "0.";
    for (bool b : bits) s += b ? '1' : '0';
    s += 'b';
    return s;
  }

  static EpsilonSpec parse(const std::string& text);

  static EpsilonSpec one() { return EpsilonSpec{true, {}}; }
  static EpsilonSpec half() { return EpsilonSpec{false, {true}}; }

  bool operator==(const EpsilonSpec& o) const {
    return unit == o.unit && bits == o.bits;
  }
};

inline EpsilonSpec EpsilonSpec::parse(const std::string& text) {
  auto bad = [&] {
    throw std::invalid_argument("EpsilonSpec: bad literal '" + text + "'");
  };
  if (text.size() < 4 || text.back() != 'b') bad();
  EpsilonSpec e;
  if (text[0] == '1') {
    if (text != "1.0b") bad();
    e.unit = true;
  } else if (text[0] == '0' && text[1] == '.') {
    for (std::size_t k = 2; k + 1 < text.size(); ++k) {
      if (text[k] != '0' && text[k] != '1') bad();
      e.bits.push_back(text[k] == '1');
    }
    if (e.bits.empty()) bad();
  } else {
    bad();
  }
  e.validate();
  return e;
}

// 1 - e as an epsilon spec; may be zero (internal use only).
inline EpsilonSpec eps_complement(const EpsilonSpec& e) {
  EpsilonSpec c;
  if (e.unit) return c;  // zero
  if (e.is_zero()) {     // the zero spec arises internally as 1 - 1
    c.unit = true;
    return c;
  }
  // Two's-complement style: 2^s - value over s fraction bits.
  std::vector<bool> out(e.bits.size(), false);
  bool borrow = false;
  // Compute 1.000... - 0.bits = 0.out with possible unit carry; since e > 0,
  // the result is < 1, so no unit bit.
  // Subtract bit by bit from the low end.
  for (std::size_t k = e.bits.size(); k-- > 0;) {
    int top = 0 - (borrow ? 1 : 0) - (e.bits[k] ? 1 : 0);
    // We are computing (0 at this position of 1.00..0) minus bit minus borrow.
    if (top < 0) {
      top += 2;
      borrow = true;
    } else {
      borrow = false;
    }
    out[k] = top == 1;
  }
  // borrow consumed the leading 1 of 1.00..0; if e had been 0 the unit bit
  // would survive, but e > 0 is guaranteed by validate().
  c.bits = std::move(out);
  return c;
}

// frac_mul(e, y): sum over the represented bits of e of msp(y, position),
// i.e. the canonical over-approximation of e*y used by the growth functions.
inline Nat frac_mul(const EpsilonSpec& e, const Nat& y) {
  Nat acc = 0;
  if (e.unit) acc += y;
  for (std::size_t k = 0; k < e.bits.size(); ++k) {
    if (e.bits[k]) acc += msp(y, Nat(k + 1));
  }
  return acc;
}

inline Nat lenlen(const Nat& x) { return len(len(x)); }

inline Nat ell_eps(const EpsilonSpec& e, const Nat& x) {
  Nat n2 = lenlen(x);
  return msp(pow2(n2), frac_mul(eps_complement(e), n2));
}

}  // namespace baw
