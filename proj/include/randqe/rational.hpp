#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace randqe {

using Rational = mpq_class;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed textual input; `position` is a byte offset into the source text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at offset " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// An operation was called outside its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A configurable resource cap (atom count, search budget, ...) was exceeded.
class ResourceCap : public Error {
 public:
  using Error::Error;
};

/// p/q in lowest terms.
inline Rational ratio(long p, long q) {
  Rational r(p, q);
  r.canonicalize();
  return r;
}

Rational parse_rational(std::string_view text);
std::string to_string(const Rational& q);

/// 2^{-k}.
Rational pow2_neg(unsigned k);
/// Largest multiple of 2^{-bits} that is <= q.
Rational dyadic_floor(const Rational& q, unsigned bits);
/// Smallest integer >= q.
mpz_class ceil(const Rational& q);

Rational truncsub(const Rational& a, const Rational& b);
Rational clamp01(const Rational& q);
Rational abs(const Rational& q);

/// Closed rational interval [lo, hi] bracketing an exactly defined real.
struct Bracket {
  Rational lo;
  Rational hi;

  static Bracket exact(const Rational& v) { return {v, v}; }
  Rational width() const { return hi - lo; }
  Rational mid() const { return (lo + hi) / 2; }
  bool contains(const Rational& v) const { return lo <= v && v <= hi; }
  bool is_exact() const { return lo == hi; }
  bool operator==(const Bracket&) const = default;
};

std::string to_string(const Bracket& b);

}  // namespace randqe
