#include "randqe/rational.hpp"

#include <cctype>

namespace randqe {

namespace {

bool parse_integer(std::string_view s, mpz_class& out) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (std::size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
  std::string digits(s[0] == '+' ? s.substr(1) : s);
  return out.set_str(digits, 10) == 0;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  mpz_class num, den = 1;
  bool ok = parse_integer(text.substr(0, slash), num);
  if (ok && slash != std::string_view::npos) ok = parse_integer(text.substr(slash + 1), den);
  if (!ok || den == 0) throw ParseError("bad rational '" + std::string(text) + "'", 0);
  Rational q(num, den);
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

std::string to_string(const Bracket& b) { return "[" + to_string(b.lo) + ", " + to_string(b.hi) + "]"; }

Rational pow2_neg(unsigned k) {
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 2, k);
  return Rational(mpz_class(1), den);
}

Rational dyadic_floor(const Rational& q, unsigned bits) {
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 2, bits);
  mpz_class scaled = q.get_num() * scale;
  mpz_class f;
  mpz_fdiv_q(f.get_mpz_t(), scaled.get_mpz_t(), q.get_den_mpz_t());
  Rational r(f, scale);
  r.canonicalize();
  return r;
}

mpz_class ceil(const Rational& q) {
  mpz_class c;
  mpz_cdiv_q(c.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return c;
}

Rational truncsub(const Rational& a, const Rational& b) {
  if (a <= b) return Rational(0);
  return a - b;
}

Rational clamp01(const Rational& q) {
  if (q < 0) return Rational(0);
  if (q > 1) return Rational(1);
  return q;
}

Rational abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

}  // namespace randqe
