#include "randqe/event.hpp"

#include <algorithm>
#include <cctype>

namespace randqe {

Event Event::full() { return interval(Rational(0), Rational(1)); }

Event Event::interval(const Rational& lo, const Rational& hi) {
  return from_intervals({Interval{lo, hi}});
}

Event Event::from_intervals(std::vector<Interval> ivs) {
  for (auto& iv : ivs) {
    iv.lo.canonicalize();
    iv.hi.canonicalize();
    if (iv.lo < 0) iv.lo = 0;
    if (iv.hi > 1) iv.hi = 1;
  }
  std::erase_if(ivs, [](const Interval& iv) { return !(iv.lo < iv.hi); });
  std::sort(ivs.begin(), ivs.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  Event e;
  for (auto& iv : ivs) {
    if (!e.ivs_.empty() && iv.lo <= e.ivs_.back().hi) {
      if (iv.hi > e.ivs_.back().hi) e.ivs_.back().hi = iv.hi;
    } else {
      e.ivs_.push_back(std::move(iv));
    }
  }
  return e;
}

namespace {

// Walks the breakpoints of both events and keeps the segments where
// keep(in_a, in_b) holds.
template <typename Keep>
Event sweep(const Event& a, const Event& b, Keep keep) {
  std::vector<Rational> cuts{Rational(0), Rational(1)};
  for (const auto* e : {&a, &b})
    for (const auto& iv : e->intervals()) {
      cuts.push_back(iv.lo);
      cuts.push_back(iv.hi);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto member = [](const Event& e, std::size_t& cursor, const Rational& x) {
    const auto& ivs = e.intervals();
    while (cursor < ivs.size() && ivs[cursor].hi <= x) ++cursor;
    return cursor < ivs.size() && ivs[cursor].lo <= x;
  };

  std::vector<Interval> out;
  std::size_t ca = 0, cb = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Rational& x = cuts[i];
    bool in_a = member(a, ca, x);
    bool in_b = member(b, cb, x);
    if (keep(in_a, in_b)) out.push_back({x, cuts[i + 1]});
  }
  return Event::from_intervals(std::move(out));
}

}  // namespace

Event unite(const Event& a, const Event& b) {
  std::vector<Interval> all = a.intervals();
  all.insert(all.end(), b.intervals().begin(), b.intervals().end());
  return Event::from_intervals(std::move(all));
}

Event intersect(const Event& a, const Event& b) {
  std::vector<Interval> out;
  const auto& x = a.intervals();
  const auto& y = b.intervals();
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const Rational& lo = x[i].lo > y[j].lo ? x[i].lo : y[j].lo;
    const Rational& hi = x[i].hi < y[j].hi ? x[i].hi : y[j].hi;
    if (lo < hi) out.push_back({lo, hi});
    if (x[i].hi < y[j].hi)
      ++i;
    else
      ++j;
  }
  return Event::from_intervals(std::move(out));
}

Event complement(const Event& a) {
  std::vector<Interval> out;
  Rational prev = 0;
  for (const auto& iv : a.intervals()) {
    if (prev < iv.lo) out.push_back({prev, iv.lo});
    prev = iv.hi;
  }
  if (prev < 1) out.push_back({prev, Rational(1)});
  return Event::from_intervals(std::move(out));
}

Event symdiff(const Event& a, const Event& b) {
  return sweep(a, b, [](bool x, bool y) { return x != y; });
}

Event difference(const Event& a, const Event& b) {
  return sweep(a, b, [](bool x, bool y) { return x && !y; });
}

Event boolean_apply(BoolOp op, const Event& a, const std::optional<Event>& b) {
  if ((op == BoolOp::Complement) == b.has_value())
    throw PreconditionError("boolean_apply: arity mismatch");
  switch (op) {
    case BoolOp::Union: return unite(a, *b);
    case BoolOp::Intersect: return intersect(a, *b);
    case BoolOp::Complement: return complement(a);
    case BoolOp::SymDiff: return symdiff(a, *b);
    case BoolOp::Difference: return difference(a, *b);
  }
  throw PreconditionError("boolean_apply: unknown operation");
}

Rational measure(const Event& a) {
  Rational m = 0;
  for (const auto& iv : a.intervals()) m += iv.hi - iv.lo;
  return m;
}

Rational dist(const Event& a, const Event& b) { return measure(symdiff(a, b)); }

bool is_subset(const Event& a, const Event& b) { return difference(a, b).is_empty(); }

Event sub_event(const Event& a, const Rational& m) {
  if (m < 0 || m > measure(a)) throw PreconditionError("sub_event: measure out of range");
  std::vector<Interval> out;
  Rational remaining = m;
  for (const auto& iv : a.intervals()) {
    if (remaining <= 0) break;
    Rational len = iv.hi - iv.lo;
    if (len <= remaining) {
      out.push_back(iv);
      remaining -= len;
    } else {
      out.push_back({iv.lo, iv.lo + remaining});
      remaining = 0;
    }
  }
  return Event::from_intervals(std::move(out));
}

std::vector<Event> fair_partition(const Event& a, std::size_t k) {
  if (k == 0) throw PreconditionError("fair_partition: k must be positive");
  Rational share = measure(a) / Rational(static_cast<unsigned long>(k));
  std::vector<Event> parts;
  parts.reserve(k);
  Event rest = a;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    Event piece = sub_event(rest, share);
    rest = difference(rest, piece);
    parts.push_back(std::move(piece));
  }
  parts.push_back(std::move(rest));
  return parts;
}

Event parse_event(std::string_view text) {
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto expect = [&](char c) {
    skip();
    if (pos >= text.size() || text[pos] != c)
      throw ParseError(std::string("expected '") + c + "' in event literal", pos);
    ++pos;
  };
  auto number = [&](std::string_view stops) {
    skip();
    std::size_t start = pos;
    while (pos < text.size() && stops.find(text[pos]) == std::string_view::npos &&
           !std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    try {
      return parse_rational(text.substr(start, pos - start));
    } catch (const ParseError&) {
      throw ParseError("bad rational in event literal", start);
    }
  };

  skip();
  if (pos == text.size()) return Event::empty();
  if (text.substr(pos) == "{}" || text.substr(pos) == "0") return Event::empty();
  std::vector<Interval> ivs;
  while (true) {
    expect('[');
    Rational lo = number(",");
    expect(',');
    Rational hi = number(")");
    expect(')');
    if (lo < 0 || hi > 1 || !(lo < hi)) throw ParseError("interval must satisfy 0 <= lo < hi <= 1", pos);
    ivs.push_back({lo, hi});
    skip();
    if (pos == text.size()) break;
    expect('+');
  }
  return Event::from_intervals(std::move(ivs));
}

std::string to_string(const Event& e) {
  if (e.is_empty()) return "{}";
  std::string out;
  for (const auto& iv : e.intervals()) {
    if (!out.empty()) out += " + ";
    out += "[" + to_string(iv.lo) + ", " + to_string(iv.hi) + ")";
  }
  return out;
}

}  // namespace randqe
