#pragma once

// Exact arithmetic on the standard presentation of the probability algebra of
// [0,1): events are finite unions of half-open rational intervals kept in
// canonical (sorted, merged) form, so structural equality is measure-algebra
// equality.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "randqe/rational.hpp"

namespace randqe {

/// Half-open interval [lo, hi) with 0 <= lo < hi <= 1.
struct Interval {
  Rational lo;
  Rational hi;

  bool operator==(const Interval&) const = default;
};

class Event {
 public:
  Event() = default;

  static Event empty() { return Event(); }
  static Event full();
  /// [lo, hi); an empty range yields the empty event.
  static Event interval(const Rational& lo, const Rational& hi);
  /// Canonicalizes an arbitrary list (overlaps and adjacency allowed).
  static Event from_intervals(std::vector<Interval> ivs);

  const std::vector<Interval>& intervals() const { return ivs_; }
  bool is_empty() const { return ivs_.empty(); }

  bool operator==(const Event&) const = default;

 private:
  std::vector<Interval> ivs_;
};

enum class BoolOp { Union, Intersect, Complement, SymDiff, Difference };

Event unite(const Event& a, const Event& b);
Event intersect(const Event& a, const Event& b);
Event complement(const Event& a);
Event symdiff(const Event& a, const Event& b);
Event difference(const Event& a, const Event& b);

/// Dispatches on `op`; complement takes exactly one operand, the others two.
Event boolean_apply(BoolOp op, const Event& a, const std::optional<Event>& b = std::nullopt);

Rational measure(const Event& a);
/// mu(a symdiff b).
Rational dist(const Event& a, const Event& b);
bool is_subset(const Event& a, const Event& b);

/// Splits `a` into k parts of measure mu(a)/k, cutting by cumulative length
/// from the left.
std::vector<Event> fair_partition(const Event& a, std::size_t k);
/// Leftmost part of `a` of measure exactly m; requires 0 <= m <= mu(a).
Event sub_event(const Event& a, const Rational& m);

/// Literal syntax: `[p/q, r/s) + [a/b, c/d)`; `{}` or the empty string is the
/// empty event.
Event parse_event(std::string_view text);
std::string to_string(const Event& e);

}  // namespace randqe
