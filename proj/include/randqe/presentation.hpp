#pragma once
// Presentations of the probability algebra B([0,1)) and of randomizations
// M^[0,1): special points, evaluation to a requested precision, rational
// balls, computable points, awareness and the presentations induced in both
// directions.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "randqe/random_variable.hpp"
#include "randqe/rformula.hpp"

namespace randqe {

/// Special-point code of a randomization presentation (unbounded).
using Code = mpz_class;

// ---- measure-preserving maps -----------------------------------------------------

/// Exact measure-preserving map on the events it accepts.
class EventMap {
 public:
  virtual ~EventMap() = default;
  virtual Event apply(const Event& e) const = 0;
  virtual std::string describe() const = 0;
  virtual std::shared_ptr<const EventMap> inverse() const = 0;
};
using EventMapPtr = std::shared_ptr<const EventMap>;

EventMapPtr identity_map();
/// x -> x + c mod 1.
EventMapPtr rotation_map(const Rational& c);
/// Permutes the binary digits of x inside consecutive blocks of perm.size()
/// digits: digit perm[i] of a block moves to position i. Dyadic events only.
EventMapPtr digit_permutation_map(std::vector<unsigned> perm);

// ---- the standard enumeration ----------------------------------------------------

/// i-th standard special point: [0,1) first, then for each level l >= 1 the
/// unions of level-l dyadic cells that are not unions of level-(l-1) cells,
/// in increasing order of their cell mask (bit c = cell [c/2^l, (c+1)/2^l)).
Event std_special(std::uint64_t i);
/// Index of a dyadic event in the standard enumeration (the empty event has
/// none).
std::optional<std::uint64_t> std_index(const Event& e);

/// Name of the i-th special point in generated-point terms.
std::string special_name(std::uint64_t i);
EvTermPtr special_term(std::uint64_t i);

// ---- event-sort presentations ----------------------------------------------------

class EventPresentation {
 public:
  virtual ~EventPresentation() = default;
  virtual std::string descriptor() const = 0;
  /// Evaluation is exact at every precision.
  virtual bool exact() const = 0;
  /// mu of a generated point (Boolean term over special names) within 2^-k.
  virtual Bracket mu(const EvTerm& t, unsigned k) const = 0;
  Bracket dist(const EvTerm& a, const EvTerm& b, unsigned k) const;
  /// Underlying event when the presentation is exact.
  virtual std::optional<Event> underlying(const EvTerm& t) const = 0;
};
using EventPresentationPtr = std::shared_ptr<const EventPresentation>;

/// Special point i is sigma(std_special(i)).
class MappedEventPresentation : public EventPresentation {
 public:
  MappedEventPresentation(std::string descriptor, EventMapPtr sigma);
  std::string descriptor() const override { return descriptor_; }
  bool exact() const override { return true; }
  Bracket mu(const EvTerm& t, unsigned k) const override;
  std::optional<Event> underlying(const EvTerm& t) const override;
  Event special(std::uint64_t i) const;
  const EventMapPtr& sigma() const { return sigma_; }

 private:
  std::string descriptor_;
  EventMapPtr sigma_;
};

/// Special point i is std_special(i) rotated by sqrt(2) - 1, evaluated
/// through dyadic approximants of the angle.
class IrrationalRotationPresentation : public EventPresentation {
 public:
  std::string descriptor() const override { return "rot:sqrt2"; }
  bool exact() const override { return false; }
  Bracket mu(const EvTerm& t, unsigned k) const override;
  std::optional<Event> underlying(const EvTerm&) const override { return std::nullopt; }
  /// floor((sqrt(2) - 1) 2^j) / 2^j.
  static Rational angle(unsigned j);
};

/// `std`, `rot:p/q`, `rot:sqrt2`, `digitperm` (= digitperm:10) or
/// `digitperm:<digits>` such as `digitperm:2031`.
EventPresentationPtr make_event_presentation(std::string_view descriptor);
EventMapPtr make_event_map(std::string_view descriptor);

// ---- balls -----------------------------------------------------------------------

struct EventBall {
  EvTermPtr center;
  Rational radius;
};

struct RVBall {
  Code center = 0;  // special-point code
  Rational radius;
};

enum class Inclusion { Yes, NoAtThisPrecision };

/// B(p; e) formally inside B(q; d): d(p,q) + e < d, decided exactly for exact
/// presentations and otherwise from an approximant within 2^-k.
Inclusion formal_inclusion(const EventBall& b1, const EventBall& b2, const EventPresentation& pres, unsigned k);

// ---- randomization presentations -------------------------------------------------

/// Cantor pairing and the list code: code([]) = 0,
/// code(x :: rest) = 1 + cantor(x, code(rest)).
std::uint64_t cantor_pair(std::uint64_t x, std::uint64_t y);
std::pair<std::uint64_t, std::uint64_t> cantor_unpair(std::uint64_t z);
Code cantor_pair(const Code& x, const Code& y);
std::pair<Code, Code> cantor_unpair(const Code& z);
Code encode_list(const std::vector<std::uint64_t>& xs);
std::vector<Code> decode_list(const Code& code);

/// Induced presentation of M^[0,1): the special point with code of
/// (i_1..i_n, J_1..J_n) takes the i_t-th enumerated element of M on
/// sigma(std_special(J_t)) minus the earlier J's, and the value of t = 1 on
/// any uncovered remainder. The event sort is sigma applied to the standard
/// presentation.
class RVPresentation {
 public:
  RVPresentation(StructurePtr m, EventMapPtr sigma = identity_map(), std::string descriptor = "std");
  const StructurePtr& structure() const { return m_; }
  const std::string& descriptor() const { return descriptor_; }
  const EventMapPtr& sigma() const { return sigma_; }

  /// nullopt for malformed codes (empty or odd-length lists).
  std::optional<SimpleRV> decode(const Code& code) const;
  /// Throws PreconditionError on a malformed code.
  SimpleRV special(const Code& code) const;
  /// Code of the special point with the given elements and standard indices.
  static Code code_of(const std::vector<std::uint64_t>& elements, const std::vector<std::uint64_t>& events);

  Rational dist(const Code& a, const Code& b) const;
  /// mu[[phi(points)]], exact.
  Rational mu(const Formula& phi, std::span<const std::string> vars, std::span<const Code> points) const;

 private:
  StructurePtr m_;
  EventMapPtr sigma_;
  std::string descriptor_;
};
using RVPresentationPtr = std::shared_ptr<const RVPresentation>;

RVPresentationPtr induced_randomization_presentation(StructurePtr m);
/// Descriptor as for event presentations, applied to the cells; irrational
/// rotation is not available for random variables.
RVPresentationPtr make_rv_presentation(StructurePtr m, std::string_view descriptor);

/// A point given by special points converging at rate 2^-k.
class ComputablePoint {
 public:
  using Seq = std::function<Code(unsigned k)>;
  ComputablePoint() = default;
  explicit ComputablePoint(Seq seq) : seq_(std::move(seq)) {}
  static ComputablePoint constant(Code code);
  Code operator()(unsigned k) const { return seq_(k); }

 private:
  Seq seq_;
};

// ---- awareness -------------------------------------------------------------------

/// Resumable stream of rational balls meeting a closed set.
class CEClosedSet {
 public:
  virtual ~CEClosedSet() = default;
  /// Next emitted ball, or nullopt when `max_steps` candidates were examined
  /// without emission (the stream can be resumed).
  virtual std::optional<RVBall> next(std::size_t max_steps) = 0;
  virtual std::size_t steps() const = 0;
};

/// i-th positive rational radius: 1, 1/2, 1/3, 2/3, 1/4, 3/4, 1/5, ...
Rational radius_enum(std::uint64_t i);

enum class AwareStrategy { Induced, Recognizable };

/// Balls B(f; e) that contain a constant: some element has mass
/// mu[[f = a]] > 1 - e. `Induced` reads the masses off the cells;
/// `Recognizable` searches elements a and tests mu[[rho_a(f)]] for the
/// recognizer rho_a of a, through the presentation only.
std::unique_ptr<CEClosedSet> aware_enumerator(RVPresentationPtr pres, AwareStrategy strategy);

/// Mass test used by the enumerators.
bool ball_meets_constants(const SimpleRV& f, const Rational& radius);

/// The constants (a_n) enumerated from an aware stream: one point per emitted
/// ball of radius below 1/2, in emission order. a_n(k) chases balls of radius
/// below 2^-k formally included in the previous one.
class ConstantSequence {
 public:
  ConstantSequence(RVPresentationPtr pres, AwareStrategy strategy, std::size_t max_steps = 1u << 20);
  /// a_n; extends the enumeration as needed.
  const ComputablePoint& operator[](std::size_t n);
  /// The ball that introduced a_n.
  const RVBall& ball(std::size_t n);
  const RVPresentation& presentation() const { return *pres_; }

 private:
  void extend(std::size_t n);
  // Pulls one ball from the stream; true if it opened a new a_n.
  bool pull();
  Code chase(std::size_t n, unsigned k);

  RVPresentationPtr pres_;
  AwareStrategy strategy_;
  std::size_t max_steps_;
  std::unique_ptr<CEClosedSet> stream_;
  std::vector<RVBall> emitted_;
  // Deques: references handed out stay valid while the sequence grows.
  std::deque<RVBall> small_;
  std::deque<ComputablePoint> points_;
  std::deque<std::vector<RVBall>> chain_;
};

/// Induced presentation M^(#) of M: special point n is the constant a_n.
class InducedClassicalPresentation {
 public:
  InducedClassicalPresentation(RVPresentationPtr pres, AwareStrategy strategy = AwareStrategy::Induced);
  const ComputablePoint& point(std::size_t n) { return seq_[n]; }
  /// The element of M that a_n is constant at.
  ElementId element(std::size_t n);
  /// a_m and a_n denote the same constant (distance below 1/2).
  bool same(std::size_t m, std::size_t n);
  /// Index of the first special point at distance 0 from the constant at the
  /// i-th enumerated element of M (the round-trip map).
  std::size_t roundtrip_index(std::uint64_t i, std::size_t max_search = 256);
  ConstantSequence& sequence() { return seq_; }

 private:
  RVPresentationPtr pres_;
  ConstantSequence seq_;
};

/// M |= phi(a) from mu[[phi(a')]] at special points a' within 2^-k of a,
/// thresholded at 1/2; k grows until the estimate is within 1/4 of 0 or 1.
bool decide_via_randomization(const RVPresentation& pres, const Formula& phi, std::span<const std::string> vars,
                              std::span<const ComputablePoint> points, unsigned max_k = 16);

}  // namespace randqe
