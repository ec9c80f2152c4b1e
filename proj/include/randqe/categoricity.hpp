#pragma once
// Isolated types, near-realization repair, c.e. realization sets and the
// back-and-forth construction of computable isomorphisms between two
// presentations of B([0,1)) or of M^[0,1) for effectively omega-categorical M.

#include <json.hpp>
#include <map>
#include <set>

#include "randqe/presentation.hpp"

namespace randqe {

enum class Flavor { APA, RAND };

/// Type of a point over a finite context, given by rational targets.
///
/// APA: key k is a sign pattern over the context (bit i set: A_{i+1} holds) and
/// the target is mu(x meet A^k). `atom_measures` holds mu(A^k) in the source.
/// RAND: key i indexes `thetas` (isolating formulas in x, y1..yn) and the target
/// is mu[[theta_i(X, f)]]. Keys that are not listed have target 0.
struct IsolatedType {
  Flavor flavor = Flavor::APA;
  std::size_t context_size = 0;
  std::map<std::uint64_t, Rational> targets;
  std::map<std::uint64_t, Rational> atom_measures;
  std::vector<FormulaPtr> thetas;
  /// Targets are exact, or within 2^-precision when not.
  bool exact = true;
  unsigned precision = 0;

  /// Number of formulas the type is isolated by: 2^m for APA, #thetas for RAND.
  Rational formula_count() const;
  Rational target(std::uint64_t key) const;
  nlohmann::ordered_json to_json() const;
};

/// Sign-pattern atoms of a context, nonempty ones only, by key.
std::map<std::uint64_t, Event> context_atoms(std::span<const Event> ctx);

IsolatedType apa_type(const Event& b, std::span<const Event> ctx);
/// Throws PreconditionError unless M is effectively omega-categorical.
IsolatedType rand_type(const StructureOracle& m, const SimpleRV& g, std::span<const SimpleRV> f);

/// psi_p: the largest deviation of an isolating measure from its target.
Rational psi(const IsolatedType& p, const Event& b, std::span<const Event> ctx);
Rational psi(const StructureOracle& m, const IsolatedType& p, const SimpleRV& g, std::span<const SimpleRV> f);

/// B' realizing p exactly: per atom, a surplus is trimmed to its leftmost
/// part of the target measure and a deficit is filled from the leftmost part
/// of the atom outside B. d(B, B') = sum of the per-atom deviations.
/// Throws PreconditionError when a target exceeds its atom.
Event near_realization_repair(const Event& B, std::span<const Event> A, const IsolatedType& p);

/// g' realizing p exactly: the partition [[theta_i(g, f)]] is repaired by
/// moving mass along augmenting paths between classes (a piece may move to
/// class j only inside [[exists x theta_j(x, f)]]), g is kept where its class
/// is unchanged and moved pieces get witnesses. Throws PreconditionError on
/// infeasible targets.
SimpleRV k_realization_repair(const StructureOracle& m, const SimpleRV& g, std::span<const SimpleRV> f,
                              const IsolatedType& p);

// ---- presentations as spaces of generated points ---------------------------------

/// What the back-and-forth needs from a presentation. Points are codes: for
/// event presentations code 0 is the bottom event and code i + 1 the special
/// point i; for randomizations the code is the special-point code.
class PointSpace {
 public:
  virtual ~PointSpace() = default;
  virtual Flavor flavor() const = 0;
  virtual std::string descriptor() const = 0;
  virtual bool exact() const = 0;
  /// Canonical enumeration of generated points.
  virtual Code point(std::uint64_t i) const = 0;
  virtual std::string point_text(const Code& c) const = 0;
  /// Bracket of width at most 2^-k around d(a, b).
  virtual Bracket dist(const Code& a, const Code& b, unsigned k) const = 0;
  /// Type of x over ctx, within 2^-k.
  virtual IsolatedType type_of(const Code& x, std::span<const Code> ctx, unsigned k) const = 0;
  /// Bracket around psi_p(d, ctx), width at most 2^-k.
  virtual Bracket psi(const IsolatedType& p, const Code& d, std::span<const Code> ctx, unsigned k) const = 0;
  /// The repair of c, when it is again a generated point.
  virtual std::optional<Code> repaired(const IsolatedType& p, const Code& c, std::span<const Code> ctx) const = 0;
  /// p with targets made feasible over ctx; every change is appended to log.
  virtual IsolatedType transport(const IsolatedType& p, std::span<const Code> ctx, nlohmann::ordered_json& log) const = 0;
};
using PointSpacePtr = std::shared_ptr<const PointSpace>;

PointSpacePtr event_space(EventPresentationPtr pres);
/// Throws PreconditionError unless the structure is effectively omega-categorical.
PointSpacePtr rv_space(RVPresentationPtr pres);

/// APA points of an event presentation as terms.
EvTermPtr apa_term(const Code& c);

IsolatedType isolated_type_of(const PointSpace& space, const Code& point, std::span<const Code> ctx, unsigned k);

// ---- realization sets ------------------------------------------------------------

/// The closed set of realizations of p over ctx, enumerated by the balls
/// B(C; e) for which a generated D and delta are found with
/// psi_p(D) + delta < (e - d(C, D)) / n, n the formula count of p.
class RealizationSet : public CEClosedSet {
 public:
  struct Witness {
    Code d;
    Rational delta;
  };

  RealizationSet(PointSpacePtr space, std::vector<Code> ctx, IsolatedType p);

  /// Candidates D: the repair of C, then the first `depth` enumerated points.
  std::optional<Witness> witness(const Code& c, const Rational& eps, std::size_t depth) const;
  /// C is its own witness: psi_p(C) + delta < eps / n.
  bool self_witness(const Code& c, const Rational& eps, std::size_t depth) const;

  /// Fair round robin over (centre index, radius index, search depth).
  std::optional<RVBall> next(std::size_t max_steps) override;
  std::size_t steps() const override { return steps_; }

  const PointSpace& space() const { return *space_; }
  const IsolatedType& type() const { return p_; }
  std::span<const Code> context() const { return ctx_; }

 private:
  Bracket psi_of(const Code& d, unsigned k) const;

  PointSpacePtr space_;
  std::vector<Code> ctx_;
  IsolatedType p_;
  std::uint64_t stage_ = 0;
  std::size_t steps_ = 0;
  std::set<std::pair<std::string, std::string>> emitted_;
  mutable std::map<std::pair<std::string, unsigned>, Bracket> psi_cache_;
};

/// A computable point of the set: balls of radius 2^-j, each formally
/// included in the previous one, starting from B(point(0); 2). Candidate
/// centres are the current centre, its repair, then enumerated points; centres
/// that are their own witnesses are tried first, so a chain that reaches a
/// realization stays there. The search depth doubles up to `max_depth` before
/// giving up with ResourceCap.
std::vector<RVBall> chase_point(const RealizationSet& set, unsigned k, std::size_t depth = 64,
                                std::size_t max_depth = 4096);

// ---- back and forth ---------------------------------------------------------------

struct PartialMapEntry {
  std::vector<RVBall> domain;  // chain in the first presentation
  std::vector<RVBall> range;   // chain in the second presentation
  bool forth = true;

  static Code at(const std::vector<RVBall>& chain, unsigned k);
};

struct PartialMap {
  std::vector<PartialMapEntry> entries;
  nlohmann::ordered_json log = nlohmann::ordered_json::array();

  std::vector<Code> domain(unsigned k) const;
  std::vector<Code> range(unsigned k) const;
};

struct IsoOptions {
  std::size_t steps = 8;
  unsigned k = 6;
  std::size_t depth = 64;
  std::size_t max_depth = 4096;
};

/// Adds `next` (a point of the first space when forth, of the second when
/// back) and a chased realization of its transported type on the other side.
void extend_partial_map(const PointSpacePtr& s1, const PointSpacePtr& s2, PartialMap& map, const Code& next, bool forth,
                        const IsoOptions& opts);

class IsoOracle {
 public:
  IsoOracle(PointSpacePtr s1, PointSpacePtr s2, PartialMap map, unsigned k);
  /// Image of a first-presentation point in the domain, within 2^-k.
  std::optional<Code> map(const Code& p, unsigned k) const;
  /// Preimage of a second-presentation point in the range.
  std::optional<Code> inverse(const Code& q, unsigned k) const;
  const PartialMap& partial_map() const { return map_; }
  nlohmann::ordered_json log() const;
  unsigned precision() const { return k_; }

 private:
  PointSpacePtr s1_, s2_;
  PartialMap map_;
  unsigned k_;
};

/// N alternating steps: step 2t adds point(t) of the first presentation,
/// step 2t+1 adds point(t) of the second.
IsoOracle back_and_forth(PointSpacePtr s1, PointSpacePtr s2, const IsoOptions& opts = {});

}  // namespace randqe
