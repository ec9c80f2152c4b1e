#pragma once

// Simple M-valued random variables on [0,1) and the event maps
// [[phi(f1,...,fn)]] = {w : M |= phi(f1(w),...,fn(w))}.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "randqe/classical.hpp"
#include "randqe/event.hpp"
#include "randqe/structures.hpp"

namespace randqe {

struct RVCell {
  ElementId value = 0;
  Event event;
  bool operator==(const RVCell&) const = default;
};

/// Finite partition of [0,1) into events labeled by elements of M. Canonical:
/// labels are least ids, equal labels merged, cells sorted by label.
class SimpleRV {
 public:
  SimpleRV() = default;
  SimpleRV(StructurePtr m, std::vector<RVCell> cells);
  static SimpleRV constant(StructurePtr m, ElementId a);

  const StructurePtr& structure() const { return m_; }
  const std::vector<RVCell>& cells() const { return cells_; }
  /// Mass of {w : f(w) = a}.
  Rational mass(ElementId a) const;

  bool operator==(const SimpleRV& o) const { return m_ == o.m_ && cells_ == o.cells_; }

 private:
  StructurePtr m_;
  std::vector<RVCell> cells_;
};

/// Common refinement of random variables and events: cells on which every
/// variable is constant and every event is either contained or disjoint.
struct RefinedCell {
  std::vector<ElementId> values;
  std::vector<bool> inside;
  Event event;
};
std::vector<RefinedCell> refine(std::span<const SimpleRV> rvs, std::span<const Event> events = {});

/// mu[[f != g]].
Rational rv_dist(const SimpleRV& f, const SimpleRV& g);

/// [[phi(f)]] with `vars[i]` bound to f[i]. Quantified phi needs a decidable
/// oracle.
Event event_map(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
                std::span<const SimpleRV> f);
/// Same, binding the free variables of phi in order of first occurrence.
Event event_map(const StructureOracle& m, const Formula& phi, std::span<const SimpleRV> f);
Rational mu_formula(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
                    std::span<const SimpleRV> f);

/// First element in enumeration order with M |= phi(values, b), b bound to
/// `y`; nullopt when none exists. Raises ResourceCap after `cap` candidates.
std::optional<ElementId> find_witness(const StructureOracle& m, const Formula& phi,
                                      std::span<const std::string> vars, std::span<const ElementId> values,
                                      const std::string& y, std::uint64_t cap = 1u << 20);

/// g with mu([[exists y phi(f,y)]] symdiff [[phi(f,g)]]) = 0.
SimpleRV fullness_witness(const StructureOracle& m, const Formula& phi, std::span<const std::string> xs,
                          const std::string& y, std::span<const SimpleRV> f, const Rational& eps);

/// Nondecreasing rational lower bounds for mu[[exists y phi(f,y)]] using only
/// quantifier-free questions. Stage L maximizes over simple functions constant
/// on the dyadic intervals of length 2^-L with values among the first L+2
/// enumerated elements.
class LeftCeExistential {
 public:
  LeftCeExistential(StructurePtr m, FormulaPtr phi, std::vector<std::string> xs, std::string y,
                    std::vector<SimpleRV> f);
  Rational next();
  std::size_t stage() const { return stage_; }
  const Rational& current() const { return best_; }

  static constexpr std::size_t kMaxLevel = 16;

 private:
  StructurePtr m_;
  FormulaPtr phi_;
  std::vector<std::string> vars_;
  std::vector<RefinedCell> cells_;
  std::size_t stage_ = 0;
  Rational best_ = 0;
};

/// g with [[theta_i(g, f)]] = B_i for all i, given that B partitions [0,1) and
/// B_i is inside [[exists x theta_i(x, f)]].
SimpleRV witness_partition_rv(const StructureOracle& m, std::span<const FormulaPtr> thetas, const std::string& x,
                              std::span<const std::string> ys, std::span<const SimpleRV> f,
                              std::span<const Event> parts);

/// Literal `{e0: [0,1/2); e1: [1/2,1)}`.
SimpleRV parse_rv(std::string_view text, StructurePtr m);
std::string to_string(const SimpleRV& f);

}  // namespace randqe
