#pragma once

// Decidable presentations of countable classical structures.
//
// Quantifiers are evaluated over finite witness sets: every oracle reports,
// for a finite parameter tuple, a list of elements realizing every 1-type
// over those parameters. For the pure set that is the parameters plus one
// fresh element; for DLO the parameters plus one point in each open gap; for
// finite structures the whole universe.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "randqe/classical.hpp"
#include "randqe/rational.hpp"

namespace randqe {

using ElementId = std::uint64_t;

class StructureOracle {
 public:
  virtual ~StructureOracle() = default;

  virtual std::string name() const = 0;
  virtual const Signature& signature() const = 0;

  /// Total labeling of the universe, possibly with repetitions.
  virtual ElementId enumerate(std::uint64_t i) const = 0;
  /// Least index labeling the same element.
  virtual ElementId canonical(ElementId a) const { return a; }
  bool decide_eq(ElementId a, ElementId b) const { return canonical(a) == canonical(b); }

  virtual bool holds(const std::string& relation, std::span<const ElementId> args) const;
  virtual ElementId apply(const std::string& function, std::span<const ElementId> args) const;
  virtual ElementId constant(const std::string& name) const;

  /// Canonical elements covering every 1-type over `params`.
  virtual std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const = 0;

  virtual bool is_decidable() const { return true; }
  virtual bool is_effectively_omega_categorical() const { return false; }
  virtual bool is_effectively_recognizable() const { return false; }
  /// Formulas in the variables (x, y1, ..., yn).
  virtual std::vector<FormulaPtr> isolating_formulas(std::size_t n) const;
  /// Formula in the variable x defining exactly the element a.
  virtual FormulaPtr recognizer(ElementId a) const;

  virtual std::string element_name(ElementId a) const;
  virtual ElementId parse_element(std::string_view text) const;
};

using StructurePtr = std::shared_ptr<const StructureOracle>;

/// Truth of M |= phi(values), with `vars` naming the free variables.
bool decide(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
            std::span<const ElementId> values);
/// Same, restricted to quantifier-free phi; valid for every oracle.
bool qf_decide(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
               std::span<const ElementId> values);
ElementId enumerate_elements(const StructureOracle& m, std::uint64_t i);
std::vector<FormulaPtr> isolating_formulas(const StructureOracle& m, std::size_t n);
FormulaPtr recognizer(const StructureOracle& m, ElementId a);

/// Variable names used by isolating formulas: x, y1, ..., yn.
std::vector<std::string> isolating_vars(std::size_t n);

class PureSet : public StructureOracle {
 public:
  std::string name() const override { return "pureset"; }
  const Signature& signature() const override { return sig_; }
  ElementId enumerate(std::uint64_t i) const override { return i; }
  std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const override;
  bool is_effectively_omega_categorical() const override { return true; }
  std::vector<FormulaPtr> isolating_formulas(std::size_t n) const override;
  std::string element_name(ElementId a) const override;
  ElementId parse_element(std::string_view text) const override;

 private:
  Signature sig_;
};

/// (Q, <) with element i the i-th rational of a fixed Cantor-pairing
/// enumeration (0, then +-(a+1)/(b+1) for (a,b) = unpair(k)).
class Dlo : public StructureOracle {
 public:
  Dlo();
  std::string name() const override { return "dlo"; }
  const Signature& signature() const override { return sig_; }
  ElementId enumerate(std::uint64_t i) const override { return i; }
  ElementId canonical(ElementId a) const override;
  bool holds(const std::string& relation, std::span<const ElementId> args) const override;
  std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const override;
  bool is_effectively_omega_categorical() const override { return true; }
  std::vector<FormulaPtr> isolating_formulas(std::size_t n) const override;
  std::string element_name(ElementId a) const override;
  ElementId parse_element(std::string_view text) const override;

  static Rational value(ElementId a);
  /// Least index of the given rational.
  static ElementId index_of(const Rational& q);

 private:
  Signature sig_;
};

/// Finite structure given by explicit tables. Function tables are row-major
/// over the universe, of length size^arity.
class FiniteStructure : public StructureOracle {
 public:
  struct Table {
    int arity = 0;
    std::vector<ElementId> values;
  };

  FiniteStructure(std::string name, std::size_t size);

  void add_relation(const std::string& rel, int arity, std::vector<std::vector<ElementId>> tuples);
  void add_function(const std::string& fn, int arity, std::vector<ElementId> table);
  void add_constant(const std::string& c, ElementId value);

  std::size_t size() const { return size_; }
  std::string name() const override { return name_; }
  const Signature& signature() const override { return sig_; }
  ElementId enumerate(std::uint64_t i) const override { return i % size_; }
  ElementId canonical(ElementId a) const override { return a % size_; }
  bool holds(const std::string& relation, std::span<const ElementId> args) const override;
  ElementId apply(const std::string& function, std::span<const ElementId> args) const override;
  ElementId constant(const std::string& name) const override;
  std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const override;
  bool is_effectively_omega_categorical() const override;
  bool is_effectively_recognizable() const override;
  std::vector<FormulaPtr> isolating_formulas(std::size_t n) const override;
  FormulaPtr recognizer(ElementId a) const override;
  ElementId parse_element(std::string_view text) const override;

 private:
  std::string name_;
  std::size_t size_;
  Signature sig_;
  std::map<std::string, std::set<std::vector<ElementId>>> relations_;
  std::map<std::string, Table> functions_;
  std::map<std::string, ElementId> constants_;
};

/// Expansion naming every element: constant c<i> denotes enumerate(i).
class NamedExpansion : public StructureOracle {
 public:
  explicit NamedExpansion(StructurePtr base);
  std::string name() const override { return "named:" + base_->name(); }
  const Signature& signature() const override { return sig_; }
  ElementId enumerate(std::uint64_t i) const override { return base_->enumerate(i); }
  ElementId canonical(ElementId a) const override { return base_->canonical(a); }
  bool holds(const std::string& r, std::span<const ElementId> a) const override { return base_->holds(r, a); }
  ElementId apply(const std::string& f, std::span<const ElementId> a) const override { return base_->apply(f, a); }
  ElementId constant(const std::string& name) const override;
  std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const override {
    return base_->witness_candidates(params);
  }
  bool is_effectively_recognizable() const override { return true; }
  FormulaPtr recognizer(ElementId a) const override;
  std::string element_name(ElementId a) const override { return base_->element_name(a); }
  ElementId parse_element(std::string_view t) const override { return base_->parse_element(t); }

 private:
  StructurePtr base_;
  Signature sig_;
};

/// Merely computable view of a structure: only quantifier-free questions.
class QfOnly : public StructureOracle {
 public:
  explicit QfOnly(StructurePtr base) : base_(std::move(base)) {}
  std::string name() const override { return "qf:" + base_->name(); }
  const Signature& signature() const override { return base_->signature(); }
  ElementId enumerate(std::uint64_t i) const override { return base_->enumerate(i); }
  ElementId canonical(ElementId a) const override { return base_->canonical(a); }
  bool holds(const std::string& r, std::span<const ElementId> a) const override { return base_->holds(r, a); }
  ElementId apply(const std::string& f, std::span<const ElementId> a) const override { return base_->apply(f, a); }
  ElementId constant(const std::string& n) const override { return base_->constant(n); }
  std::vector<ElementId> witness_candidates(std::span<const ElementId> params) const override {
    return base_->witness_candidates(params);
  }
  bool is_decidable() const override { return false; }
  std::string element_name(ElementId a) const override { return base_->element_name(a); }
  ElementId parse_element(std::string_view t) const override { return base_->parse_element(t); }

 private:
  StructurePtr base_;
};

/// JSON: {"size": n, "relations": {"R": [[i,j],...]}, "functions": {"f": [...]},
/// "constants": {"c": i}}; optional "arities": {"R": 2} for empty relations.
std::shared_ptr<FiniteStructure> load_finite_structure_json(std::string_view json_text, std::string name);

/// The 3-vertex graph with the single (symmetric) edge {0,1}.
std::shared_ptr<FiniteStructure> make_graph3();
std::shared_ptr<FiniteStructure> make_one_element();

/// Descriptors: pureset, dlo, graph3, one, finite:<path>, named:<descriptor>.
StructurePtr make_structure(std::string_view descriptor);

}  // namespace randqe
