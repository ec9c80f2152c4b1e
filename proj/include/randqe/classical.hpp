#pragma once

// First-order formulas over a computable signature. Nodes are immutable and
// shared; all rewriting functions return new trees.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace randqe {

struct Signature {
  std::map<std::string, int> relations;
  std::map<std::string, int> functions;
  std::vector<std::string> constants;
  /// Accept every constant of the form c<digits> (constant-naming expansions).
  bool numbered_constants = false;

  bool has_constant(std::string_view name) const;
  bool operator==(const Signature&) const = default;
};

/// JSON shape: {"relations": {"E": 2}, "functions": {"f": 1}, "constants": ["c"]}.
Signature parse_signature_json(std::string_view json_text);

struct Term {
  enum class Kind { Var, Const, Apply };
  Kind kind = Kind::Var;
  std::string name;
  std::vector<Term> args;

  static Term var(std::string n) { return {Kind::Var, std::move(n), {}}; }
  static Term constant(std::string n) { return {Kind::Const, std::move(n), {}}; }
  bool operator==(const Term&) const = default;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { True, False, Rel, Eq, Not, And, Or, Implies, Exists, Forall };
  Kind kind = Kind::True;
  std::string name;  // relation symbol or bound variable
  std::vector<Term> terms;
  std::vector<FormulaPtr> subs;
};

namespace fo {
FormulaPtr truth();
FormulaPtr falsity();
FormulaPtr rel(std::string name, std::vector<Term> args);
FormulaPtr eq(Term a, Term b);
FormulaPtr eq(const std::string& a, const std::string& b);
FormulaPtr neg(FormulaPtr f);
FormulaPtr conj(std::vector<FormulaPtr> fs);
FormulaPtr disj(std::vector<FormulaPtr> fs);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr exists(std::string var, FormulaPtr body);
FormulaPtr forall(std::string var, FormulaPtr body);
}  // namespace fo

/// Free variables in order of first occurrence.
std::vector<std::string> free_vars(const Formula& f);
bool is_quantifier_free(const Formula& f);
int quantifier_depth(const Formula& f);
std::vector<std::string> constants_used(const Formula& f);

/// Capture-avoiding renaming of free variables; bound variables that would
/// clash with a target name are renamed apart.
FormulaPtr rename_free(const FormulaPtr& f, const std::map<std::string, std::string>& renaming);
/// Renames every bound variable to z0, z1, ... (skipping names in use).
FormulaPtr rename_bound(const FormulaPtr& f);

/// Grammar: `(exists y F)`, `(forall y F)`, `(not F)`, `(and F...)`,
/// `(or F...)`, `(implies F G)`, `(= t u)`, `(R t...)`, `true`, `false`.
/// Terms: a bare identifier is a constant if the signature declares it, else a
/// variable; `(f t...)` applies a function symbol.
FormulaPtr parse_classical(std::string_view text, const Signature& sig);
std::string to_sexpr(const Formula& f);
std::string to_sexpr(const Term& t);

}  // namespace randqe
