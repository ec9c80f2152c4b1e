#pragma once
// Two-sorted restricted formulas: real-valued formulas built from mu of event
// terms, restricted connectives and inf/sup over the event sort (B) or the
// random-variable sort (K). Event terms include [[phi(X1..Xn)]] for classical
// phi; quantifiers inside phi are not sort-level quantifiers.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "randqe/classical.hpp"
#include "randqe/rational.hpp"
#include "randqe/restricted.hpp"

namespace randqe {

enum class Sort { K, B };

struct EvTerm;
using EvTermPtr = std::shared_ptr<const EvTerm>;

struct EvTerm {
  enum class Kind { Var, Top, Bot, Meet, Join, Compl, Ev };
  Kind kind = Kind::Top;
  std::string name;               // Var
  std::vector<EvTermPtr> args;    // Meet, Join, Compl
  FormulaPtr formula;             // Ev
  std::vector<std::string> vars;  // Ev: classical variables, bound positionally
  std::vector<std::string> kargs; // Ev: K-variables
};

namespace ev {
EvTermPtr var(std::string name);
EvTermPtr top();
EvTermPtr bot();
EvTermPtr meet(std::vector<EvTermPtr> ts);
EvTermPtr join(std::vector<EvTermPtr> ts);
EvTermPtr compl_(EvTermPtr t);
/// [[phi]] with phi's variable vars[i] read from K-variable kargs[i].
EvTermPtr holds(FormulaPtr phi, std::vector<std::string> vars, std::vector<std::string> kargs);
/// (a meet not b) join (not a meet b).
EvTermPtr symdiff(EvTermPtr a, EvTermPtr b);
}  // namespace ev

struct RFormula;
using RFormulaPtr = std::shared_ptr<const RFormula>;

struct RFormula {
  enum class Kind { Const, Mu, Half, Sub, Apply, Inf, Sup };
  Kind kind = Kind::Const;
  Rational value;                 // Const
  EvTermPtr term;                 // Mu
  std::vector<RFormulaPtr> args;  // Half, Sub, Apply; Inf/Sup: the body
  RestrictedFn conn;              // Apply: connective of arity args.size()
  Sort sort = Sort::B;            // Inf, Sup
  std::string var;                // Inf, Sup
};

namespace rq {
RFormulaPtr constant(const Rational& q);
RFormulaPtr zero();
RFormulaPtr one();
RFormulaPtr mu(EvTermPtr t);
RFormulaPtr half(RFormulaPtr a);
RFormulaPtr sub(RFormulaPtr a, RFormulaPtr b);
RFormulaPtr apply(RestrictedFn conn, std::vector<RFormulaPtr> args);
RFormulaPtr inf(Sort s, std::string var, RFormulaPtr body);
RFormulaPtr sup(Sort s, std::string var, RFormulaPtr body);
RFormulaPtr quant(bool is_inf, Sort s, std::string var, RFormulaPtr body);
// Macros, expanded into the generators.
RFormulaPtr neg(RFormulaPtr a);
RFormulaPtr add(RFormulaPtr a, RFormulaPtr b);
RFormulaPtr min(RFormulaPtr a, RFormulaPtr b);
RFormulaPtr max(RFormulaPtr a, RFormulaPtr b);
RFormulaPtr max_of(std::vector<RFormulaPtr> xs);
RFormulaPtr sum_of(std::vector<RFormulaPtr> xs);
/// min(1, k * a) by k-fold truncated addition (shared doublings).
RFormulaPtr scale(unsigned k, RFormulaPtr a);
}  // namespace rq

bool is_quantifier_free(const RFormula& f);
/// Number of sort-level quantifiers.
std::size_t quantifier_count(const RFormula& f);

struct FreeVars {
  std::set<std::string> k;
  std::set<std::string> b;
};
FreeVars free_vars(const RFormula& f);
FreeVars free_vars(const EvTerm& t);
bool occurs(const EvTerm& t, Sort s, const std::string& var);
bool occurs(const RFormula& f, Sort s, const std::string& var);

/// Replaces free B-variables by event terms and free K-variables by
/// K-variable names. Bound variables are renamed when they would capture.
RFormulaPtr substitute(const RFormulaPtr& f, const std::map<std::string, EvTermPtr>& bsub,
                       const std::map<std::string, std::string>& ksub = {});
EvTermPtr substitute(const EvTermPtr& t, const std::map<std::string, EvTermPtr>& bsub,
                     const std::map<std::string, std::string>& ksub = {});

/// Structural Lipschitz bound of f in one variable, for d(A,B) = mu(A sym B)
/// on events and d(X,Y) = mu(X != Y) on random variables.
Rational lipschitz_in(const RFormula& f, Sort s, const std::string& var);

/// Grammar: (mu t) (sub r r) (half r) (c0) (c1) (inf (K X) r) (sup (B C) r)
/// (const p/q) (neg r) (add r r) (min r r) (max r r); event terms (meet ...)
/// (join ...) (compl t) (top) (bot) (ev "<formula>" X1 ... Xn) and bare
/// B-variables. In `ev`, the K arguments bind the formula's free variables in
/// order of first occurrence; `(ev "<formula>" (x X) (y Y))` binds explicitly.
RFormulaPtr parse_rformula(std::string_view text, const Signature& sig);
EvTermPtr parse_evterm(std::string_view text, const Signature& sig);

/// Deterministic text. Connectives print as (app <restricted text> args...).
std::string to_string(const RFormula& f);
std::string to_string(const EvTerm& t);

}  // namespace randqe
