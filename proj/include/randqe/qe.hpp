#pragma once
// Quantifier elimination for atomless probability algebras and for
// randomizations: prenex form, Boolean normal form over atom measures,
// elimination of event-sort quantifiers by partial minima, the
// witness-partition rewrite of random-variable quantifiers, the definable
// family formula and its repair procedure.

#include <json.hpp>

#include "randqe/random_variable.hpp"
#include "randqe/rformula.hpp"

namespace randqe {

struct Quantifier {
  bool is_inf = true;
  Sort sort = Sort::B;
  std::string var;
};

struct PrenexForm {
  std::vector<Quantifier> prefix;  // outermost first
  RFormulaPtr matrix;

  RFormulaPtr formula() const;
};

/// Pulls quantifiers through Half (monotone) and TruncSub (monotone left,
/// antitone right, where inf and sup swap). Connective applications with
/// quantified arguments are expanded into Half/TruncSub first; opaque
/// computable leaves must have quantifier-free arguments. Every bound
/// variable is renamed fresh.
PrenexForm prenex_form(const RFormulaPtr& f);
RFormulaPtr prenex(const RFormulaPtr& f);

/// u(s_0..s_{N-1}, r_0..r_{N-1}, p...) with N = 2^n, s_k = mu(x meet Y^k),
/// r_k = mu(Y^k) and Y^k the sign pattern where bit i of k set means y_{i+1}
/// holds. Measures of terms not mentioning x stay as passive inputs p unless
/// they are Boolean in y.
struct NormalForm {
  RestrictedFn u;
  std::vector<EvTermPtr> params;     // y
  std::vector<EvTermPtr> atoms;      // Y^k
  std::vector<RFormulaPtr> passive;  // p
  std::size_t arity() const { return 2 * atoms.size() + passive.size(); }
};

/// Parameters default to the letters occurring together with x in some
/// measure atom, in order of first occurrence. Explicit parameters must cover
/// every letter of those atoms.
NormalForm boolean_normal_form(const RFormulaPtr& psi, const std::string& x, std::vector<EvTermPtr> params = {});

/// Letters of an event term: event variables and [[phi]] terms, deduplicated
/// by text, in order of first occurrence.
std::vector<EvTermPtr> letters(const EvTerm& t);

struct QEOptions {
  /// Largest number of classical formulas phi_i(X, Y) in one random-variable
  /// quantifier (2^m labels).
  std::size_t max_m = 4;
  /// Largest lattice used to replace a partial minimum by a restricted
  /// formula; larger eliminations keep the partial minimum as a computable
  /// connective.
  std::size_t max_lattice = 1u << 14;
  /// Largest number of event parameters in one elimination.
  std::size_t max_params = 10;
};

struct QEResult {
  RFormulaPtr formula;
  nlohmann::ordered_json trace;
};

/// Quantifier elimination over atomless probability algebras. Event-sort
/// quantifiers only; [[phi]] terms count as event parameters.
QEResult qe_apa(const RFormulaPtr& phi, const Rational& eps, const QEOptions& opts = {});

struct WitnessRewrite {
  std::string x;                       // classical variable standing for X
  std::vector<std::string> ys;         // classical variables for the other K-variables
  std::vector<std::string> kargs;      // the K-variables bound to ys
  std::vector<FormulaPtr> phis;        // phi_1..phi_m
  std::vector<FormulaPtr> thetas;      // 2^m sign conjunctions; bit i of j clear: phi_{i+1} positive
  std::vector<std::string> labels;     // fresh event variables B_1..B_{2^m}
  std::vector<EvTermPtr> exists_terms; // [[exists x theta_j]]
  RFormulaPtr psi3;
  RFormulaPtr Phi;
};

WitnessRewrite witness_partition_rewrite(const RFormulaPtr& psi1, const std::string& X, const QEOptions& opts = {});

/// The constraint Phi(B, Y) for labels B and events C_j = [[exists x theta_j]].
RFormulaPtr witness_constraint(const std::vector<std::string>& labels, const std::vector<EvTermPtr>& exists_terms);

/// ceil(6 (n+1)^2 / n).
unsigned claimdef_constant(std::size_t n);

/// inf_B [psi3 (+) alpha(inf_B' Min(beta(Phi(B')) (+) d(B, B'), 1))] with
/// beta(t) = Min(1, c t), c = claimdef_constant(n), alpha(t) = Min(1, L t) for
/// the ceiling L of the Lipschitz constant of psi3 in B.
RFormulaPtr definable_family_inf(const RFormulaPtr& psi3, const RFormulaPtr& Phi, const std::vector<std::string>& labels);

/// Exact Phi(E, f) for the events C_j = [[exists x theta_j(x, f)]].
Rational witness_constraint_value(std::span<const Event> E, std::span<const Event> C);

/// C_j = [[exists x theta_j(x, ys)]] at f.
std::vector<Event> exists_events(const StructureOracle& m, std::span<const FormulaPtr> thetas, const std::string& x,
                                 std::span<const std::string> ys, std::span<const SimpleRV> f);

/// A partition B of the unit interval with B_j inside C_j and
/// sum_j mu(E_j sym B_j) <= (2n+2) Phi(E, f). Each atom of the refinement
/// by E and C goes to the first admissible index that already holds it, else
/// to the first admissible index.
std::vector<Event> claimdef_repair(const StructureOracle& m, std::span<const Event> E, std::span<const SimpleRV> f,
                                   std::span<const FormulaPtr> thetas, const std::string& x,
                                   std::span<const std::string> ys);
std::vector<Event> claimdef_repair(std::span<const Event> E, std::span<const Event> C);

/// Full pipeline for randomizations; the output depends on the formula only.
QEResult qe_randomization(const RFormulaPtr& phi, const Rational& eps, const QEOptions& opts = {});

}  // namespace randqe
