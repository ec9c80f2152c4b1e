#pragma once

// Random first-order formulas and an independent brute-force evaluator for
// finite structures.

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gen.hpp"
#include "randqe/classical.hpp"
#include "randqe/structures.hpp"

namespace gen {

/// Formula over `sig` whose free variables are among `vars`, with quantifier
/// depth at most `qdepth`.
inline randqe::FormulaPtr formula(Rng& rng, const randqe::Signature& sig, std::vector<std::string> vars, int qdepth,
                                  int size = 3) {
  using namespace randqe;
  auto atom = [&]() -> FormulaPtr {
    auto pick = [&]() { return Term::var(vars[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(vars.size()) - 1))]); };
    std::vector<std::pair<std::string, int>> rels(sig.relations.begin(), sig.relations.end());
    if (vars.empty()) return uniform(rng, 0, 1) ? fo::truth() : fo::falsity();
    if (rels.empty() || uniform(rng, 0, 2) == 0) return fo::eq(pick(), pick());
    auto& [r, k] = rels[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(rels.size()) - 1))];
    std::vector<Term> args;
    for (int i = 0; i < k; ++i) args.push_back(pick());
    return fo::rel(r, std::move(args));
  };
  if (size <= 0) return atom();
  switch (uniform(rng, 0, qdepth > 0 ? 6 : 4)) {
    case 0: return atom();
    case 1: return fo::neg(formula(rng, sig, vars, qdepth, size - 1));
    case 2: return fo::conj({formula(rng, sig, vars, qdepth, size - 1), formula(rng, sig, vars, qdepth, size - 1)});
    case 3: return fo::disj({formula(rng, sig, vars, qdepth, size - 1), formula(rng, sig, vars, qdepth, size - 1)});
    case 4: return fo::implies(formula(rng, sig, vars, qdepth, size - 1), formula(rng, sig, vars, qdepth, size - 1));
    default: {
      std::string v = "q" + std::to_string(qdepth);
      auto inner = vars;
      inner.push_back(v);
      auto body = formula(rng, sig, inner, qdepth - 1, size - 1);
      return uniform(rng, 0, 1) ? fo::exists(v, body) : fo::forall(v, body);
    }
  }
}

/// Direct recursive evaluation over the whole universe of a finite structure.
inline bool brute_force(const randqe::FiniteStructure& m, const randqe::Formula& f,
                        std::map<std::string, randqe::ElementId> env) {
  using K = randqe::Formula::Kind;
  std::function<randqe::ElementId(const randqe::Term&)> term = [&](const randqe::Term& t) -> randqe::ElementId {
    if (t.kind == randqe::Term::Kind::Var) return env.at(t.name);
    if (t.kind == randqe::Term::Kind::Const) return m.constant(t.name);
    std::vector<randqe::ElementId> args;
    for (const auto& a : t.args) args.push_back(term(a));
    return m.apply(t.name, args);
  };
  switch (f.kind) {
    case K::True: return true;
    case K::False: return false;
    case K::Rel: {
      std::vector<randqe::ElementId> args;
      for (const auto& t : f.terms) args.push_back(term(t));
      return m.holds(f.name, args);
    }
    case K::Eq: return term(f.terms[0]) == term(f.terms[1]);
    case K::Not: return !brute_force(m, *f.subs[0], env);
    case K::And:
      return std::all_of(f.subs.begin(), f.subs.end(), [&](const auto& s) { return brute_force(m, *s, env); });
    case K::Or:
      return std::any_of(f.subs.begin(), f.subs.end(), [&](const auto& s) { return brute_force(m, *s, env); });
    case K::Implies: return !brute_force(m, *f.subs[0], env) || brute_force(m, *f.subs[1], env);
    case K::Exists:
    case K::Forall: {
      bool any = false, all = true;
      for (randqe::ElementId a = 0; a < m.size(); ++a) {
        auto e = env;
        e[f.name] = a;
        bool v = brute_force(m, *f.subs[0], e);
        any = any || v;
        all = all && v;
      }
      return f.kind == K::Exists ? any : all;
    }
  }
  return false;
}

}  // namespace gen
