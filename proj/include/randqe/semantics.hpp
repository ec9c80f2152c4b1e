#pragma once
// Semantic evaluation of restricted formulas in the randomization of a
// decidable structure, at simple random variables and events.

#include <map>
#include <string>

#include "randqe/random_variable.hpp"
#include "randqe/rformula.hpp"

namespace randqe {

struct Assignment {
  std::map<std::string, SimpleRV> k;
  std::map<std::string, Event> b;
};

struct EvalOptions {
  /// Mass grid 1/mesh used inside each atom when searching quantifiers.
  unsigned mesh = 8;
  /// Largest number of candidates tried for one quantifier.
  std::size_t max_candidates = 1u << 18;
  /// Bracket width requested from computable connective leaves.
  Rational tol = pow2_neg(24);
};

Event eval_evterm(const StructureOracle& m, const EvTerm& t, const Assignment& a);

/// Quantifier-free parts are exact (up to `tol` at computable leaves).
/// inf/sup over events search sub-events of the atoms generated by the free
/// parameters, with masses on the grid 1/mesh of each atom; inf/sup over
/// random variables search, on each atom, mass splits over a set of elements
/// realizing every 1-type over the parameter values there. The reported
/// interval contains the true value: the search gives one side and the
/// structural Lipschitz bound of the body times the grid error the other.
Bracket eval_rformula(const StructureOracle& m, const RFormula& f, const Assignment& a, const EvalOptions& opts = {});

/// Parses `NAME=literal` pairs: a literal starting with '{' and containing ':'
/// is a random variable, anything else an event.
void add_assignment(Assignment& a, std::string_view binding, StructurePtr m);

}  // namespace randqe
