#include "randqe/structures.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace randqe {

// ---- base-class defaults -------------------------------------------------

bool StructureOracle::holds(const std::string& relation, std::span<const ElementId>) const {
  throw PreconditionError("structure " + name() + " has no relation '" + relation + "'");
}

ElementId StructureOracle::apply(const std::string& function, std::span<const ElementId>) const {
  throw PreconditionError("structure " + name() + " has no function '" + function + "'");
}

ElementId StructureOracle::constant(const std::string& c) const {
  throw PreconditionError("structure " + name() + " has no constant '" + c + "'");
}

std::vector<FormulaPtr> StructureOracle::isolating_formulas(std::size_t) const {
  throw PreconditionError("structure " + name() + " is not flagged effectively omega-categorical");
}

FormulaPtr StructureOracle::recognizer(ElementId) const {
  throw PreconditionError("structure " + name() + " is not effectively recognizable");
}

std::string StructureOracle::element_name(ElementId a) const { return std::to_string(canonical(a)); }

namespace {

ElementId parse_index(std::string_view text) {
  if (!text.empty() && text[0] == 'e') text.remove_prefix(1);
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw ParseError("bad element name '" + std::string(text) + "'", 0);
  return std::stoull(std::string(text));
}

}  // namespace

ElementId StructureOracle::parse_element(std::string_view text) const { return canonical(parse_index(text)); }

// ---- evaluation -----------------------------------------------------------

namespace {

class Evaluator {
 public:
  Evaluator(const StructureOracle& m, bool allow_quantifiers) : m_(m), allow_(allow_quantifiers) {}

  void bind(std::span<const std::string> vars, std::span<const ElementId> values) {
    if (vars.size() != values.size()) throw PreconditionError("decide: arity mismatch between variables and values");
    for (std::size_t i = 0; i < vars.size(); ++i) env_.emplace_back(vars[i], m_.canonical(values[i]));
  }

  void collect_constants(const Formula& f) {
    for (const auto& c : constants_used(f)) consts_.push_back(m_.canonical(m_.constant(c)));
  }

  bool eval(const Formula& f) {
    using K = Formula::Kind;
    switch (f.kind) {
      case K::True: return true;
      case K::False: return false;
      case K::Rel: {
        std::vector<ElementId> args;
        for (const auto& t : f.terms) args.push_back(term(t));
        return m_.holds(f.name, args);
      }
      case K::Eq: return term(f.terms[0]) == term(f.terms[1]);
      case K::Not: return !eval(*f.subs[0]);
      case K::And:
        for (const auto& s : f.subs)
          if (!eval(*s)) return false;
        return true;
      case K::Or:
        for (const auto& s : f.subs)
          if (eval(*s)) return true;
        return false;
      case K::Implies: return !eval(*f.subs[0]) || eval(*f.subs[1]);
      case K::Exists:
      case K::Forall: {
        if (!allow_) throw PreconditionError("undecidable request: quantified formula on a qf-only oracle");
        std::vector<ElementId> params = consts_;
        for (const auto& [_, v] : env_) params.push_back(v);
        std::sort(params.begin(), params.end());
        params.erase(std::unique(params.begin(), params.end()), params.end());
        bool want = f.kind == K::Exists;
        for (ElementId c : m_.witness_candidates(params)) {
          env_.emplace_back(f.name, c);
          bool v = eval(*f.subs[0]);
          env_.pop_back();
          if (v == want) return want;
        }
        return !want;
      }
    }
    return false;
  }

 private:
  ElementId term(const Term& t) {
    switch (t.kind) {
      case Term::Kind::Var:
        for (auto it = env_.rbegin(); it != env_.rend(); ++it)
          if (it->first == t.name) return it->second;
        throw PreconditionError("decide: unbound variable '" + t.name + "'");
      case Term::Kind::Const: return m_.canonical(m_.constant(t.name));
      case Term::Kind::Apply: {
        std::vector<ElementId> args;
        for (const auto& a : t.args) args.push_back(term(a));
        return m_.canonical(m_.apply(t.name, args));
      }
    }
    return 0;
  }

  const StructureOracle& m_;
  bool allow_;
  std::vector<std::pair<std::string, ElementId>> env_;
  std::vector<ElementId> consts_;
};

bool run_decide(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
                std::span<const ElementId> values, bool allow) {
  Evaluator ev(m, allow);
  ev.bind(vars, values);
  ev.collect_constants(phi);
  return ev.eval(phi);
}

}  // namespace

bool decide(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
            std::span<const ElementId> values) {
  if (!m.is_decidable() && !is_quantifier_free(phi))
    throw PreconditionError("undecidable request: quantified formula on a qf-only oracle");
  return run_decide(m, phi, vars, values, m.is_decidable());
}

bool qf_decide(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
               std::span<const ElementId> values) {
  if (!is_quantifier_free(phi)) throw PreconditionError("qf_decide: formula has quantifiers");
  return run_decide(m, phi, vars, values, false);
}

ElementId enumerate_elements(const StructureOracle& m, std::uint64_t i) { return m.enumerate(i); }

std::vector<FormulaPtr> isolating_formulas(const StructureOracle& m, std::size_t n) {
  if (!m.is_effectively_omega_categorical())
    throw PreconditionError("structure " + m.name() + " is not flagged effectively omega-categorical");
  return m.isolating_formulas(n);
}

FormulaPtr recognizer(const StructureOracle& m, ElementId a) {
  if (!m.is_effectively_recognizable()) throw PreconditionError("structure " + m.name() + " is not effectively recognizable");
  return m.recognizer(a);
}

std::vector<std::string> isolating_vars(std::size_t n) {
  std::vector<std::string> v{"x"};
  for (std::size_t i = 1; i <= n; ++i) v.push_back("y" + std::to_string(i));
  return v;
}

namespace {

// All set partitions of {0..k-1} with at most max_blocks blocks, as
// restricted growth strings.
std::vector<std::vector<int>> set_partitions(std::size_t k, std::size_t max_blocks) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(k, 0);
  std::function<void(std::size_t, int)> go = [&](std::size_t i, int blocks) {
    if (i == k) {
      out.push_back(rgs);
      return;
    }
    for (int b = 0; b <= blocks && static_cast<std::size_t>(b) < max_blocks; ++b) {
      rgs[i] = b;
      go(i + 1, std::max(blocks, b + 1));
    }
  };
  if (k == 0) return {{}};
  rgs[0] = 0;
  go(1, 1);
  return out;
}

FormulaPtr diagram(const std::vector<std::string>& vars, const std::vector<int>& rank, bool ordered) {
  if (vars.size() == 1) return fo::eq(vars[0], vars[0]);
  std::vector<FormulaPtr> parts;
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      if (rank[i] == rank[j])
        parts.push_back(fo::eq(vars[i], vars[j]));
      else if (!ordered)
        parts.push_back(fo::neg(fo::eq(vars[i], vars[j])));
      else if (rank[i] < rank[j])
        parts.push_back(fo::rel("<", {Term::var(vars[i]), Term::var(vars[j])}));
      else
        parts.push_back(fo::rel("<", {Term::var(vars[j]), Term::var(vars[i])}));
    }
  return fo::conj(std::move(parts));
}

std::vector<FormulaPtr> equality_diagrams(std::size_t n, std::size_t max_blocks) {
  auto vars = isolating_vars(n);
  std::vector<FormulaPtr> out;
  for (const auto& p : set_partitions(vars.size(), max_blocks)) out.push_back(diagram(vars, p, false));
  return out;
}

}  // namespace

// ---- pure set ---------------------------------------------------------------

std::vector<ElementId> PureSet::witness_candidates(std::span<const ElementId> params) const {
  std::vector<ElementId> out(params.begin(), params.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  ElementId fresh = 0;
  while (std::binary_search(out.begin(), out.end(), fresh)) ++fresh;
  out.push_back(fresh);
  return out;
}

std::vector<FormulaPtr> PureSet::isolating_formulas(std::size_t n) const {
  return equality_diagrams(n, n + 1);
}

std::string PureSet::element_name(ElementId a) const { return "e" + std::to_string(a); }

ElementId PureSet::parse_element(std::string_view text) const { return parse_index(text); }

// ---- DLO ------------------------------------------------------------------

namespace {

using u128 = unsigned __int128;

std::pair<std::uint64_t, std::uint64_t> cantor_unpair(std::uint64_t c) {
  // w = floor((sqrt(8c+1) - 1) / 2), corrected for rounding.
  auto tri = [](u128 w) { return w * (w + 1) / 2; };
  u128 w = static_cast<u128>((std::sqrt(8.0L * static_cast<long double>(c) + 1.0L) - 1.0L) / 2.0L);
  while (tri(w) > c) --w;
  while (tri(w + 1) <= c) ++w;
  std::uint64_t b = static_cast<std::uint64_t>(c - tri(w));
  std::uint64_t a = static_cast<std::uint64_t>(w) - b;
  return {a, b};
}

}  // namespace

Dlo::Dlo() { sig_.relations["<"] = 2; }

Rational Dlo::value(ElementId a) {
  if (a == 0) return Rational(0);
  std::uint64_t j = a - 1;
  auto [p, q] = cantor_unpair(j >> 1);
  Rational v(mpz_class(std::to_string(p + 1)), mpz_class(std::to_string(q + 1)));
  v.canonicalize();
  return (j & 1) ? Rational(-v) : v;
}

ElementId Dlo::index_of(const Rational& q) {
  if (q == 0) return 0;
  Rational v = abs(q);
  if (!v.get_num().fits_ulong_p() || !v.get_den().fits_ulong_p())
    throw ResourceCap("dlo: rational too large to index");
  u128 a = v.get_num().get_ui() - 1, b = v.get_den().get_ui() - 1;
  u128 c = (a + b) * (a + b + 1) / 2 + b;
  u128 idx = 2 * c + (q < 0 ? 1 : 0) + 1;
  if (idx >> 63) throw ResourceCap("dlo: element index overflow");
  return static_cast<ElementId>(idx);
}

ElementId Dlo::canonical(ElementId a) const { return index_of(value(a)); }

bool Dlo::holds(const std::string& relation, std::span<const ElementId> args) const {
  if (relation != "<" || args.size() != 2) return StructureOracle::holds(relation, args);
  return value(args[0]) < value(args[1]);
}

std::vector<ElementId> Dlo::witness_candidates(std::span<const ElementId> params) const {
  std::vector<Rational> vals;
  for (auto p : params) vals.push_back(value(p));
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  if (vals.empty()) return {0};
  std::vector<Rational> cands;
  cands.push_back(vals.front() - 1);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    cands.push_back(vals[i]);
    if (i + 1 < vals.size()) cands.push_back((vals[i] + vals[i + 1]) / 2);
  }
  cands.push_back(vals.back() + 1);
  std::vector<ElementId> out;
  for (const auto& c : cands) out.push_back(index_of(c));
  return out;
}

std::vector<FormulaPtr> Dlo::isolating_formulas(std::size_t n) const {
  auto vars = isolating_vars(n);
  std::vector<FormulaPtr> out;
  for (const auto& p : set_partitions(vars.size(), vars.size())) {
    int blocks = *std::max_element(p.begin(), p.end()) + 1;
    std::vector<int> order(blocks);
    std::iota(order.begin(), order.end(), 0);
    do {
      std::vector<int> rank(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) rank[i] = order[p[i]];
      out.push_back(diagram(vars, rank, true));
    } while (std::next_permutation(order.begin(), order.end()));
  }
  return out;
}

std::string Dlo::element_name(ElementId a) const { return to_string(value(a)); }

ElementId Dlo::parse_element(std::string_view text) const {
  if (!text.empty() && text[0] == 'e') return canonical(parse_index(text));
  return index_of(parse_rational(text));
}

// ---- finite structures ------------------------------------------------------

FiniteStructure::FiniteStructure(std::string name, std::size_t size) : name_(std::move(name)), size_(size) {
  if (size == 0) throw PreconditionError("finite structure must be nonempty");
}

void FiniteStructure::add_relation(const std::string& rel, int arity, std::vector<std::vector<ElementId>> tuples) {
  auto& set = relations_[rel];
  for (auto& t : tuples) {
    if (static_cast<int>(t.size()) != arity) throw PreconditionError("relation '" + rel + "': tuple arity mismatch");
    for (auto e : t)
      if (e >= size_) throw PreconditionError("relation '" + rel + "': element out of range");
    set.insert(std::move(t));
  }
  sig_.relations[rel] = arity;
}

void FiniteStructure::add_function(const std::string& fn, int arity, std::vector<ElementId> table) {
  std::size_t expected = 1;
  for (int i = 0; i < arity; ++i) expected *= size_;
  if (table.size() != expected) throw PreconditionError("function '" + fn + "': table is not total");
  for (auto e : table)
    if (e >= size_) throw PreconditionError("function '" + fn + "': value out of range");
  functions_[fn] = Table{arity, std::move(table)};
  sig_.functions[fn] = arity;
}

void FiniteStructure::add_constant(const std::string& c, ElementId value) {
  if (value >= size_) throw PreconditionError("constant '" + c + "': value out of range");
  constants_[c] = value;
  sig_.constants.push_back(c);
}

bool FiniteStructure::holds(const std::string& relation, std::span<const ElementId> args) const {
  auto it = relations_.find(relation);
  if (it == relations_.end()) return StructureOracle::holds(relation, args);
  std::vector<ElementId> key;
  for (auto a : args) key.push_back(a % size_);
  return it->second.count(key) > 0;
}

ElementId FiniteStructure::apply(const std::string& function, std::span<const ElementId> args) const {
  auto it = functions_.find(function);
  if (it == functions_.end()) return StructureOracle::apply(function, args);
  std::size_t idx = 0;
  for (auto a : args) idx = idx * size_ + (a % size_);
  return it->second.values.at(idx);
}

ElementId FiniteStructure::constant(const std::string& name) const {
  auto it = constants_.find(name);
  if (it == constants_.end()) return StructureOracle::constant(name);
  return it->second;
}

std::vector<ElementId> FiniteStructure::witness_candidates(std::span<const ElementId>) const {
  std::vector<ElementId> all(size_);
  std::iota(all.begin(), all.end(), ElementId{0});
  return all;
}

bool FiniteStructure::is_effectively_omega_categorical() const {
  return sig_.relations.empty() && sig_.functions.empty() && sig_.constants.empty();
}

bool FiniteStructure::is_effectively_recognizable() const {
  if (size_ == 1) return true;
  std::set<ElementId> named;
  for (const auto& [_, v] : constants_) named.insert(v);
  return named.size() == size_;
}

std::vector<FormulaPtr> FiniteStructure::isolating_formulas(std::size_t n) const {
  if (!is_effectively_omega_categorical()) return StructureOracle::isolating_formulas(n);
  return equality_diagrams(n, size_);
}

FormulaPtr FiniteStructure::recognizer(ElementId a) const {
  if (size_ == 1) return fo::eq("x", "x");
  for (const auto& [c, v] : constants_)
    if (v == a % size_) return fo::eq(Term::var("x"), Term::constant(c));
  return StructureOracle::recognizer(a);
}

ElementId FiniteStructure::parse_element(std::string_view text) const {
  ElementId e = parse_index(text);
  if (e >= size_) throw ParseError("element out of range for " + name_, 0);
  return e;
}

// ---- named expansion ----------------------------------------------------------

NamedExpansion::NamedExpansion(StructurePtr base) : base_(std::move(base)), sig_(base_->signature()) {
  sig_.numbered_constants = true;
}

ElementId NamedExpansion::constant(const std::string& name) const {
  if (sig_.has_constant(name) && name.size() > 1 && name[0] == 'c' &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return base_->canonical(base_->enumerate(std::stoull(name.substr(1))));
  return base_->constant(name);
}

FormulaPtr NamedExpansion::recognizer(ElementId a) const {
  return fo::eq(Term::var("x"), Term::constant("c" + std::to_string(base_->canonical(a))));
}

// ---- loaders --------------------------------------------------------------------

std::shared_ptr<FiniteStructure> load_finite_structure_json(std::string_view json_text, std::string name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("structure file: ") + e.what(), 0);
  }
  if (!j.contains("size") || !j["size"].is_number_unsigned()) throw PreconditionError("structure file: missing size");
  std::size_t n = j["size"].get<std::size_t>();
  auto m = std::make_shared<FiniteStructure>(std::move(name), n);
  std::map<std::string, int> arities;
  if (j.contains("arities"))
    for (auto& [k, v] : j["arities"].items()) arities[k] = v.get<int>();
  if (j.contains("relations"))
    for (auto& [rel, tuples] : j["relations"].items()) {
      std::vector<std::vector<ElementId>> ts = tuples.get<std::vector<std::vector<ElementId>>>();
      int arity = arities.count(rel) ? arities[rel] : (ts.empty() ? 0 : static_cast<int>(ts[0].size()));
      m->add_relation(rel, arity, std::move(ts));
    }
  if (j.contains("functions"))
    for (auto& [fn, table] : j["functions"].items()) {
      auto vals = table.get<std::vector<ElementId>>();
      int arity = 0;
      if (arities.count(fn)) {
        arity = arities[fn];
      } else {
        std::size_t len = n;
        arity = 1;
        while (len < vals.size() && n > 1) {
          len *= n;
          ++arity;
        }
        if (n == 1) arity = 1;
        if (len != vals.size() && n > 1) throw PreconditionError("function '" + fn + "': table is not total");
      }
      m->add_function(fn, arity, std::move(vals));
    }
  if (j.contains("constants"))
    for (auto& [c, v] : j["constants"].items()) m->add_constant(c, v.get<ElementId>());
  return m;
}

std::shared_ptr<FiniteStructure> make_graph3() {
  auto g = std::make_shared<FiniteStructure>("graph3", 3);
  g->add_relation("E", 2, {{0, 1}, {1, 0}});
  return g;
}

std::shared_ptr<FiniteStructure> make_one_element() { return std::make_shared<FiniteStructure>("one", 1); }

StructurePtr make_structure(std::string_view d) {
  if (d == "pureset") return std::make_shared<PureSet>();
  if (d == "dlo") return std::make_shared<Dlo>();
  if (d == "graph3") return make_graph3();
  if (d == "one") return make_one_element();
  if (d.starts_with("named:")) return std::make_shared<NamedExpansion>(make_structure(d.substr(6)));
  if (d.starts_with("finite:")) {
    std::string path(d.substr(7));
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open structure file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_finite_structure_json(ss.str(), path);
  }
  throw ParseError("unknown structure descriptor '" + std::string(d) + "'", 0);
}

}  // namespace randqe
