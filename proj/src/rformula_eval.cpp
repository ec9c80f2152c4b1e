#include <algorithm>
#include <functional>
#include <optional>

#include "randqe/semantics.hpp"

namespace randqe {

Event eval_evterm(const StructureOracle& m, const EvTerm& t, const Assignment& a) {
  switch (t.kind) {
    case EvTerm::Kind::Var: {
      auto it = a.b.find(t.name);
      if (it == a.b.end()) throw PreconditionError("unassigned event variable '" + t.name + "'");
      return it->second;
    }
    case EvTerm::Kind::Top: return Event::full();
    case EvTerm::Kind::Bot: return Event::empty();
    case EvTerm::Kind::Compl: return complement(eval_evterm(m, *t.args[0], a));
    case EvTerm::Kind::Meet: {
      Event e = Event::full();
      for (const auto& s : t.args) e = intersect(e, eval_evterm(m, *s, a));
      return e;
    }
    case EvTerm::Kind::Join: {
      Event e;
      for (const auto& s : t.args) e = unite(e, eval_evterm(m, *s, a));
      return e;
    }
    case EvTerm::Kind::Ev: {
      std::vector<SimpleRV> f;
      for (const auto& k : t.kargs) {
        auto it = a.k.find(k);
        if (it == a.k.end()) throw PreconditionError("unassigned random variable '" + k + "'");
        f.push_back(it->second);
      }
      return event_map(m, *t.formula, t.vars, f);
    }
  }
  return Event::empty();
}

namespace {

Bracket sub_bracket(const Bracket& a, const Bracket& b) { return {truncsub(a.lo, b.hi), truncsub(a.hi, b.lo)}; }

void collect_ev(const EvTerm& t, std::vector<const EvTerm*>& out) {
  if (t.kind == EvTerm::Kind::Ev) out.push_back(&t);
  for (const auto& s : t.args) collect_ev(*s, out);
}

void collect_ev(const RFormula& f, std::vector<const EvTerm*>& out) {
  if (f.term) collect_ev(*f.term, out);
  for (const auto& a : f.args) collect_ev(*a, out);
}

// All vectors of `parts` non-negative integers summing to `total`.
void compositions(std::size_t parts, unsigned total, std::vector<unsigned>& cur,
                  std::vector<std::vector<unsigned>>& out, std::size_t cap) {
  if (out.size() > cap) return;
  if (cur.size() + 1 == parts) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (unsigned t = 0; t <= total; ++t) {
    cur.push_back(t);
    compositions(parts, total - t, cur, out, cap);
    cur.pop_back();
  }
}

class Evaluator {
 public:
  Evaluator(const StructureOracle& m, const EvalOptions& opts) : m_(m), opts_(opts) {}

  Bracket eval(const RFormula& f, Assignment& a) {
    switch (f.kind) {
      case RFormula::Kind::Const: return Bracket::exact(f.value);
      case RFormula::Kind::Mu: return Bracket::exact(measure(eval_evterm(m_, *f.term, a)));
      case RFormula::Kind::Half: {
        Bracket b = eval(*f.args[0], a);
        return {b.lo / 2, b.hi / 2};
      }
      case RFormula::Kind::Sub: return sub_bracket(eval(*f.args[0], a), eval(*f.args[1], a));
      case RFormula::Kind::Apply: {
        std::vector<Bracket> in;
        for (const auto& s : f.args) in.push_back(eval(*s, a));
        Tape tape(f.conn);
        if (tape.exact() && std::all_of(in.begin(), in.end(), [](const Bracket& b) { return b.is_exact(); })) {
          std::vector<Rational> x;
          for (const auto& b : in) x.push_back(b.lo);
          return Bracket::exact(tape.eval(x));
        }
        return tape.eval(in, opts_.tol);
      }
      case RFormula::Kind::Inf:
      case RFormula::Kind::Sup: return f.sort == Sort::B ? event_quantifier(f, a) : rv_quantifier(f, a);
    }
    return {};
  }

 private:
  // Atoms of the algebra generated by the body's free parameters.
  std::vector<RefinedCell> atoms(const RFormula& body, const Assignment& a, Sort sort, const std::string& var,
                                 std::vector<std::string>& knames) {
    FreeVars fv = free_vars(body);
    (sort == Sort::K ? fv.k : fv.b).erase(var);
    std::vector<SimpleRV> rvs;
    std::vector<Event> evs;
    for (const auto& k : fv.k) {
      auto it = a.k.find(k);
      if (it == a.k.end()) throw PreconditionError("unassigned random variable '" + k + "'");
      knames.push_back(k);
      rvs.push_back(it->second);
    }
    for (const auto& b : fv.b) {
      auto it = a.b.find(b);
      if (it == a.b.end()) throw PreconditionError("unassigned event variable '" + b + "'");
      evs.push_back(it->second);
    }
    auto cells = refine(rvs, evs);
    std::erase_if(cells, [](const RefinedCell& c) { return c.event.is_empty(); });
    return cells;
  }

  Bracket combine(bool is_inf, const std::vector<Bracket>& values, const Rational& slack) {
    Bracket r = values.front();
    for (const auto& v : values) {
      if (is_inf) {
        r.lo = std::min(r.lo, v.lo);
        r.hi = std::min(r.hi, v.hi);
      } else {
        r.lo = std::max(r.lo, v.lo);
        r.hi = std::max(r.hi, v.hi);
      }
    }
    if (is_inf)
      r.lo = std::max(Rational(0), Rational(r.lo - slack));
    else
      r.hi = std::min(Rational(1), Rational(r.hi + slack));
    return r;
  }

  // Saves and restores one binding around the search.
  template <class Map, class V>
  struct Scoped {
    Map& map;
    std::string key;
    std::optional<V> old;
    Scoped(Map& m, std::string k) : map(m), key(std::move(k)) {
      if (auto it = map.find(key); it != map.end()) old = it->second;
    }
    ~Scoped() {
      if (old)
        map[key] = *old;
      else
        map.erase(key);
    }
  };

  Bracket event_quantifier(const RFormula& f, Assignment& a) {
    const RFormula& body = *f.args[0];
    std::vector<std::string> knames;
    auto cells = atoms(body, a, Sort::B, f.var, knames);
    const unsigned M = opts_.mesh;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      total *= M + 1;
      if (total > opts_.max_candidates) throw ResourceCap("event quantifier search exceeds the candidate cap");
    }
    Scoped<std::map<std::string, Event>, Event> keep(a.b, f.var);
    std::vector<Bracket> values;
    std::vector<unsigned> idx(cells.size(), 0);
    while (true) {
      Event x;
      for (std::size_t i = 0; i < cells.size(); ++i)
        x = unite(x, sub_event(cells[i].event, measure(cells[i].event) * ratio(idx[i], M)));
      a.b[f.var] = x;
      values.push_back(eval(body, a));
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] > M) idx[i++] = 0;
      if (i == idx.size()) break;
    }
    Rational slack = lipschitz_in(body, Sort::B, f.var) / (2 * M);
    return combine(f.kind == RFormula::Kind::Inf, values, slack);
  }

  Bracket rv_quantifier(const RFormula& f, Assignment& a) {
    const RFormula& body = *f.args[0];
    std::vector<std::string> knames;
    auto cells = atoms(body, a, Sort::K, f.var, knames);
    const unsigned M = opts_.mesh;

    // Elements available on each cell, deduplicated by the truth profile of
    // the event terms mentioning the variable when the body is quantifier-free.
    std::vector<const EvTerm*> evs;
    collect_ev(body, evs);
    std::erase_if(evs, [&](const EvTerm* t) { return !occurs(*t, Sort::K, f.var); });
    const bool dedupe = is_quantifier_free(body);

    std::vector<std::vector<ElementId>> witnesses(cells.size());
    std::vector<std::vector<std::vector<unsigned>>> splits(cells.size());
    Rational slack_mass = 0;
    std::size_t total = 1;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::vector<ElementId> params;
      for (ElementId v : cells[c].values) params.push_back(m_.canonical(v));
      std::sort(params.begin(), params.end());
      params.erase(std::unique(params.begin(), params.end()), params.end());
      auto cand = m_.witness_candidates(params);
      if (dedupe) {
        std::map<std::vector<bool>, ElementId> by_profile;
        for (ElementId w : cand) {
          std::vector<bool> profile;
          for (const EvTerm* t : evs) {
            std::vector<ElementId> vals;
            for (const auto& k : t->kargs) {
              if (k == f.var) {
                vals.push_back(w);
              } else {
                auto pos = std::find(knames.begin(), knames.end(), k) - knames.begin();
                vals.push_back(cells[c].values[static_cast<std::size_t>(pos)]);
              }
            }
            profile.push_back(decide(m_, *t->formula, t->vars, vals));
          }
          by_profile.try_emplace(profile, w);
        }
        cand.clear();
        for (const auto& [p, w] : by_profile) cand.push_back(w);
      }
      witnesses[c] = cand;
      std::vector<unsigned> cur;
      compositions(cand.size(), M, cur, splits[c], opts_.max_candidates);
      total *= splits[c].size();
      if (total > opts_.max_candidates) throw ResourceCap("random-variable quantifier search exceeds the candidate cap");
      slack_mass += measure(cells[c].event) * static_cast<unsigned long>(cand.size() - 1);
    }

    Scoped<std::map<std::string, SimpleRV>, SimpleRV> keep(a.k, f.var);
    std::vector<Bracket> values;
    std::vector<std::size_t> idx(cells.size(), 0);
    const StructurePtr owner = structure_of(a);
    while (true) {
      std::vector<RVCell> pieces;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const Event& e = cells[c].event;
        const Rational mass = measure(e);
        unsigned acc = 0;
        Event prev;
        for (std::size_t j = 0; j < witnesses[c].size(); ++j) {
          acc += splits[c][idx[c]][j];
          Event upto = sub_event(e, mass * ratio(acc, M));
          pieces.push_back({witnesses[c][j], difference(upto, prev)});
          prev = std::move(upto);
        }
      }
      a.k[f.var] = SimpleRV(owner, std::move(pieces));
      values.push_back(eval(body, a));
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] == splits[i].size()) idx[i++] = 0;
      if (i == idx.size()) break;
    }
    Rational slack = lipschitz_in(body, Sort::K, f.var) * slack_mass / M;
    return combine(f.kind == RFormula::Kind::Inf, values, slack);
  }

  // Random variables must refer to the structure they are evaluated in; reuse
  // an existing pointer when there is one.
  StructurePtr structure_of(const Assignment& a) const {
    for (const auto& [name, f] : a.k)
      if (f.structure().get() == &m_) return f.structure();
    return StructurePtr(StructurePtr{}, &m_);
  }

  const StructureOracle& m_;
  const EvalOptions& opts_;
};

}  // namespace

Bracket eval_rformula(const StructureOracle& m, const RFormula& f, const Assignment& a, const EvalOptions& opts) {
  if (opts.mesh == 0) throw PreconditionError("eval: mesh must be positive");
  Assignment work = a;
  Bracket b = Evaluator(m, opts).eval(f, work);
  return {clamp01(b.lo), clamp01(b.hi)};
}

void add_assignment(Assignment& a, std::string_view binding, StructurePtr m) {
  auto eq = binding.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ParseError("assignment must be NAME=literal", 0);
  std::string name(binding.substr(0, eq));
  std::string_view lit = binding.substr(eq + 1);
  auto first = lit.find_first_not_of(" \t");
  bool is_rv = first != std::string_view::npos && lit[first] == '{' && lit.find(':') != std::string_view::npos;
  if (is_rv)
    a.k[name] = parse_rv(lit, std::move(m));
  else
    a.b[name] = parse_event(lit);
}

}  // namespace randqe
