#include "randqe/qe.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

namespace randqe {

namespace {

// ---- names -----------------------------------------------------------------------

void collect_names(const EvTerm& t, std::set<std::string>& out) {
  if (t.kind == EvTerm::Kind::Var) out.insert(t.name);
  for (const auto& k : t.kargs) out.insert(k);
  for (const auto& a : t.args) collect_names(*a, out);
}

void collect_names(const RFormula& f, std::set<std::string>& out) {
  if (!f.var.empty()) out.insert(f.var);
  if (f.term) collect_names(*f.term, out);
  for (const auto& a : f.args) collect_names(*a, out);
}

class Fresh {
 public:
  explicit Fresh(std::set<std::string> used) : used_(std::move(used)) {}
  void reserve(const std::string& s) { used_.insert(s); }
  std::string operator()(const std::string& hint) {
    std::string base = hint;
    auto us = base.find('_');
    if (us != std::string::npos && us > 0) base = base.substr(0, us);
    for (std::size_t k = 1;; ++k) {
      std::string name = base + "_" + std::to_string(k);
      if (used_.insert(name).second) return name;
    }
  }

 private:
  std::set<std::string> used_;
};

// ---- prenex ----------------------------------------------------------------------

// A connective whose DAG is one opaque computable node over its inputs.
bool is_opaque(const RestrictedFn& c) { return c->kind == RNode::Kind::Apply; }

RFormulaPtr expand_connective(const RestrictedFn& conn, const std::vector<RFormulaPtr>& args) {
  std::unordered_map<const RNode*, RFormulaPtr> memo;
  std::function<RFormulaPtr(const RestrictedFn&)> go = [&](const RestrictedFn& v) -> RFormulaPtr {
    if (auto it = memo.find(v.get()); it != memo.end()) return it->second;
    RFormulaPtr out;
    switch (v->kind) {
      case RNode::Kind::Zero: out = rq::zero(); break;
      case RNode::Kind::One: out = rq::one(); break;
      case RNode::Kind::Var: out = args.at(v->index); break;
      case RNode::Kind::Half: out = rq::half(go(v->args[0])); break;
      case RNode::Kind::TruncSub: out = rq::sub(go(v->args[0]), go(v->args[1])); break;
      case RNode::Kind::Const: out = rq::constant(v->value); break;
      case RNode::Kind::Apply: {
        std::vector<RFormulaPtr> sub;
        std::vector<RestrictedFn> vars;
        for (std::size_t i = 0; i < v->args.size(); ++i) {
          sub.push_back(go(v->args[i]));
          vars.push_back(rf::var(i));
        }
        out = rq::apply(rf::apply(v->fn, std::move(vars)), std::move(sub));
        break;
      }
    }
    memo.emplace(v.get(), out);
    return out;
  };
  return go(conn);
}

class Prenexer {
 public:
  explicit Prenexer(Fresh& fresh) : fresh_(fresh) {}

  PrenexForm go(const RFormulaPtr& f) {
    if (is_quantifier_free(*f)) return {{}, f};
    switch (f->kind) {
      case RFormula::Kind::Half: {
        PrenexForm p = go(f->args[0]);
        return {std::move(p.prefix), rq::half(p.matrix)};
      }
      case RFormula::Kind::Sub: {
        PrenexForm a = go(f->args[0]);
        PrenexForm b = go(f->args[1]);
        for (auto q : b.prefix) {
          q.is_inf = !q.is_inf;
          a.prefix.push_back(std::move(q));
        }
        return {std::move(a.prefix), rq::sub(a.matrix, b.matrix)};
      }
      case RFormula::Kind::Apply:
        if (is_opaque(f->conn))
          throw PreconditionError("prenex: quantified argument of an opaque computable connective");
        return go(expand_connective(f->conn, f->args));
      case RFormula::Kind::Inf:
      case RFormula::Kind::Sup: {
        std::string v = fresh_(f->var);
        RFormulaPtr body = f->sort == Sort::B ? substitute(f->args[0], {{f->var, ev::var(v)}})
                                              : substitute(f->args[0], {}, {{f->var, v}});
        PrenexForm p = go(body);
        p.prefix.insert(p.prefix.begin(), Quantifier{f->kind == RFormula::Kind::Inf, f->sort, v});
        return p;
      }
      default: return {{}, f};
    }
  }

 private:
  Fresh& fresh_;
};

// ---- letters and truth -----------------------------------------------------------

bool is_dyadic(const Rational& q) {
  mpz_class d = q.get_den();
  return (d & (d - 1)) == 0;
}

std::string letter_key(const EvTerm& t) { return t.kind == EvTerm::Kind::Var ? t.name : to_string(t); }

void letters_rec(const EvTermPtr& t, std::vector<EvTermPtr>& out, std::set<std::string>& seen) {
  if (t->kind == EvTerm::Kind::Var || t->kind == EvTerm::Kind::Ev) {
    if (seen.insert(letter_key(*t)).second) out.push_back(t);
    return;
  }
  for (const auto& a : t->args) letters_rec(a, out, seen);
}

using Valuation = std::map<std::string, bool>;

bool truth(const EvTerm& t, const Valuation& v) {
  switch (t.kind) {
    case EvTerm::Kind::Top: return true;
    case EvTerm::Kind::Bot: return false;
    case EvTerm::Kind::Var:
    case EvTerm::Kind::Ev: return v.at(letter_key(t));
    case EvTerm::Kind::Compl: return !truth(*t.args[0], v);
    case EvTerm::Kind::Meet:
      return std::all_of(t.args.begin(), t.args.end(), [&](const EvTermPtr& a) { return truth(*a, v); });
    case EvTerm::Kind::Join:
      return std::any_of(t.args.begin(), t.args.end(), [&](const EvTermPtr& a) { return truth(*a, v); });
  }
  return false;
}

void collect_mu(const RFormulaPtr& f, std::vector<EvTermPtr>& out, std::set<std::string>& seen) {
  if (f->kind == RFormula::Kind::Mu) {
    if (seen.insert(to_string(*f->term)).second) out.push_back(f->term);
    return;
  }
  for (const auto& a : f->args) collect_mu(a, out, seen);
}

EvTermPtr atom_term(const std::vector<EvTermPtr>& params, std::size_t k) {
  if (params.empty()) return ev::top();
  std::vector<EvTermPtr> parts;
  for (std::size_t i = 0; i < params.size(); ++i)
    parts.push_back((k >> i) & 1 ? params[i] : ev::compl_(params[i]));
  return ev::meet(std::move(parts));
}

// ---- label elimination -----------------------------------------------------------
//
// The bound event variables take, on each atom Y^k of the parameters, one of a
// finite list of labels (a truth value for every bound variable). Label j may
// be restricted to an allowed event C_j. The mass r_k of atom k is split into
// s_{k,j} over the allowed labels; the last allowed label takes r_k minus the
// others, which range over a group with sum <= r_k.

struct LabelSpec {
  std::vector<std::string> bound;
  std::vector<Valuation> labels;
  std::vector<EvTermPtr> allowed;  // per label; null means unrestricted
};

struct Compiled {
  RestrictedFn base;  // inputs: [group coords][r_0..r_{N-1}][passive]
  std::size_t group_coords = 0;
  std::vector<EvTermPtr> params;
  std::vector<EvTermPtr> atoms;
  std::vector<RFormulaPtr> passive;
  std::vector<std::vector<std::size_t>> allowed;      // per atom, label indices
  std::vector<std::vector<std::size_t>> coord_of;     // per atom, per allowed position (last unused)
};

bool mentions_bound(const EvTerm& t, const LabelSpec& spec) {
  for (const auto& b : spec.bound)
    if (occurs(t, Sort::B, b)) return true;
  return false;
}

Compiled compile(const RFormulaPtr& psi, const LabelSpec& spec, std::optional<std::vector<EvTermPtr>> explicit_params,
                 std::size_t max_params) {
  if (!is_quantifier_free(*psi)) throw PreconditionError("elimination: body is not quantifier-free");
  Compiled c;
  std::vector<EvTermPtr> mus;
  std::set<std::string> seen;
  collect_mu(psi, mus, seen);

  std::set<std::string> bound(spec.bound.begin(), spec.bound.end());
  std::vector<EvTermPtr> params;
  std::set<std::string> pkeys;
  if (explicit_params) {
    params = *explicit_params;
    for (const auto& p : params) pkeys.insert(letter_key(*p));
  }
  for (const auto& t : mus) {
    if (!mentions_bound(*t, spec)) continue;
    std::vector<EvTermPtr> ls;
    std::set<std::string> s;
    letters_rec(t, ls, s);
    for (const auto& l : ls) {
      std::string key = letter_key(*l);
      if (bound.count(key)) continue;
      if (explicit_params && !pkeys.count(key))
        throw PreconditionError("boolean_normal_form: atom letter '" + key + "' is not a parameter");
      if (pkeys.insert(key).second) params.push_back(l);
    }
  }
  for (const auto& a : spec.allowed)
    if (a && pkeys.insert(letter_key(*a)).second) params.push_back(a);
  if (params.size() > max_params)
    throw ResourceCap("elimination: " + std::to_string(params.size()) + " event parameters exceed the cap of " +
                      std::to_string(max_params));
  c.params = params;
  const std::size_t n = params.size();
  const std::size_t N = std::size_t{1} << n;
  for (std::size_t k = 0; k < N; ++k) c.atoms.push_back(atom_term(params, k));

  auto param_valuation = [&](std::size_t k) {
    Valuation v;
    for (std::size_t i = 0; i < n; ++i) v[letter_key(*params[i])] = (k >> i) & 1;
    return v;
  };

  // Allowed labels and group coordinates.
  c.allowed.resize(N);
  c.coord_of.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    Valuation pv = param_valuation(k);
    for (std::size_t j = 0; j < spec.labels.size(); ++j)
      if (!spec.allowed[j] || truth(*spec.allowed[j], pv)) c.allowed[k].push_back(j);
    if (c.allowed[k].empty())
      for (std::size_t j = 0; j < spec.labels.size(); ++j) c.allowed[k].push_back(j);
    for (std::size_t p = 0; p + 1 < c.allowed[k].size(); ++p) c.coord_of[k].push_back(c.group_coords++);
  }
  const std::size_t G = c.group_coords;

  std::map<std::string, std::size_t> passive_index;
  auto r = [&](std::size_t k) { return rf::var(G + k); };
  auto s = [&](std::size_t k, std::size_t pos) { return rf::var(c.coord_of[k][pos]); };

  std::map<std::string, RestrictedFn> mu_memo;
  auto mu_value = [&](const EvTermPtr& t) -> RestrictedFn {
    std::string key = to_string(*t);
    if (auto it = mu_memo.find(key); it != mu_memo.end()) return it->second;
    RestrictedFn out;
    if (mentions_bound(*t, spec)) {
      std::vector<RestrictedFn> pieces;
      for (std::size_t k = 0; k < N; ++k) {
        Valuation v = param_valuation(k);
        const auto& al = c.allowed[k];
        std::vector<bool> holds(al.size());
        std::size_t count = 0;
        for (std::size_t p = 0; p < al.size(); ++p) {
          Valuation w = v;
          for (const auto& [name, val] : spec.labels[al[p]]) w[name] = val;
          holds[p] = truth(*t, w);
          count += holds[p];
        }
        if (count == 0) continue;
        if (count == al.size()) {
          pieces.push_back(r(k));
        } else if (holds.back()) {
          std::vector<RestrictedFn> missing;
          for (std::size_t p = 0; p + 1 < al.size(); ++p)
            if (!holds[p]) missing.push_back(s(k, p));
          pieces.push_back(rf::sub(r(k), rf::sum_of(std::move(missing))));
        } else {
          for (std::size_t p = 0; p + 1 < al.size(); ++p)
            if (holds[p]) pieces.push_back(s(k, p));
        }
      }
      out = rf::sum_of(std::move(pieces));
    } else {
      std::vector<EvTermPtr> ls;
      std::set<std::string> sk;
      letters_rec(t, ls, sk);
      bool boolean_in_params = std::all_of(ls.begin(), ls.end(), [&](const EvTermPtr& l) {
        return pkeys.count(letter_key(*l)) > 0;
      });
      if (boolean_in_params) {
        std::vector<RestrictedFn> pieces;
        for (std::size_t k = 0; k < N; ++k)
          if (truth(*t, param_valuation(k))) pieces.push_back(r(k));
        out = rf::sum_of(std::move(pieces));
      } else {
        auto [it, fresh] = passive_index.try_emplace(key, c.passive.size());
        if (fresh) c.passive.push_back(rq::mu(t));
        out = rf::var(static_cast<std::size_t>(-1) - it->second);
      }
    }
    mu_memo[key] = out;
    return out;
  };

  // Passive inputs are numbered from the top of size_t during compilation and
  // renumbered once their count is known.
  std::unordered_map<const RFormula*, RestrictedFn> memo;
  std::function<RestrictedFn(const RFormulaPtr&)> go = [&](const RFormulaPtr& f) -> RestrictedFn {
    if (auto it = memo.find(f.get()); it != memo.end()) return it->second;
    RestrictedFn out;
    switch (f->kind) {
      case RFormula::Kind::Const: out = is_dyadic(f->value) ? rf::dyadic(f->value) : rf::constant(f->value); break;
      case RFormula::Kind::Mu: out = mu_value(f->term); break;
      case RFormula::Kind::Half: out = rf::half(go(f->args[0])); break;
      case RFormula::Kind::Sub: out = rf::sub(go(f->args[0]), go(f->args[1])); break;
      case RFormula::Kind::Apply: {
        std::vector<RestrictedFn> a;
        for (const auto& x : f->args) a.push_back(go(x));
        out = substitute(f->conn, a);
        break;
      }
      default: throw PreconditionError("elimination: quantifier in body");
    }
    memo.emplace(f.get(), out);
    return out;
  };
  RestrictedFn raw = go(psi);

  // Renumber: passive inputs were numbered down from the top of size_t.
  std::unordered_map<const RNode*, RestrictedFn> rn;
  std::function<RestrictedFn(const RestrictedFn&)> fix = [&](const RestrictedFn& v) -> RestrictedFn {
    if (auto it = rn.find(v.get()); it != rn.end()) return it->second;
    RestrictedFn out;
    if (v->kind == RNode::Kind::Var) {
      std::size_t i = v->index;
      out = i < G + N ? v : rf::var(G + N + (static_cast<std::size_t>(-1) - i));
    } else if (v->args.empty()) {
      out = v;
    } else {
      std::vector<RestrictedFn> a;
      for (const auto& x : v->args) a.push_back(fix(x));
      auto node = std::make_shared<RNode>(*v);
      node->args = std::move(a);
      out = node;
    }
    rn.emplace(v.get(), out);
    return out;
  };
  c.base = fix(raw);
  return c;
}

std::string quantifier_text(const Quantifier& q) {
  return std::string(q.is_inf ? "inf (" : "sup (") + (q.sort == Sort::K ? "K " : "B ") + q.var + ")";
}

nlohmann::ordered_json letters_json(const std::vector<EvTermPtr>& ts) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& t : ts) a.push_back(to_string(*t));
  return a;
}

// inf over labels of psi (or sup, through 1 - inf(1 - psi)), as a formula in
// the atom measures and passive inputs.
RFormulaPtr eliminate(const RFormulaPtr& psi, bool is_inf, const LabelSpec& spec, const Rational& budget,
                      const QEOptions& opts, nlohmann::ordered_json& stage) {
  RFormulaPtr body = is_inf ? psi : rq::neg(psi);
  Compiled c = compile(body, spec, std::nullopt, opts.max_params);
  const std::size_t G = c.group_coords;
  const std::size_t N = c.atoms.size();
  const std::size_t P = c.passive.size();

  // Result in (r_0..r_{N-1}, p).
  RestrictedFn w;
  if (G == 0) {
    w = c.base;
  } else {
    PartialMinSpec ps;
    ps.arity = N + P;
    ps.passive.assign(G + N + P, std::nullopt);
    for (std::size_t i = 0; i < N + P; ++i) ps.passive[G + i] = i;
    for (std::size_t k = 0; k < N; ++k)
      if (!c.coord_of[k].empty()) ps.groups.push_back({c.coord_of[k], k});
    ComputableFnPtr pm = min_fn(make_computable(c.base, G + N + P), ps);
    std::vector<RestrictedFn> vars;
    for (std::size_t i = 0; i < N + P; ++i) vars.push_back(rf::var(G + i));
    w = rf::apply(pm, std::move(vars));
    // Shift down so the inputs are r and p.
    std::vector<RestrictedFn> shift(G + N + P, rf::zero());
    for (std::size_t i = 0; i < N + P; ++i) shift[G + i] = rf::var(i);
    w = substitute(w, shift);
  }
  // The atom measures sum to one: drop r_{N-1}.
  std::vector<RestrictedFn> rs;
  for (std::size_t k = 0; k + 1 < N; ++k) rs.push_back(rf::var(k));
  std::vector<RestrictedFn> in = rs;
  in.push_back(rf::neg(rf::sum_of(rs)));
  for (std::size_t i = 0; i < P; ++i) in.push_back(rf::var(N - 1 + i));
  w = substitute(w, in);
  const std::size_t dim = N - 1 + P;

  bool materialized = false;
  Rational spent = 0;
  if (G > 0) {
    try {
      ApproxOptions ao;
      ao.max_points = opts.max_lattice;
      w = approx_restricted(*make_computable(w, dim), budget, ao);
      materialized = true;
      spent = budget;
    } catch (const ResourceCap&) {
      materialized = false;
    }
  }
  if (!is_inf) w = rf::neg(w);

  std::vector<RFormulaPtr> args;
  for (std::size_t k = 0; k + 1 < N; ++k) args.push_back(rq::mu(c.atoms[k]));
  for (const auto& p : c.passive) args.push_back(p);

  stage["params"] = letters_json(c.params);
  stage["atoms"] = N;
  stage["passive"] = P;
  stage["minimized"] = G;
  stage["dimension"] = dim;
  stage["partial_min"] = materialized ? "restricted approximation" : (G == 0 ? "none" : "computable connective");
  stage["budget"] = to_string(spent);
  return rq::apply(w, std::move(args));
}

LabelSpec event_labels(const std::string& x) {
  LabelSpec s;
  s.bound = {x};
  s.labels = {{{x, true}}, {{x, false}}};
  s.allowed = {nullptr, nullptr};
  return s;
}

}  // namespace

RFormulaPtr PrenexForm::formula() const {
  RFormulaPtr f = matrix;
  for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) f = rq::quant(it->is_inf, it->sort, it->var, f);
  return f;
}

PrenexForm prenex_form(const RFormulaPtr& f) {
  std::set<std::string> used;
  collect_names(*f, used);
  Fresh fresh(std::move(used));
  return Prenexer(fresh).go(f);
}

RFormulaPtr prenex(const RFormulaPtr& f) { return prenex_form(f).formula(); }

std::vector<EvTermPtr> letters(const EvTerm& t) {
  std::vector<EvTermPtr> out;
  std::set<std::string> seen;
  auto self = std::make_shared<const EvTerm>(t);
  letters_rec(self, out, seen);
  return out;
}

NormalForm boolean_normal_form(const RFormulaPtr& psi, const std::string& x, std::vector<EvTermPtr> params) {
  LabelSpec spec = event_labels(x);
  std::optional<std::vector<EvTermPtr>> ex;
  if (!params.empty()) ex = std::move(params);
  Compiled c = compile(psi, spec, ex, 30);
  NormalForm nf;
  nf.u = c.base;
  nf.params = c.params;
  nf.atoms = c.atoms;
  nf.passive = c.passive;
  return nf;
}

QEResult qe_apa(const RFormulaPtr& phi, const Rational& eps, const QEOptions& opts) {
  if (eps <= 0) throw PreconditionError("qe: epsilon must be positive");
  QEResult res;
  res.trace["input"] = to_string(*phi);
  res.trace["epsilon"] = to_string(eps);
  PrenexForm p = prenex_form(phi);
  res.trace["prenex"] = to_string(*p.formula());
  for (const auto& q : p.prefix)
    if (q.sort == Sort::K) throw PreconditionError("qe_apa: random-variable quantifier; use qe_randomization");
  const Rational budget = p.prefix.empty() ? eps : Rational(eps / static_cast<long>(p.prefix.size()));
  RFormulaPtr f = p.matrix;
  Rational spent = 0;
  auto stages = nlohmann::ordered_json::array();
  for (auto it = p.prefix.rbegin(); it != p.prefix.rend(); ++it) {
    nlohmann::ordered_json stage;
    stage["quantifier"] = quantifier_text(*it);
    f = eliminate(f, it->is_inf, event_labels(it->var), budget, opts, stage);
    spent += parse_rational(stage["budget"].get<std::string>());
    stages.push_back(std::move(stage));
  }
  res.trace["stages"] = std::move(stages);
  res.trace["budget_spent"] = to_string(spent);
  res.trace["output"] = to_string(*f);
  res.formula = f;
  return res;
}

// ---- random-variable quantifiers -------------------------------------------------

namespace {

EvTermPtr map_ev(const EvTermPtr& t, const std::function<EvTermPtr(const EvTermPtr&)>& leaf) {
  if (t->kind == EvTerm::Kind::Ev) return leaf(t);
  if (t->args.empty()) return t;
  std::vector<EvTermPtr> a;
  for (const auto& x : t->args) a.push_back(map_ev(x, leaf));
  auto out = std::make_shared<EvTerm>(*t);
  out->args = std::move(a);
  return out;
}

RFormulaPtr map_mu(const RFormulaPtr& f, const std::function<EvTermPtr(const EvTermPtr&)>& leaf,
                   std::unordered_map<const RFormula*, RFormulaPtr>& memo) {
  if (auto it = memo.find(f.get()); it != memo.end()) return it->second;
  auto out = std::make_shared<RFormula>(*f);
  if (f->term) out->term = map_ev(f->term, leaf);
  for (auto& a : out->args) a = map_mu(a, leaf, memo);
  memo.emplace(f.get(), out);
  return out;
}

void collect_ev_terms(const EvTermPtr& t, std::vector<EvTermPtr>& out) {
  if (t->kind == EvTerm::Kind::Ev) out.push_back(t);
  for (const auto& a : t->args) collect_ev_terms(a, out);
}

void collect_ev_terms(const RFormulaPtr& f, std::vector<EvTermPtr>& out) {
  if (f->term) collect_ev_terms(f->term, out);
  for (const auto& a : f->args) collect_ev_terms(a, out);
}

}  // namespace

WitnessRewrite witness_partition_rewrite(const RFormulaPtr& psi1, const std::string& X, const QEOptions& opts) {
  if (!is_quantifier_free(*psi1)) throw PreconditionError("witness_partition_rewrite: body is not quantifier-free");
  WitnessRewrite w;
  w.x = "x";
  std::vector<EvTermPtr> evs;
  collect_ev_terms(psi1, evs);

  // Classical variables named after their K-variable: x for X, y1, y2, ...
  std::map<std::string, std::string> classical{{X, w.x}};
  for (const auto& t : evs)
    for (const auto& k : t->kargs)
      if (!classical.count(k)) {
        std::string name = "y" + std::to_string(w.ys.size() + 1);
        classical[k] = name;
        w.ys.push_back(name);
        w.kargs.push_back(k);
      }

  std::map<std::string, std::size_t> phi_index;
  std::map<const EvTerm*, std::size_t> term_phi;
  for (const auto& t : evs) {
    if (std::find(t->kargs.begin(), t->kargs.end(), X) == t->kargs.end()) continue;
    std::map<std::string, std::string> ren;
    for (std::size_t i = 0; i < t->vars.size(); ++i) ren[t->vars[i]] = classical.at(t->kargs[i]);
    FormulaPtr phi = rename_free(t->formula, ren);
    auto [it, fresh] = phi_index.try_emplace(to_sexpr(*phi), w.phis.size());
    if (fresh) w.phis.push_back(phi);
    term_phi[t.get()] = it->second;
  }
  const std::size_t m = w.phis.size();
  if (m > opts.max_m)
    throw ResourceCap("random-variable quantifier over " + std::to_string(m) + " formulas exceeds the cap m <= " +
                      std::to_string(opts.max_m));
  const std::size_t n = std::size_t{1} << m;

  for (std::size_t j = 0; j < n; ++j) {
    std::vector<FormulaPtr> parts;
    for (std::size_t i = 0; i < m; ++i) parts.push_back((j >> i) & 1 ? fo::neg(w.phis[i]) : w.phis[i]);
    w.thetas.push_back(parts.empty() ? fo::truth() : fo::conj(std::move(parts)));
  }

  std::set<std::string> used;
  collect_names(*psi1, used);
  Fresh fresh(std::move(used));
  for (std::size_t j = 0; j < n; ++j) w.labels.push_back(fresh("B"));

  // [[exists x theta_j]] over the classical variables that stay free.
  for (const auto& th : w.thetas) {
    FormulaPtr ex = fo::exists(w.x, th);
    std::vector<std::string> vars;
    std::vector<std::string> kargs;
    for (const auto& v : free_vars(*ex)) {
      auto pos = std::find(w.ys.begin(), w.ys.end(), v) - w.ys.begin();
      vars.push_back(v);
      kargs.push_back(w.kargs[static_cast<std::size_t>(pos)]);
    }
    w.exists_terms.push_back(ev::holds(ex, std::move(vars), std::move(kargs)));
  }

  std::unordered_map<const RFormula*, RFormulaPtr> memo;
  w.psi3 = map_mu(
      psi1,
      [&](const EvTermPtr& t) -> EvTermPtr {
        auto it = term_phi.find(t.get());
        if (it == term_phi.end()) return t;
        std::vector<EvTermPtr> parts;
        for (std::size_t j = 0; j < n; ++j)
          if (!((j >> it->second) & 1)) parts.push_back(ev::var(w.labels[j]));
        return ev::join(std::move(parts));
      },
      memo);
  if (occurs(*w.psi3, Sort::K, X)) throw PreconditionError("witness_partition_rewrite: variable left outside [[.]]");
  w.Phi = witness_constraint(w.labels, w.exists_terms);
  return w;
}

RFormulaPtr witness_constraint(const std::vector<std::string>& labels, const std::vector<EvTermPtr>& exists_terms) {
  std::vector<EvTermPtr> bs;
  for (const auto& l : labels) bs.push_back(ev::var(l));
  std::vector<RFormulaPtr> terms;
  // sum_i mu(B_i) - mu(union B_i), telescoped so that truncated addition
  // computes it exactly up to the cap at 1.
  std::vector<RFormulaPtr> overlap;
  for (std::size_t i = 1; i < bs.size(); ++i) {
    std::vector<EvTermPtr> before(bs.begin(), bs.begin() + static_cast<long>(i));
    overlap.push_back(rq::mu(ev::meet({bs[i], ev::join(before)})));
  }
  terms.push_back(rq::sum_of(std::move(overlap)));
  terms.push_back(rq::neg(rq::mu(ev::join(bs))));
  for (std::size_t i = 0; i < bs.size(); ++i)
    terms.push_back(rq::sub(rq::mu(bs[i]), rq::mu(ev::meet({bs[i], exists_terms[i]}))));
  return rq::max_of(std::move(terms));
}

unsigned claimdef_constant(std::size_t n) {
  if (n == 0) throw PreconditionError("claimdef_constant: n must be positive");
  std::size_t num = 6 * (n + 1) * (n + 1);
  return static_cast<unsigned>((num + n - 1) / n);
}

RFormulaPtr definable_family_inf(const RFormulaPtr& psi3, const RFormulaPtr& Phi, const std::vector<std::string>& labels) {
  const std::size_t n = labels.size();
  std::set<std::string> used;
  collect_names(*psi3, used);
  collect_names(*Phi, used);
  Fresh fresh(std::move(used));
  std::vector<std::string> primes;
  std::map<std::string, EvTermPtr> to_prime;
  for (const auto& l : labels) {
    primes.push_back(fresh(l + "p"));
    to_prime[l] = ev::var(primes.back());
  }
  std::vector<RFormulaPtr> dist;
  for (std::size_t i = 0; i < n; ++i) dist.push_back(rq::mu(ev::symdiff(ev::var(labels[i]), ev::var(primes[i]))));
  RFormulaPtr inner =
      rq::min(rq::add(rq::scale(claimdef_constant(n), substitute(Phi, to_prime)), rq::sum_of(std::move(dist))), rq::one());
  for (auto it = primes.rbegin(); it != primes.rend(); ++it) inner = rq::inf(Sort::B, *it, inner);

  Rational L = 0;
  for (const auto& l : labels) L = std::max(L, lipschitz_in(*psi3, Sort::B, l));
  mpz_class Lc = ceil(L);
  RFormulaPtr body = rq::add(psi3, rq::scale(static_cast<unsigned>(Lc.get_ui()), inner));
  for (auto it = labels.rbegin(); it != labels.rend(); ++it) body = rq::inf(Sort::B, *it, body);
  return body;
}

Rational witness_constraint_value(std::span<const Event> E, std::span<const Event> C) {
  if (E.size() != C.size()) throw PreconditionError("witness constraint: size mismatch");
  Event all;
  Rational sum = 0;
  for (const auto& e : E) {
    all = unite(all, e);
    sum += measure(e);
  }
  Rational t = std::min(Rational(1), Rational(sum - measure(all)));
  t = std::max(t, Rational(1 - measure(all)));
  for (std::size_t i = 0; i < E.size(); ++i) t = std::max(t, measure(difference(E[i], C[i])));
  return t;
}

std::vector<Event> exists_events(const StructureOracle& m, std::span<const FormulaPtr> thetas, const std::string& x,
                                 std::span<const std::string> ys, std::span<const SimpleRV> f) {
  std::vector<Event> out;
  for (const auto& th : thetas) out.push_back(event_map(m, *fo::exists(x, th), ys, f));
  return out;
}

std::vector<Event> claimdef_repair(std::span<const Event> E, std::span<const Event> C) {
  const std::size_t n = E.size();
  if (C.size() != n || n == 0) throw PreconditionError("claimdef_repair: size mismatch");
  std::vector<Rational> cuts{0, 1};
  auto add_cuts = [&](const Event& e) {
    for (const auto& iv : e.intervals()) {
      cuts.push_back(iv.lo);
      cuts.push_back(iv.hi);
    }
  };
  for (const auto& e : E) add_cuts(e);
  for (const auto& c : C) add_cuts(c);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto member = [](const Event& e, const Rational& p) {
    for (const auto& iv : e.intervals())
      if (iv.lo <= p && p < iv.hi) return true;
    return false;
  };
  std::vector<std::vector<Interval>> parts(n);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    Rational mid = (cuts[k] + cuts[k + 1]) / 2;
    std::optional<std::size_t> held;
    std::optional<std::size_t> admissible;
    for (std::size_t i = 0; i < n; ++i) {
      if (!member(C[i], mid)) continue;
      if (!admissible) admissible = i;
      if (!held && member(E[i], mid)) held = i;
    }
    if (!admissible) throw PreconditionError("claimdef_repair: the existential events do not cover the unit interval");
    parts[held ? *held : *admissible].push_back({cuts[k], cuts[k + 1]});
  }
  std::vector<Event> out;
  for (auto& p : parts) out.push_back(Event::from_intervals(std::move(p)));
  return out;
}

std::vector<Event> claimdef_repair(const StructureOracle& m, std::span<const Event> E, std::span<const SimpleRV> f,
                                   std::span<const FormulaPtr> thetas, const std::string& x,
                                   std::span<const std::string> ys) {
  auto C = exists_events(m, thetas, x, ys, f);
  return claimdef_repair(E, C);
}

QEResult qe_randomization(const RFormulaPtr& phi, const Rational& eps, const QEOptions& opts) {
  if (eps <= 0) throw PreconditionError("qe: epsilon must be positive");
  QEResult res;
  res.trace["input"] = to_string(*phi);
  res.trace["epsilon"] = to_string(eps);
  PrenexForm p = prenex_form(phi);
  res.trace["prenex"] = to_string(*p.formula());
  const Rational budget = p.prefix.empty() ? eps : Rational(eps / static_cast<long>(p.prefix.size()));
  RFormulaPtr f = p.matrix;
  Rational spent = 0;
  auto stages = nlohmann::ordered_json::array();
  for (auto it = p.prefix.rbegin(); it != p.prefix.rend(); ++it) {
    nlohmann::ordered_json stage;
    stage["quantifier"] = quantifier_text(*it);
    if (it->sort == Sort::B) {
      f = eliminate(f, it->is_inf, event_labels(it->var), budget, opts, stage);
    } else {
      WitnessRewrite w = witness_partition_rewrite(f, it->var, opts);
      auto thetas = nlohmann::ordered_json::array();
      for (const auto& th : w.thetas) thetas.push_back(to_sexpr(*th));
      stage["thetas"] = std::move(thetas);
      stage["labels"] = w.labels;
      stage["psi3"] = to_string(*w.psi3);
      stage["Phi"] = to_string(*w.Phi);
      stage["zeta"] = to_string(*definable_family_inf(w.psi3, w.Phi, w.labels));
      LabelSpec spec;
      spec.bound = w.labels;
      for (std::size_t j = 0; j < w.labels.size(); ++j) {
        Valuation v;
        for (std::size_t i = 0; i < w.labels.size(); ++i) v[w.labels[i]] = i == j;
        spec.labels.push_back(std::move(v));
        spec.allowed.push_back(w.exists_terms[j]);
      }
      f = eliminate(w.psi3, it->is_inf, spec, budget, opts, stage);
    }
    spent += parse_rational(stage["budget"].get<std::string>());
    stages.push_back(std::move(stage));
  }
  res.trace["stages"] = std::move(stages);
  res.trace["budget_spent"] = to_string(spent);
  res.trace["output"] = to_string(*f);
  res.formula = f;
  return res;
}

}  // namespace randqe
