#include "randqe/rformula.hpp"

#include <algorithm>
#include <functional>

#include "randqe/sexpr.hpp"

namespace randqe {

// ---- builders ------------------------------------------------------------------

namespace ev {

namespace {
EvTermPtr make(EvTerm t) { return std::make_shared<const EvTerm>(std::move(t)); }
}  // namespace

EvTermPtr var(std::string name) {
  EvTerm t;
  t.kind = EvTerm::Kind::Var;
  t.name = std::move(name);
  return make(std::move(t));
}
EvTermPtr top() {
  EvTerm t;
  t.kind = EvTerm::Kind::Top;
  return make(std::move(t));
}
EvTermPtr bot() {
  EvTerm t;
  t.kind = EvTerm::Kind::Bot;
  return make(std::move(t));
}
EvTermPtr meet(std::vector<EvTermPtr> ts) {
  if (ts.size() == 1) return ts[0];
  EvTerm t;
  t.kind = EvTerm::Kind::Meet;
  t.args = std::move(ts);
  return make(std::move(t));
}
EvTermPtr join(std::vector<EvTermPtr> ts) {
  if (ts.size() == 1) return ts[0];
  EvTerm t;
  t.kind = EvTerm::Kind::Join;
  t.args = std::move(ts);
  return make(std::move(t));
}
EvTermPtr compl_(EvTermPtr a) {
  EvTerm t;
  t.kind = EvTerm::Kind::Compl;
  t.args = {std::move(a)};
  return make(std::move(t));
}
EvTermPtr holds(FormulaPtr phi, std::vector<std::string> vars, std::vector<std::string> kargs) {
  if (vars.size() != kargs.size()) throw PreconditionError("ev: variable and argument counts differ");
  for (const auto& v : free_vars(*phi))
    if (std::find(vars.begin(), vars.end(), v) == vars.end())
      throw PreconditionError("ev: free variable '" + v + "' is not bound to an argument");
  EvTerm t;
  t.kind = EvTerm::Kind::Ev;
  t.formula = std::move(phi);
  t.vars = std::move(vars);
  t.kargs = std::move(kargs);
  return make(std::move(t));
}
EvTermPtr symdiff(EvTermPtr a, EvTermPtr b) {
  return join({meet({a, compl_(b)}), meet({compl_(a), b})});
}

}  // namespace ev

namespace rq {

namespace {
RFormulaPtr make(RFormula f) { return std::make_shared<const RFormula>(std::move(f)); }
}  // namespace

RFormulaPtr constant(const Rational& q) {
  if (q < 0 || q > 1) throw PreconditionError("constant outside [0,1]");
  RFormula f;
  f.kind = RFormula::Kind::Const;
  f.value = q;
  f.value.canonicalize();
  return make(std::move(f));
}
RFormulaPtr zero() { return constant(0); }
RFormulaPtr one() { return constant(1); }
RFormulaPtr mu(EvTermPtr t) {
  RFormula f;
  f.kind = RFormula::Kind::Mu;
  f.term = std::move(t);
  return make(std::move(f));
}
RFormulaPtr half(RFormulaPtr a) {
  RFormula f;
  f.kind = RFormula::Kind::Half;
  f.args = {std::move(a)};
  return make(std::move(f));
}
RFormulaPtr sub(RFormulaPtr a, RFormulaPtr b) {
  RFormula f;
  f.kind = RFormula::Kind::Sub;
  f.args = {std::move(a), std::move(b)};
  return make(std::move(f));
}
RFormulaPtr apply(RestrictedFn conn, std::vector<RFormulaPtr> args) {
  if (randqe::arity(conn) > args.size()) throw PreconditionError("apply: connective arity exceeds argument count");
  RFormula f;
  f.kind = RFormula::Kind::Apply;
  f.conn = std::move(conn);
  f.args = std::move(args);
  return make(std::move(f));
}
RFormulaPtr quant(bool is_inf, Sort s, std::string var, RFormulaPtr body) {
  RFormula f;
  f.kind = is_inf ? RFormula::Kind::Inf : RFormula::Kind::Sup;
  f.sort = s;
  f.var = std::move(var);
  f.args = {std::move(body)};
  return make(std::move(f));
}
RFormulaPtr inf(Sort s, std::string var, RFormulaPtr body) { return quant(true, s, std::move(var), std::move(body)); }
RFormulaPtr sup(Sort s, std::string var, RFormulaPtr body) { return quant(false, s, std::move(var), std::move(body)); }

RFormulaPtr neg(RFormulaPtr a) { return sub(one(), std::move(a)); }
RFormulaPtr add(RFormulaPtr a, RFormulaPtr b) { return neg(sub(neg(std::move(a)), std::move(b))); }
RFormulaPtr min(RFormulaPtr a, RFormulaPtr b) {
  auto d = sub(a, std::move(b));
  return sub(std::move(a), std::move(d));
}
RFormulaPtr max(RFormulaPtr a, RFormulaPtr b) { return neg(min(neg(std::move(a)), neg(std::move(b)))); }

namespace {
template <class F>
RFormulaPtr fold(std::vector<RFormulaPtr> xs, F f, RFormulaPtr empty) {
  if (xs.empty()) return empty;
  while (xs.size() > 1) {
    std::vector<RFormulaPtr> next;
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) next.push_back(f(xs[i], xs[i + 1]));
    if (xs.size() % 2) next.push_back(xs.back());
    xs = std::move(next);
  }
  return xs[0];
}
}  // namespace

RFormulaPtr max_of(std::vector<RFormulaPtr> xs) { return fold(std::move(xs), max, zero()); }
RFormulaPtr sum_of(std::vector<RFormulaPtr> xs) { return fold(std::move(xs), add, zero()); }

RFormulaPtr scale(unsigned k, RFormulaPtr a) {
  RFormulaPtr acc;
  RFormulaPtr pow = std::move(a);
  while (k > 0) {
    if (k & 1) acc = acc ? add(acc, pow) : pow;
    k >>= 1;
    if (k) pow = add(pow, pow);
  }
  return acc ? acc : zero();
}

}  // namespace rq

// ---- queries --------------------------------------------------------------------

bool is_quantifier_free(const RFormula& f) { return quantifier_count(f) == 0; }

std::size_t quantifier_count(const RFormula& f) {
  std::size_t n = (f.kind == RFormula::Kind::Inf || f.kind == RFormula::Kind::Sup) ? 1 : 0;
  for (const auto& a : f.args) n += quantifier_count(*a);
  return n;
}

namespace {

void collect(const EvTerm& t, FreeVars& out) {
  switch (t.kind) {
    case EvTerm::Kind::Var: out.b.insert(t.name); break;
    case EvTerm::Kind::Ev: out.k.insert(t.kargs.begin(), t.kargs.end()); break;
    default:
      for (const auto& a : t.args) collect(*a, out);
  }
}

void collect(const RFormula& f, FreeVars& out) {
  if (f.kind == RFormula::Kind::Mu) {
    collect(*f.term, out);
    return;
  }
  if (f.kind == RFormula::Kind::Inf || f.kind == RFormula::Kind::Sup) {
    FreeVars inner;
    collect(*f.args[0], inner);
    (f.sort == Sort::K ? inner.k : inner.b).erase(f.var);
    out.k.insert(inner.k.begin(), inner.k.end());
    out.b.insert(inner.b.begin(), inner.b.end());
    return;
  }
  for (const auto& a : f.args) collect(*a, out);
}

}  // namespace

FreeVars free_vars(const EvTerm& t) {
  FreeVars out;
  collect(t, out);
  return out;
}

FreeVars free_vars(const RFormula& f) {
  FreeVars out;
  collect(f, out);
  return out;
}

bool occurs(const EvTerm& t, Sort s, const std::string& var) {
  switch (t.kind) {
    case EvTerm::Kind::Var: return s == Sort::B && t.name == var;
    case EvTerm::Kind::Ev:
      return s == Sort::K && std::find(t.kargs.begin(), t.kargs.end(), var) != t.kargs.end();
    default:
      return std::any_of(t.args.begin(), t.args.end(), [&](const auto& a) { return occurs(*a, s, var); });
  }
}

bool occurs(const RFormula& f, Sort s, const std::string& var) {
  if (f.kind == RFormula::Kind::Mu) return occurs(*f.term, s, var);
  if ((f.kind == RFormula::Kind::Inf || f.kind == RFormula::Kind::Sup) && f.sort == s && f.var == var) return false;
  return std::any_of(f.args.begin(), f.args.end(), [&](const auto& a) { return occurs(*a, s, var); });
}

// ---- substitution ----------------------------------------------------------------

namespace {

void all_names(const EvTerm& t, std::set<std::string>& out) {
  if (t.kind == EvTerm::Kind::Var) out.insert(t.name);
  out.insert(t.kargs.begin(), t.kargs.end());
  for (const auto& a : t.args) all_names(*a, out);
}

void all_names(const RFormula& f, std::set<std::string>& out) {
  if (f.term) all_names(*f.term, out);
  if (!f.var.empty()) out.insert(f.var);
  for (const auto& a : f.args) all_names(*a, out);
}

std::string fresh(const std::string& base, const std::set<std::string>& avoid) {
  for (unsigned k = 1;; ++k) {
    std::string c = base + "_" + std::to_string(k);
    if (!avoid.count(c)) return c;
  }
}

}  // namespace

EvTermPtr substitute(const EvTermPtr& t, const std::map<std::string, EvTermPtr>& bsub,
                     const std::map<std::string, std::string>& ksub) {
  switch (t->kind) {
    case EvTerm::Kind::Var: {
      auto it = bsub.find(t->name);
      return it == bsub.end() ? t : it->second;
    }
    case EvTerm::Kind::Ev: {
      bool changed = false;
      auto kargs = t->kargs;
      for (auto& k : kargs)
        if (auto it = ksub.find(k); it != ksub.end()) {
          k = it->second;
          changed = true;
        }
      return changed ? ev::holds(t->formula, t->vars, std::move(kargs)) : t;
    }
    case EvTerm::Kind::Top:
    case EvTerm::Kind::Bot: return t;
    default: {
      bool changed = false;
      std::vector<EvTermPtr> args;
      for (const auto& a : t->args) {
        args.push_back(substitute(a, bsub, ksub));
        changed = changed || args.back() != a;
      }
      if (!changed) return t;
      EvTerm c = *t;
      c.args = std::move(args);
      return std::make_shared<const EvTerm>(std::move(c));
    }
  }
}

RFormulaPtr substitute(const RFormulaPtr& f, const std::map<std::string, EvTermPtr>& bsub,
                       const std::map<std::string, std::string>& ksub) {
  if (bsub.empty() && ksub.empty()) return f;
  switch (f->kind) {
    case RFormula::Kind::Const: return f;
    case RFormula::Kind::Mu: {
      auto t = substitute(f->term, bsub, ksub);
      return t == f->term ? f : rq::mu(t);
    }
    case RFormula::Kind::Inf:
    case RFormula::Kind::Sup: {
      auto b = bsub;
      auto k = ksub;
      (f->sort == Sort::B ? b.erase(f->var) : k.erase(f->var));
      // Names the substitution may introduce.
      std::set<std::string> incoming;
      for (const auto& [name, t] : b)
        if (occurs(*f->args[0], Sort::B, name)) {
          auto fv = free_vars(*t);
          incoming.insert(fv.b.begin(), fv.b.end());
          incoming.insert(fv.k.begin(), fv.k.end());
        }
      for (const auto& [name, target] : k)
        if (occurs(*f->args[0], Sort::K, name)) incoming.insert(target);
      std::string var = f->var;
      RFormulaPtr body = f->args[0];
      if (incoming.count(var)) {
        std::set<std::string> avoid = incoming;
        all_names(*body, avoid);
        for (const auto& [name, t] : b) avoid.insert(name);
        for (const auto& [name, t] : k) avoid.insert(name);
        var = fresh(f->var, avoid);
        if (f->sort == Sort::B)
          b[f->var] = ev::var(var);
        else
          k[f->var] = var;
      }
      auto nb = substitute(body, b, k);
      if (nb == body && var == f->var) return f;
      return rq::quant(f->kind == RFormula::Kind::Inf, f->sort, var, nb);
    }
    default: {
      bool changed = false;
      std::vector<RFormulaPtr> args;
      for (const auto& a : f->args) {
        args.push_back(substitute(a, bsub, ksub));
        changed = changed || args.back() != a;
      }
      if (!changed) return f;
      RFormula c = *f;
      c.args = std::move(args);
      return std::make_shared<const RFormula>(std::move(c));
    }
  }
}

// ---- Lipschitz ----------------------------------------------------------------------

Rational lipschitz_in(const RFormula& f, Sort s, const std::string& var) {
  std::map<const RFormula*, Rational> memo;
  std::function<Rational(const RFormula&)> go = [&](const RFormula& g) -> Rational {
    if (auto it = memo.find(&g); it != memo.end()) return it->second;
    Rational r = 0;
    switch (g.kind) {
      case RFormula::Kind::Const: break;
      case RFormula::Kind::Mu: r = occurs(*g.term, s, var) ? 1 : 0; break;
      case RFormula::Kind::Half: r = go(*g.args[0]) / 2; break;
      case RFormula::Kind::Sub: {
        const auto& a = g.args[0];
        const auto& b = g.args[1];
        // a - (a - c) is min(a, c).
        if (b->kind == RFormula::Kind::Sub && b->args[0] == a)
          r = std::max(go(*a), go(*b->args[1]));
        else
          r = go(*a) + go(*b);
        break;
      }
      case RFormula::Kind::Apply: {
        auto lip = lipschitz_vector(g.conn, g.args.size());
        for (std::size_t i = 0; i < g.args.size(); ++i)
          if (lip[i] != 0) r += lip[i] * go(*g.args[i]);
        break;
      }
      case RFormula::Kind::Inf:
      case RFormula::Kind::Sup:
        if (!(g.sort == s && g.var == var)) r = go(*g.args[0]);
        break;
    }
    memo[&g] = r;
    return r;
  };
  return go(f);
}

// ---- parsing -----------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(const Signature& sig) : sig_(sig) {}

  EvTermPtr term(const SExpr& e) {
    if (e.is_atom()) {
      if (e.text.empty()) throw ParseError("empty event variable", e.pos);
      return ev::var(e.text);
    }
    if (!e.is_list()) throw ParseError("expected an event term", e.pos);
    auto h = e.head();
    if (h == "top" || h == "bot") {
      arity(e, 0);
      return h == "top" ? ev::top() : ev::bot();
    }
    if (h == "compl") {
      arity(e, 1);
      return ev::compl_(term(e.items[1]));
    }
    if (h == "meet" || h == "join") {
      if (e.items.size() < 2) throw ParseError(std::string(h) + " needs at least one argument", e.pos);
      std::vector<EvTermPtr> ts;
      for (std::size_t i = 1; i < e.items.size(); ++i) ts.push_back(term(e.items[i]));
      return h == "meet" ? ev::meet(std::move(ts)) : ev::join(std::move(ts));
    }
    if (h == "ev") {
      if (e.items.size() < 2 || e.items[1].kind != SExpr::Kind::String)
        throw ParseError("ev expects a quoted classical formula", e.pos);
      FormulaPtr phi;
      try {
        phi = parse_classical(e.items[1].text, sig_);
      } catch (const ParseError& err) {
        throw ParseError(std::string("in ev formula: ") + err.what(), e.items[1].pos);
      }
      std::vector<std::string> vars, kargs;
      bool explicit_binding = e.items.size() > 2 && e.items[2].is_list();
      if (explicit_binding) {
        for (std::size_t i = 2; i < e.items.size(); ++i) {
          const auto& b = e.items[i];
          if (!b.is_list() || b.items.size() != 2 || !b.items[0].is_atom() || !b.items[1].is_atom())
            throw ParseError("ev binding must be (var K)", b.pos);
          vars.push_back(b.items[0].text);
          kargs.push_back(b.items[1].text);
        }
      } else {
        vars = free_vars(*phi);
        for (std::size_t i = 2; i < e.items.size(); ++i) {
          if (!e.items[i].is_atom()) throw ParseError("ev argument must be a K-variable", e.items[i].pos);
          kargs.push_back(e.items[i].text);
        }
        if (vars.size() != kargs.size())
          throw ParseError("ev: formula has " + std::to_string(vars.size()) + " free variables but " +
                               std::to_string(kargs.size()) + " arguments were given",
                           e.pos);
      }
      try {
        return ev::holds(phi, vars, kargs);
      } catch (const PreconditionError& err) {
        throw ParseError(err.what(), e.pos);
      }
    }
    throw ParseError("unknown event term '" + std::string(h) + "'", e.pos);
  }

  RFormulaPtr formula(const SExpr& e) {
    if (!e.is_list() || e.head().empty()) throw ParseError("expected a formula", e.pos);
    auto h = e.head();
    if (h == "c0" || h == "c1") {
      arity(e, 0);
      return h == "c0" ? rq::zero() : rq::one();
    }
    if (h == "const") {
      arity(e, 1);
      if (!e.items[1].is_atom()) throw ParseError("const expects a rational", e.items[1].pos);
      Rational q;
      try {
        q = parse_rational(e.items[1].text);
      } catch (const ParseError&) {
        throw ParseError("malformed rational '" + e.items[1].text + "'", e.items[1].pos);
      }
      if (q < 0 || q > 1) throw ParseError("constant outside [0,1]", e.items[1].pos);
      return rq::constant(q);
    }
    if (h == "mu") {
      arity(e, 1);
      return rq::mu(term(e.items[1]));
    }
    if (h == "half" || h == "neg") {
      arity(e, 1);
      auto a = formula(e.items[1]);
      return h == "half" ? rq::half(a) : rq::neg(a);
    }
    if (h == "sub" || h == "add" || h == "min" || h == "max") {
      arity(e, 2);
      auto a = formula(e.items[1]);
      auto b = formula(e.items[2]);
      if (h == "sub") return rq::sub(a, b);
      if (h == "add") return rq::add(a, b);
      if (h == "min") return rq::min(a, b);
      return rq::max(a, b);
    }
    if (h == "inf" || h == "sup") {
      arity(e, 2);
      const auto& b = e.items[1];
      if (!b.is_list() || b.items.size() != 2 || !b.items[0].is_atom() || !b.items[1].is_atom() ||
          (b.items[0].text != "K" && b.items[0].text != "B"))
        throw ParseError("binder must be (K X) or (B C)", b.pos);
      Sort s = b.items[0].text == "K" ? Sort::K : Sort::B;
      return rq::quant(h == "inf", s, b.items[1].text, formula(e.items[2]));
    }
    if (h == "app") {
      if (e.items.size() < 2) throw ParseError("app expects a connective", e.pos);
      RestrictedFn conn = restricted(e.items[1]);
      std::vector<RFormulaPtr> args;
      for (std::size_t i = 2; i < e.items.size(); ++i) args.push_back(formula(e.items[i]));
      if (randqe::arity(conn) > args.size()) throw ParseError("app: too few arguments for the connective", e.pos);
      return rq::apply(conn, std::move(args));
    }
    throw ParseError("unknown formula head '" + std::string(h) + "'", e.pos);
  }

  // Restricted connective text as printed by to_text.
  RestrictedFn restricted(const SExpr& e) {
    std::map<std::string, RestrictedFn> lets;
    std::function<RestrictedFn(const SExpr&)> go = [&](const SExpr& x) -> RestrictedFn {
      if (x.is_atom()) {
        if (x.text == "0") return rf::zero();
        if (x.text == "1") return rf::one();
        if (x.text.size() > 1 && x.text[0] == 'x' &&
            std::all_of(x.text.begin() + 1, x.text.end(), [](char c) { return c >= '0' && c <= '9'; }))
          return rf::var(std::stoul(x.text.substr(1)));
        if (auto it = lets.find(x.text); it != lets.end()) return it->second;
        throw ParseError("unknown connective atom '" + x.text + "'", x.pos);
      }
      if (!x.is_list()) throw ParseError("expected a connective", x.pos);
      auto h = x.head();
      if (h == "sub") {
        arity(x, 2);
        return rf::sub(go(x.items[1]), go(x.items[2]));
      }
      if (h == "half") {
        arity(x, 1);
        return rf::half(go(x.items[1]));
      }
      if (h == "const") {
        arity(x, 1);
        return rf::constant(parse_rational(x.items[1].text));
      }
      if (h == "let") {
        arity(x, 2);
        if (!x.items[1].is_list()) throw ParseError("let expects bindings", x.items[1].pos);
        for (const auto& b : x.items[1].items) {
          if (!b.is_list() || b.items.size() != 2 || !b.items[0].is_atom())
            throw ParseError("malformed let binding", b.pos);
          lets[b.items[0].text] = go(b.items[1]);
        }
        return go(x.items[2]);
      }
      throw ParseError("connective '" + std::string(h) + "' cannot be parsed", x.pos);
    };
    return go(e);
  }

 private:
  static void arity(const SExpr& e, std::size_t n) {
    if (e.items.size() != n + 1)
      throw ParseError(std::string(e.head()) + " expects " + std::to_string(n) + " argument(s)", e.pos);
  }

  const Signature& sig_;
};

// Recognizes the macro shapes produced by rq:: so that printing stays compact.
bool is_one(const RFormulaPtr& f) { return f->kind == RFormula::Kind::Const && f->value == 1; }
bool is_sub(const RFormulaPtr& f) { return f->kind == RFormula::Kind::Sub; }
bool is_neg(const RFormulaPtr& f) { return is_sub(f) && is_one(f->args[0]); }
// a - (a - b) with shared a.
bool is_min(const RFormulaPtr& f) { return is_sub(f) && is_sub(f->args[1]) && f->args[1]->args[0] == f->args[0]; }

}  // namespace

RFormulaPtr parse_rformula(std::string_view text, const Signature& sig) {
  return Parser(sig).formula(parse_sexpr(text));
}

EvTermPtr parse_evterm(std::string_view text, const Signature& sig) { return Parser(sig).term(parse_sexpr(text)); }

std::string to_string(const EvTerm& t) {
  switch (t.kind) {
    case EvTerm::Kind::Var: return t.name;
    case EvTerm::Kind::Top: return "(top)";
    case EvTerm::Kind::Bot: return "(bot)";
    case EvTerm::Kind::Compl: return "(compl " + to_string(*t.args[0]) + ")";
    case EvTerm::Kind::Meet:
    case EvTerm::Kind::Join: {
      std::string out = t.kind == EvTerm::Kind::Meet ? "(meet" : "(join";
      for (const auto& a : t.args) out += " " + to_string(*a);
      return out + ")";
    }
    case EvTerm::Kind::Ev: {
      std::string out = "(ev " + quote_string(to_sexpr(*t.formula));
      if (free_vars(*t.formula) == t.vars) {
        for (const auto& k : t.kargs) out += " " + k;
      } else {
        for (std::size_t i = 0; i < t.vars.size(); ++i) out += " (" + t.vars[i] + " " + t.kargs[i] + ")";
      }
      return out + ")";
    }
  }
  return "";
}

std::string to_string(const RFormula& f) {
  std::function<std::string(const RFormulaPtr&)> go = [&](const RFormulaPtr& g) -> std::string {
    switch (g->kind) {
      case RFormula::Kind::Const:
        if (g->value == 0) return "(c0)";
        if (g->value == 1) return "(c1)";
        return "(const " + to_string(g->value) + ")";
      case RFormula::Kind::Mu: return "(mu " + to_string(*g->term) + ")";
      case RFormula::Kind::Half: return "(half " + go(g->args[0]) + ")";
      case RFormula::Kind::Sub: {
        const auto& a = g->args[0];
        const auto& b = g->args[1];
        // max(p, q) = neg(min(neg p, neg q))
        if (is_one(a) && is_min(b) && is_neg(b->args[0]) && is_neg(b->args[1]->args[1]))
          return "(max " + go(b->args[0]->args[1]) + " " + go(b->args[1]->args[1]->args[1]) + ")";
        // add(p, q) = neg(neg p - q)
        if (is_one(a) && is_sub(b) && is_neg(b->args[0]))
          return "(add " + go(b->args[0]->args[1]) + " " + go(b->args[1]) + ")";
        if (is_one(a)) return "(neg " + go(b) + ")";
        if (is_min(g)) return "(min " + go(a) + " " + go(b->args[1]) + ")";
        return "(sub " + go(a) + " " + go(b) + ")";
      }
      case RFormula::Kind::Apply: {
        std::string out = "(app " + to_text(g->conn);
        for (const auto& a : g->args) out += " " + go(a);
        return out + ")";
      }
      case RFormula::Kind::Inf:
      case RFormula::Kind::Sup:
        return std::string(g->kind == RFormula::Kind::Inf ? "(inf (" : "(sup (") + (g->sort == Sort::K ? "K " : "B ") +
               g->var + ") " + go(g->args[0]) + ")";
    }
    return "";
  };
  return go(std::make_shared<const RFormula>(f));
}

}  // namespace randqe
