#include "randqe/classical.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include <json.hpp>

#include "randqe/rational.hpp"
#include "randqe/sexpr.hpp"

namespace randqe {

bool Signature::has_constant(std::string_view name) const {
  if (std::find(constants.begin(), constants.end(), name) != constants.end()) return true;
  if (numbered_constants && name.size() > 1 && name[0] == 'c')
    return std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  return false;
}

Signature parse_signature_json(std::string_view json_text) {
  Signature sig;
  try {
    auto j = nlohmann::json::parse(json_text);
    if (j.contains("relations"))
      for (auto& [k, v] : j["relations"].items()) sig.relations[k] = v.get<int>();
    if (j.contains("functions"))
      for (auto& [k, v] : j["functions"].items()) sig.functions[k] = v.get<int>();
    if (j.contains("constants"))
      for (auto& c : j["constants"]) sig.constants.push_back(c.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("signature file: ") + e.what(), 0);
  }
  return sig;
}

namespace fo {

namespace {
FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
}  // namespace

FormulaPtr truth() { return make({Formula::Kind::True, {}, {}, {}}); }
FormulaPtr falsity() { return make({Formula::Kind::False, {}, {}, {}}); }
FormulaPtr rel(std::string name, std::vector<Term> args) {
  return make({Formula::Kind::Rel, std::move(name), std::move(args), {}});
}
FormulaPtr eq(Term a, Term b) { return make({Formula::Kind::Eq, {}, {std::move(a), std::move(b)}, {}}); }
FormulaPtr eq(const std::string& a, const std::string& b) { return eq(Term::var(a), Term::var(b)); }
FormulaPtr neg(FormulaPtr f) { return make({Formula::Kind::Not, {}, {}, {std::move(f)}}); }
FormulaPtr conj(std::vector<FormulaPtr> fs) {
  if (fs.size() == 1) return fs[0];
  return make({Formula::Kind::And, {}, {}, std::move(fs)});
}
FormulaPtr disj(std::vector<FormulaPtr> fs) {
  if (fs.size() == 1) return fs[0];
  return make({Formula::Kind::Or, {}, {}, std::move(fs)});
}
FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  return make({Formula::Kind::Implies, {}, {}, {std::move(a), std::move(b)}});
}
FormulaPtr exists(std::string var, FormulaPtr body) {
  return make({Formula::Kind::Exists, std::move(var), {}, {std::move(body)}});
}
FormulaPtr forall(std::string var, FormulaPtr body) {
  return make({Formula::Kind::Forall, std::move(var), {}, {std::move(body)}});
}

}  // namespace fo

namespace {

void term_vars(const Term& t, const std::vector<std::string>& bound, std::vector<std::string>& out) {
  if (t.kind == Term::Kind::Var) {
    if (std::find(bound.begin(), bound.end(), t.name) == bound.end() &&
        std::find(out.begin(), out.end(), t.name) == out.end())
      out.push_back(t.name);
  }
  for (const auto& a : t.args) term_vars(a, bound, out);
}

void collect_free(const Formula& f, std::vector<std::string>& bound, std::vector<std::string>& out) {
  for (const auto& t : f.terms) term_vars(t, bound, out);
  bool binder = f.kind == Formula::Kind::Exists || f.kind == Formula::Kind::Forall;
  if (binder) bound.push_back(f.name);
  for (const auto& s : f.subs) collect_free(*s, bound, out);
  if (binder) bound.pop_back();
}

void all_names(const Formula& f, std::set<std::string>& out) {
  std::function<void(const Term&)> walk = [&](const Term& t) {
    if (t.kind == Term::Kind::Var) out.insert(t.name);
    for (const auto& a : t.args) walk(a);
  };
  for (const auto& t : f.terms) walk(t);
  if (!f.name.empty() && (f.kind == Formula::Kind::Exists || f.kind == Formula::Kind::Forall)) out.insert(f.name);
  for (const auto& s : f.subs) all_names(*s, out);
}

Term rename_term(const Term& t, const std::map<std::string, std::string>& m) {
  if (t.kind == Term::Kind::Var) {
    auto it = m.find(t.name);
    return it == m.end() ? t : Term::var(it->second);
  }
  Term r = t;
  for (auto& a : r.args) a = rename_term(a, m);
  return r;
}

class Renamer {
 public:
  Renamer(std::set<std::string> avoid, bool rename_all_binders)
      : avoid_(std::move(avoid)), all_(rename_all_binders) {}

  FormulaPtr run(const FormulaPtr& f, std::map<std::string, std::string> m) {
    Formula g = *f;
    for (auto& t : g.terms) t = rename_term(t, m);
    if (g.kind == Formula::Kind::Exists || g.kind == Formula::Kind::Forall) {
      bool clash = false;
      for (const auto& [from, to] : m)
        if (to == g.name && from != g.name) clash = true;
      if (all_ || clash) {
        std::string fresh = next_fresh();
        m[g.name] = fresh;
        g.name = fresh;
      } else {
        m.erase(g.name);
      }
    }
    for (auto& s : g.subs) s = run(s, m);
    return std::make_shared<const Formula>(std::move(g));
  }

 private:
  std::string next_fresh() {
    while (true) {
      std::string name = "z" + std::to_string(counter_++);
      if (!avoid_.count(name)) {
        avoid_.insert(name);
        return name;
      }
    }
  }

  std::set<std::string> avoid_;
  bool all_;
  int counter_ = 0;
};

Term parse_term(const SExpr& e, const Signature& sig) {
  if (e.kind == SExpr::Kind::Atom) {
    if (e.text.empty()) throw ParseError("empty term", e.pos);
    if (sig.has_constant(e.text)) return Term::constant(e.text);
    if (sig.functions.count(e.text) && sig.functions.at(e.text) == 0) return Term{Term::Kind::Apply, e.text, {}};
    return Term::var(e.text);
  }
  if (e.kind == SExpr::Kind::String || e.items.empty()) throw ParseError("bad term", e.pos);
  std::string f(e.head());
  auto it = sig.functions.find(f);
  if (it == sig.functions.end()) throw ParseError("unknown function symbol '" + f + "'", e.pos);
  if (static_cast<int>(e.items.size()) - 1 != it->second)
    throw ParseError("arity mismatch for function '" + f + "'", e.pos);
  Term t{Term::Kind::Apply, f, {}};
  for (std::size_t i = 1; i < e.items.size(); ++i) t.args.push_back(parse_term(e.items[i], sig));
  return t;
}

FormulaPtr parse_formula(const SExpr& e, const Signature& sig) {
  if (e.kind == SExpr::Kind::Atom) {
    if (e.text == "true") return fo::truth();
    if (e.text == "false") return fo::falsity();
    auto it = sig.relations.find(e.text);
    if (it != sig.relations.end() && it->second == 0) return fo::rel(e.text, {});
    throw ParseError("expected formula, got '" + e.text + "'", e.pos);
  }
  if (e.kind != SExpr::Kind::List || e.items.empty() || e.items[0].kind != SExpr::Kind::Atom)
    throw ParseError("expected formula", e.pos);
  std::string head(e.head());
  std::size_t n = e.items.size() - 1;
  auto need = [&](std::size_t k) {
    if (n != k) throw ParseError("'" + head + "' expects " + std::to_string(k) + " argument(s)", e.pos);
  };
  if (head == "not") {
    need(1);
    return fo::neg(parse_formula(e.items[1], sig));
  }
  if (head == "and" || head == "or") {
    std::vector<FormulaPtr> subs;
    for (std::size_t i = 1; i <= n; ++i) subs.push_back(parse_formula(e.items[i], sig));
    if (subs.empty()) return head == "and" ? fo::truth() : fo::falsity();
    Formula f{head == "and" ? Formula::Kind::And : Formula::Kind::Or, {}, {}, std::move(subs)};
    return std::make_shared<const Formula>(std::move(f));
  }
  if (head == "implies") {
    need(2);
    return fo::implies(parse_formula(e.items[1], sig), parse_formula(e.items[2], sig));
  }
  if (head == "exists" || head == "forall") {
    need(2);
    if (e.items[1].kind != SExpr::Kind::Atom) throw ParseError("quantifier needs a variable", e.items[1].pos);
    auto body = parse_formula(e.items[2], sig);
    return head == "exists" ? fo::exists(e.items[1].text, body) : fo::forall(e.items[1].text, body);
  }
  if (head == "=") {
    need(2);
    return fo::eq(parse_term(e.items[1], sig), parse_term(e.items[2], sig));
  }
  auto it = sig.relations.find(head);
  if (it == sig.relations.end()) throw ParseError("unknown relation symbol '" + head + "'", e.pos);
  if (static_cast<int>(n) != it->second) throw ParseError("arity mismatch for relation '" + head + "'", e.pos);
  std::vector<Term> args;
  for (std::size_t i = 1; i <= n; ++i) args.push_back(parse_term(e.items[i], sig));
  return fo::rel(head, std::move(args));
}

}  // namespace

std::vector<std::string> free_vars(const Formula& f) {
  std::vector<std::string> bound, out;
  collect_free(f, bound, out);
  return out;
}

bool is_quantifier_free(const Formula& f) { return quantifier_depth(f) == 0; }

int quantifier_depth(const Formula& f) {
  int d = 0;
  for (const auto& s : f.subs) d = std::max(d, quantifier_depth(*s));
  if (f.kind == Formula::Kind::Exists || f.kind == Formula::Kind::Forall) ++d;
  return d;
}

std::vector<std::string> constants_used(const Formula& f) {
  std::vector<std::string> out;
  std::function<void(const Term&)> walk = [&](const Term& t) {
    if (t.kind == Term::Kind::Const && std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    for (const auto& a : t.args) walk(a);
  };
  std::function<void(const Formula&)> go = [&](const Formula& g) {
    for (const auto& t : g.terms) walk(t);
    for (const auto& s : g.subs) go(*s);
  };
  go(f);
  return out;
}

FormulaPtr rename_free(const FormulaPtr& f, const std::map<std::string, std::string>& renaming) {
  std::set<std::string> avoid;
  all_names(*f, avoid);
  for (const auto& [from, to] : renaming) avoid.insert(to);
  return Renamer(std::move(avoid), false).run(f, renaming);
}

FormulaPtr rename_bound(const FormulaPtr& f) {
  std::set<std::string> avoid;
  for (const auto& v : free_vars(*f)) avoid.insert(v);
  return Renamer(std::move(avoid), true).run(f, {});
}

FormulaPtr parse_classical(std::string_view text, const Signature& sig) {
  return parse_formula(parse_sexpr(text), sig);
}

std::string to_sexpr(const Term& t) {
  if (t.kind != Term::Kind::Apply || t.args.empty()) return t.name;
  std::string out = "(" + t.name;
  for (const auto& a : t.args) out += " " + to_sexpr(a);
  return out + ")";
}

std::string to_sexpr(const Formula& f) {
  using K = Formula::Kind;
  auto list = [&](std::string head) {
    std::string out = "(" + head;
    for (const auto& t : f.terms) out += " " + to_sexpr(t);
    for (const auto& s : f.subs) out += " " + to_sexpr(*s);
    return out + ")";
  };
  switch (f.kind) {
    case K::True: return "true";
    case K::False: return "false";
    case K::Rel: return f.terms.empty() ? f.name : list(f.name);
    case K::Eq: return list("=");
    case K::Not: return list("not");
    case K::And: return list("and");
    case K::Or: return list("or");
    case K::Implies: return list("implies");
    case K::Exists: return "(exists " + f.name + " " + to_sexpr(*f.subs[0]) + ")";
    case K::Forall: return "(forall " + f.name + " " + to_sexpr(*f.subs[0]) + ")";
  }
  return "?";
}

}  // namespace randqe
