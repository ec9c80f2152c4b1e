#include <doctest.h>

#include "gen.hpp"
#include "randqe/semantics.hpp"

using namespace randqe;

namespace {

Rational q(const char* s) { return parse_rational(s); }

RFormulaPtr pf(const StructureOracle& m, const char* s) { return parse_rformula(s, m.signature()); }

bool contains(const Bracket& b, const Rational& v) { return b.lo <= v && v <= b.hi; }

}  // namespace

TEST_CASE("restricted formula text round-trips") {
  PureSet ps;
  const char* texts[] = {
      "(c1)",
      "(mu (meet A (compl C)))",
      "(sub (mu A) (half (const 1/3)))",
      "(inf (B x) (mu (join (meet x (compl A)) (meet (compl x) A))))",
      "(sup (K X) (mu (ev \"(= x y)\" X Y)))",
      "(max (mu A) (neg (mu C)))",
      "(add (mu A) (mu C))",
      "(min (mu A) (mu (top)))",
      "(inf (K X) (mu (ev \"(= x y)\" (y X) (x Y))))",
  };
  for (const char* t : texts) {
    auto f = pf(ps, t);
    CHECK(to_string(*f) == t);
    CHECK(to_string(*pf(ps, to_string(*f).c_str())) == t);
  }
  CHECK_THROWS_AS(pf(ps, "(mu"), ParseError);
  CHECK_THROWS_AS(pf(ps, "(frob (c0))"), ParseError);
  CHECK_THROWS_AS(pf(ps, "(inf (Q x) (c0))"), ParseError);
}

TEST_CASE("free variables, quantifier counts and substitution") {
  PureSet ps;
  auto f = pf(ps, "(inf (B x) (sub (mu (meet x A)) (mu (ev \"(= x y)\" X Y))))");
  auto fv = free_vars(*f);
  CHECK(fv.b == std::set<std::string>{"A"});
  CHECK(fv.k == std::set<std::string>{"X", "Y"});
  CHECK(quantifier_count(*f) == 1);
  CHECK_FALSE(is_quantifier_free(*f));

  // Substituting A := x must not be captured by the bound x.
  auto g = substitute(f, {{"A", ev::var("x")}});
  auto gv = free_vars(*g);
  CHECK(gv.b == std::set<std::string>{"x"});
  CHECK(g->var != "x");

  auto h = substitute(f, {}, {{"Y", "Z"}});
  CHECK(free_vars(*h).k == std::set<std::string>{"X", "Z"});
}

TEST_CASE("structural Lipschitz bounds") {
  PureSet ps;
  CHECK(lipschitz_in(*pf(ps, "(mu (meet x A))"), Sort::B, "x") == 1);
  CHECK(lipschitz_in(*pf(ps, "(mu A)"), Sort::B, "x") == 0);
  CHECK(lipschitz_in(*pf(ps, "(half (mu x))"), Sort::B, "x") == q("1/2"));
  CHECK(lipschitz_in(*pf(ps, "(sub (mu x) (mu (compl x)))"), Sort::B, "x") == 2);
  CHECK(lipschitz_in(*pf(ps, "(mu (ev \"(= x y)\" X Y))"), Sort::K, "X") == 1);
  CHECK(lipschitz_in(*pf(ps, "(inf (B x) (mu (meet x A)))"), Sort::B, "A") == 1);
}

TEST_CASE("macros evaluate as their definitions") {
  auto ps = std::make_shared<PureSet>();
  Assignment a;
  add_assignment(a, "A=[0, 3/8)", ps);
  add_assignment(a, "C=[1/4, 1)", ps);
  auto val = [&](const char* t) { return eval_rformula(*ps, *pf(*ps, t), a); };
  CHECK(val("(add (mu A) (mu C))").lo == 1);
  CHECK(val("(add (mu A) (half (mu A)))").lo == q("9/16"));
  CHECK(val("(max (mu A) (mu C))").lo == q("3/4"));
  CHECK(val("(min (mu A) (mu C))").lo == q("3/8"));
  CHECK(val("(neg (mu A))").lo == q("5/8"));
  CHECK(val("(sub (mu A) (mu C))").lo == 0);
  Bracket s = eval_rformula(*ps, *rq::scale(3, rq::mu(ev::var("A"))), a);
  CHECK(s.lo == 1);
  CHECK(eval_rformula(*ps, *rq::scale(2, rq::mu(ev::var("A"))), a).lo == q("3/4"));
}

TEST_CASE("evaluation examples") {
  auto ps = std::make_shared<PureSet>();
  Assignment a;
  add_assignment(a, "X={e0: [0,1/2); e1: [1/2,1)}", ps);
  add_assignment(a, "Y={e0: [0,1)}", ps);
  add_assignment(a, "A=[1/8, 5/8)", ps);

  Bracket b = eval_rformula(*ps, *pf(*ps, "(mu (ev \"(= x y)\" X Y))"), a);
  CHECK(b.lo == q("1/2"));
  CHECK(b.hi == q("1/2"));

  CHECK(eval_rformula(*ps, *rq::one(), a).lo == 1);
  CHECK(eval_rformula(*ps, *rq::one(), a).hi == 1);

  EvalOptions opts;
  opts.mesh = 4;
  Bracket inf = eval_rformula(*ps, *pf(*ps, "(inf (B x) (mu (join (meet x (compl A)) (meet (compl x) A))))"), a, opts);
  CHECK(contains(inf, 0));
  CHECK(inf.width() <= q("1/4"));

  // inf over x of max(1/3 - mu(x A), mu(x not A)) equals 1/3 - mu(A) when mu(A) < 1/3, else 0.
  Assignment small;
  add_assignment(small, "A=[0, 1/4)", ps);
  opts.mesh = 16;
  Bracket w = eval_rformula(
      *ps, *pf(*ps, "(inf (B x) (max (sub (const 1/3) (mu (meet x A))) (mu (meet x (compl A)))))"), small, opts);
  CHECK(contains(w, q("1/12")));

  CHECK_THROWS_AS(eval_rformula(*ps, *pf(*ps, "(mu Z)"), a), PreconditionError);
}

TEST_CASE("random-variable quantifiers") {
  auto ps = std::make_shared<PureSet>();
  auto one = make_one_element();
  Assignment a;
  add_assignment(a, "Y={e0: [0,1/3); e1: [1/3,1)}", ps);
  EvalOptions opts;
  opts.mesh = 4;
  auto inf = pf(*ps, "(inf (K X) (mu (ev \"(= x y)\" X Y)))");
  auto sup = pf(*ps, "(sup (K X) (mu (ev \"(= x y)\" X Y)))");
  Bracket lo = eval_rformula(*ps, *inf, a, opts);
  CHECK(contains(lo, 0));
  Bracket hi = eval_rformula(*ps, *sup, a, opts);
  CHECK(contains(hi, 1));

  Assignment b;
  add_assignment(b, "Y={e0: [0,1)}", one);
  Bracket forced = eval_rformula(*one, *inf, b, opts);
  CHECK(forced.lo == 1);
  CHECK(forced.hi == 1);
}

TEST_CASE("evaluation property: brackets are ordered and within [0,1]") {
  auto ps = std::make_shared<PureSet>();
  gen::Rng rng(17);
  const char* bodies[] = {
      "(mu (meet x A))",
      "(sub (mu A) (mu x))",
      "(max (mu (meet x A)) (half (mu (compl x))))",
  };
  EvalOptions opts;
  opts.mesh = 4;
  for (int trial = 0; trial < 20; ++trial) {
    Assignment a;
    a.b["A"] = gen::event(rng, 8);
    for (const char* body : bodies) {
      auto f = pf(*ps, body);
      Bracket i = eval_rformula(*ps, *rq::inf(Sort::B, "x", f), a, opts);
      Bracket s = eval_rformula(*ps, *rq::sup(Sort::B, "x", f), a, opts);
      CHECK(i.lo <= i.hi);
      CHECK(s.lo <= s.hi);
      CHECK(i.lo >= 0);
      CHECK(s.hi <= 1);
      CHECK(i.lo <= s.hi);
      // Sampled witnesses bound the quantifiers from the search side.
      for (int k = 0; k < 3; ++k) {
        Assignment w = a;
        w.b["x"] = gen::event(rng, 8);
        Bracket v = eval_rformula(*ps, *f, w);
        CHECK(i.lo <= v.hi);
        CHECK(v.lo <= s.hi);
      }
    }
  }
}
