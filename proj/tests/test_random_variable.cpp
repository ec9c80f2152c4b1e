#include <doctest.h>

#include "formula_gen.hpp"
#include "gen.hpp"
#include "randqe/random_variable.hpp"

using namespace randqe;

namespace {

Rational q(const char* s) { return parse_rational(s); }
Event ev(const char* s) { return parse_event(s); }

FormulaPtr fml(const StructureOracle& m, const char* s) { return parse_classical(s, m.signature()); }

// Independent evaluation: sample the midpoint of every elementary interval
// between breakpoints and ask decide directly.
Rational brute_mu(const StructureOracle& m, const Formula& phi, const std::vector<std::string>& vars,
                  const std::vector<SimpleRV>& f) {
  std::vector<Rational> cuts{0, 1};
  for (const auto& g : f)
    for (const auto& c : g.cells())
      for (const auto& iv : c.event.intervals()) {
        cuts.push_back(iv.lo);
        cuts.push_back(iv.hi);
      }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Rational total = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    Rational mid = (cuts[k] + cuts[k + 1]) / 2;
    std::vector<ElementId> vals;
    for (const auto& g : f)
      for (const auto& c : g.cells())
        for (const auto& iv : c.event.intervals())
          if (iv.lo <= mid && mid < iv.hi) vals.push_back(c.value);
    if (decide(m, phi, vars, vals)) total += cuts[k + 1] - cuts[k];
  }
  return total;
}

}  // namespace

TEST_CASE("canonical simple random variables") {
  StructurePtr g = make_graph3();
  SimpleRV f(g, {{4, ev("[0,1/4)")}, {1, ev("[1/4,1/2)")}, {0, ev("[1/2,1)")}});
  REQUIRE(f.cells().size() == 2);
  CHECK(f.cells()[0].value == 0);
  CHECK(f.cells()[1].event == ev("[0,1/2)"));
  CHECK(f.mass(1) == q("1/2"));
  CHECK_THROWS_AS(SimpleRV(g, {{0, ev("[0,1/2)")}}), PreconditionError);
  CHECK_THROWS_AS(SimpleRV(g, {{0, ev("[0,3/4)")}, {1, ev("[1/2,1)")}}), PreconditionError);
}

TEST_CASE("rv_dist") {
  StructurePtr ps = std::make_shared<PureSet>();
  auto f = parse_rv("{e0: [0,1/2); e1: [1/2,1)}", ps);
  auto g = SimpleRV::constant(ps, 0);
  CHECK(rv_dist(f, g) == q("1/2"));
  CHECK(rv_dist(f, f) == 0);
  CHECK(rv_dist(SimpleRV::constant(ps, 0), SimpleRV::constant(ps, 1)) == 1);
  CHECK_THROWS_AS(rv_dist(f, SimpleRV::constant(std::make_shared<PureSet>(), 0)), PreconditionError);
}

TEST_CASE("rv_dist is a metric") {
  gen::Rng rng(41);
  StructurePtr ps = std::make_shared<PureSet>();
  for (int it = 0; it < 200; ++it) {
    auto a = gen::rv(rng, ps, 3, 3), b = gen::rv(rng, ps, 3, 3), c = gen::rv(rng, ps, 2, 3);
    CHECK((rv_dist(a, b) == 0) == (a == b));
    CHECK(rv_dist(a, b) == rv_dist(b, a));
    CHECK(rv_dist(a, c) <= rv_dist(a, b) + rv_dist(b, c));
  }
}

TEST_CASE("event maps on the worked examples") {
  StructurePtr ps = std::make_shared<PureSet>();
  auto f = parse_rv("{e0: [0,1/2); e1: [1/2,1)}", ps);
  auto g = SimpleRV::constant(ps, 0);
  std::vector<SimpleRV> fg{f, g};
  CHECK(event_map(*ps, *fml(*ps, "(= x y)"), fg) == ev("[0,1/2)"));

  StructurePtr gr = make_graph3();
  std::vector<SimpleRV> h{parse_rv("{0: [0,1/2); 2: [1/2,1)}", gr)};
  auto phi = fml(*gr, "(exists y (E x y))");
  CHECK(event_map(*gr, *phi, h) == ev("[0,1/2)"));
  CHECK(mu_formula(*gr, *phi, std::vector<std::string>{"x"}, h) == q("1/2"));
  CHECK(event_map(*gr, *fml(*gr, "(= x x)"), h) == Event::full());
  CHECK(mu_formula(*gr, *fml(*gr, "(and (= x x) (not (= x x)))"), std::vector<std::string>{"x"}, h) == 0);

  StructurePtr dlo = std::make_shared<Dlo>();
  std::vector<SimpleRV> d{parse_rv("{0: [0,1/2); 1: [1/2,1)}", dlo), parse_rv("{1/2: [0,1)}", dlo)};
  CHECK(mu_formula(*dlo, *fml(*dlo, "(< x y)"), std::vector<std::string>{"x", "y"}, d) == q("1/2"));

  QfOnly qf(gr);
  CHECK_THROWS_AS(event_map(qf, *phi, h), PreconditionError);
}

TEST_CASE("homomorphism laws of event maps") {
  gen::Rng rng(42);
  StructurePtr gr = make_graph3();
  std::vector<std::string> vars{"x", "y"};
  for (int it = 0; it < 150; ++it) {
    std::vector<SimpleRV> f{gen::rv(rng, gr, 3, 3), gen::rv(rng, gr, 3, 3)};
    auto a = gen::formula(rng, gr->signature(), vars, 1, 3);
    auto b = gen::formula(rng, gr->signature(), vars, 1, 3);
    auto ea = event_map(*gr, *a, vars, f), eb = event_map(*gr, *b, vars, f);
    CHECK(event_map(*gr, *fo::conj({a, b}), vars, f) == intersect(ea, eb));
    CHECK(event_map(*gr, *fo::neg(a), vars, f) == complement(ea));
    CHECK(mu_formula(*gr, *a, vars, f) == brute_mu(*gr, *a, vars, f));
    CHECK(mu_formula(*gr, *rename_bound(a), vars, f) == measure(ea));
  }
}

TEST_CASE("fullness witnesses") {
  StructurePtr gr = make_graph3();
  std::vector<SimpleRV> h{parse_rv("{0: [0,1/2); 2: [1/2,1)}", gr)};
  std::vector<std::string> xs{"x"};
  auto phi = fml(*gr, "(E x y)");
  auto g = fullness_witness(*gr, *phi, xs, "y", h, q("1/10"));
  CHECK(g == parse_rv("{1: [0,1/2); 0: [1/2,1)}", gr));
  std::vector<SimpleRV> hg{h[0], g};
  std::vector<std::string> xy{"x", "y"};
  CHECK(dist(event_map(*gr, *fo::exists("y", phi), xs, h), event_map(*gr, *phi, xy, hg)) == 0);

  StructurePtr dlo = std::make_shared<Dlo>();
  std::vector<SimpleRV> d{parse_rv("{0: [0,1/2); 1: [1/2,1)}", dlo)};
  auto lt = fml(*dlo, "(< x y)");
  auto gd = fullness_witness(*dlo, *lt, xs, "y", d, q("1/10"));
  std::vector<SimpleRV> dg{d[0], gd};
  CHECK(event_map(*dlo, *lt, xy, dg) == Event::full());

  auto never = fml(*gr, "(and (E x y) (not (E x y)))");
  auto gn = fullness_witness(*gr, *never, xs, "y", h, q("1/10"));
  std::vector<SimpleRV> hn{h[0], gn};
  CHECK(event_map(*gr, *never, xy, hn).is_empty());
  CHECK_THROWS_AS(fullness_witness(QfOnly(gr), *phi, xs, "y", h, q("1/10")), PreconditionError);
}

TEST_CASE("left-c.e. existential streams") {
  StructurePtr gr = make_graph3();
  std::vector<SimpleRV> h{parse_rv("{0: [0,1/2); 2: [1/2,1)}", gr)};
  LeftCeExistential s(std::make_shared<QfOnly>(gr), fml(*gr, "(E x y)"), {"x"}, "y", h);
  Rational prev = -1;
  for (int i = 0; i < 6; ++i) {
    Rational v = s.next();
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == q("1/2"));

  StructurePtr ps = std::make_shared<PureSet>();
  std::vector<SimpleRV> c{SimpleRV::constant(ps, 3)};
  LeftCeExistential t(ps, fml(*ps, "(= x y)"), {"x"}, "y", c);
  std::vector<Rational> seen;
  for (int i = 0; i < 4; ++i) seen.push_back(t.next());
  CHECK(seen[0] == 0);
  CHECK(seen[3] == 1);

  LeftCeExistential u(ps, fml(*ps, "(not (= y y))"), {"x"}, "y", c);
  for (int i = 0; i < 4; ++i) CHECK(u.next() == 0);
}

TEST_CASE("witness partitions") {
  StructurePtr ps = std::make_shared<PureSet>();
  std::vector<FormulaPtr> thetas{fml(*ps, "(= x y)"), fml(*ps, "(not (= x y))")};
  std::vector<std::string> ys{"y"};
  std::vector<SimpleRV> f{SimpleRV::constant(ps, 0)};
  std::vector<Event> parts{ev("[0,1/3)"), ev("[1/3,1)")};
  auto g = witness_partition_rv(*ps, thetas, "x", ys, f, parts);
  CHECK(g == parse_rv("{e0: [0,1/3); e1: [1/3,1)}", ps));
  std::vector<SimpleRV> gf{g, f[0]};
  std::vector<std::string> xy{"x", "y"};
  for (std::size_t i = 0; i < 2; ++i) CHECK(event_map(*ps, *thetas[i], xy, gf) == parts[i]);

  std::vector<Event> all{Event::full(), Event::empty()};
  CHECK(witness_partition_rv(*ps, thetas, "x", ys, f, all) == f[0]);

  StructurePtr one = make_one_element();
  std::vector<SimpleRV> f1{SimpleRV::constant(one, 0)};
  CHECK_THROWS_AS(witness_partition_rv(*one, thetas, "x", ys, f1, parts), PreconditionError);

  gen::Rng rng(43);
  for (int it = 0; it < 50; ++it) {
    std::vector<SimpleRV> fr{gen::rv(rng, ps, 3, 4)};
    auto bs = gen::partition(rng, 2);
    auto gr = witness_partition_rv(*ps, thetas, "x", ys, fr, bs);
    std::vector<SimpleRV> pair{gr, fr[0]};
    for (std::size_t i = 0; i < 2; ++i) CHECK(event_map(*ps, *thetas[i], xy, pair) == bs[i]);
  }
}

TEST_CASE("random variable literals") {
  StructurePtr ps = std::make_shared<PureSet>();
  auto f = parse_rv("{e0: [0,1/2); e1: [1/2,1)}", ps);
  CHECK(to_string(f) == "{e0: [0, 1/2); e1: [1/2, 1)}");
  CHECK(to_string(parse_rv("{e2:[0,1)}", ps)) == "{e2: [0, 1)}");
  CHECK_THROWS_AS(parse_rv("e0: [0,1)", ps), ParseError);
  CHECK_THROWS_AS(parse_rv("{x0: [0,1)}", ps), ParseError);
  CHECK_THROWS_AS(parse_rv("{e0: [0,1/2)}", ps), PreconditionError);
}
