#include <doctest.h>

#include <set>

#include "formula_gen.hpp"
#include "gen.hpp"
#include "randqe/presentation.hpp"

using namespace randqe;

namespace {

Rational q(const char* s) { return parse_rational(s); }
Event evt(const char* s) { return parse_event(s); }

// Independent model of a dyadic event at level l: its cell bitmap.
std::vector<bool> cells(const Event& e, unsigned l) {
  const long n = 1L << l;
  std::vector<bool> out(static_cast<std::size_t>(n));
  for (long c = 0; c < n; ++c) out[static_cast<std::size_t>(c)] = is_subset(Event::interval(ratio(c, n), ratio(c + 1, n)), e);
  return out;
}

bool holds_at(const Event& e, const Rational& x) {
  for (const auto& iv : e.intervals())
    if (iv.lo <= x && x < iv.hi) return true;
  return false;
}

}  // namespace

TEST_CASE("standard enumeration starts with the full event and the two halves") {
  CHECK(std_special(0) == Event::full());
  CHECK(std_special(1) == evt("[0,1/2)"));
  CHECK(std_special(2) == evt("[1/2,1)"));
  // Level 2: 16 masks minus the 4 coarse ones; first is cell 0 alone.
  CHECK(std_special(3) == evt("[0,1/4)"));
  CHECK(std_special(4) == evt("[1/4,1/2)"));
  CHECK(!std_index(Event::empty()));
  CHECK(!std_index(evt("[0,1/3)")));
}

TEST_CASE("standard enumeration is a bijection onto nonempty dyadic events up to level 3") {
  // Brute force: every nonempty mask at level <= 3, each counted once.
  std::set<std::uint64_t> seen;
  for (unsigned l = 0; l <= 3; ++l) {
    const std::uint64_t n = std::uint64_t{1} << l;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      std::vector<Interval> ivs;
      for (std::uint64_t c = 0; c < n; ++c)
        if ((mask >> c) & 1) ivs.push_back({ratio(static_cast<long>(c), static_cast<long>(n)), ratio(static_cast<long>(c + 1), static_cast<long>(n))});
      Event e = Event::from_intervals(std::move(ivs));
      auto i = std_index(e);
      REQUIRE(i);
      CHECK(std_special(*i) == e);
      seen.insert(*i);
    }
  }
  // 1 + 2 + 12 + 240 nonempty events, indices 0..254.
  CHECK(seen.size() == 255);
  CHECK(*seen.rbegin() == 254);
}

TEST_CASE("event maps preserve measure and Boolean structure") {
  gen::Rng rng(11);
  std::vector<EventMapPtr> maps{identity_map(), rotation_map(q("1/3")), rotation_map(q("5/4")),
                                digit_permutation_map({1, 0}), make_event_map("digitperm:2031")};
  for (int trial = 0; trial < 100; ++trial) {
    Event a = gen::bitmap(rng, 16).to_event();
    Event b = gen::bitmap(rng, 16).to_event();
    for (const auto& s : maps) {
      CHECK(measure(s->apply(a)) == measure(a));
      CHECK(s->apply(intersect(a, b)) == intersect(s->apply(a), s->apply(b)));
      CHECK(s->apply(complement(a)) == complement(s->apply(a)));
      CHECK(s->inverse()->apply(s->apply(a)) == a);
    }
  }
  CHECK(rotation_map(q("1/4"))->apply(evt("[1/2,1)")) == Event::from_intervals({{q("3/4"), q("1")}, {q("0"), q("1/4")}}));
  // Swapping the first two binary digits exchanges [1/4,1/2) and [1/2,3/4).
  CHECK(digit_permutation_map({1, 0})->apply(evt("[1/4,1/2)")) == evt("[1/2,3/4)"));
  CHECK_THROWS_AS(digit_permutation_map({1, 0})->apply(evt("[0,1/3)")), PreconditionError);
  CHECK_THROWS_AS(digit_permutation_map({0, 0}), PreconditionError);
  CHECK_THROWS_AS(make_event_map("shuffle"), ParseError);
}

TEST_CASE("digit permutation agrees with a bitmap model") {
  auto s = make_event_map("digitperm:102");
  gen::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Event a = gen::bitmap(rng, 8).to_event();
    auto before = cells(a, 3), after = cells(s->apply(a), 3);
    for (unsigned c = 0; c < 8; ++c) {
      // Digits d0 d1 d2 (d0 most significant) become d1 d0 d2.
      unsigned d0 = (c >> 2) & 1, d1 = (c >> 1) & 1, d2 = c & 1;
      unsigned img = (d1 << 2) | (d0 << 1) | d2;
      CHECK(after[img] == before[c]);
    }
  }
}

TEST_CASE("event presentations evaluate generated points") {
  auto std_pres = make_event_presentation("std");
  auto p1 = special_term(1), p2 = special_term(2), p3 = special_term(3);
  CHECK(std_pres->mu(*ev::meet({p1, p3}), 0) == Bracket::exact(q("1/4")));
  CHECK(std_pres->dist(*p1, *p2, 0) == Bracket::exact(q("1")));
  auto rot = make_event_presentation("rot:1/3");
  CHECK(rot->underlying(*p1) == evt("[1/3,5/6)"));
  CHECK(rot->mu(*ev::join({p1, p3}), 0) == Bracket::exact(q("1/2")));

  auto irr = make_event_presentation("rot:sqrt2");
  CHECK(!irr->exact());
  // Angle approximants: floor((sqrt2 - 1) 2^j) / 2^j.
  CHECK(IrrationalRotationPresentation::angle(1) == q("0"));
  CHECK(IrrationalRotationPresentation::angle(3) == q("3/8"));
  CHECK(IrrationalRotationPresentation::angle(10) == q("424/1024"));
  for (unsigned k : {2u, 6u, 12u}) {
    Bracket b = irr->mu(*ev::meet({p1, p3}), k);
    CHECK(b.contains(q("1/4")));
    CHECK(b.width() <= pow2_neg(k));
    // Rotation preserves intersections and distances.
    Bracket d = irr->dist(*p1, *p2, k);
    CHECK(d.contains(q("1")));
  }
  CHECK_THROWS_AS(std_pres->mu(*ev::var("A"), 0), PreconditionError);
}

TEST_CASE("formal inclusion") {
  auto pres = make_event_presentation("std");
  auto c = special_term(3);  // [0,1/4)
  CHECK(formal_inclusion({c, q("1/8")}, {c, q("1/2")}, *pres, 0) == Inclusion::Yes);
  CHECK(formal_inclusion({c, q("1/2")}, {c, q("1/2")}, *pres, 0) == Inclusion::NoAtThisPrecision);
  // d(p1, p3) = 1/4: 1/4 + 1/8 < 1/2 but not < 3/8.
  CHECK(formal_inclusion({special_term(1), q("1/8")}, {c, q("1/2")}, *pres, 0) == Inclusion::Yes);
  CHECK(formal_inclusion({special_term(1), q("1/8")}, {c, q("3/8")}, *pres, 0) == Inclusion::NoAtThisPrecision);
  CHECK_THROWS_AS(formal_inclusion({c, q("0")}, {c, q("1/2")}, *pres, 0), PreconditionError);

  // Approximate presentation: margin 1/64 needs 2^-k well below it.
  auto irr = make_event_presentation("rot:sqrt2");
  EventBall small{special_term(1), q("1/4")}, big{special_term(1), q("1/4") + q("1/64")};
  CHECK(formal_inclusion(small, big, *irr, 4) == Inclusion::NoAtThisPrecision);
  CHECK(formal_inclusion(small, big, *irr, 10) == Inclusion::Yes);
}

TEST_CASE("formal inclusion yes-answers are sound on randomly chosen generated points") {
  auto pres = make_event_presentation("rot:sqrt2");
  auto exact = make_event_presentation("std");
  gen::Rng rng(5);
  int yes = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto a = special_term(static_cast<std::uint64_t>(gen::uniform(rng, 0, 30)));
    auto b = special_term(static_cast<std::uint64_t>(gen::uniform(rng, 0, 30)));
    Rational e = gen::unit_rational(rng, 8) + q("1/64"), d = gen::unit_rational(rng, 8) + q("1/64");
    if (formal_inclusion({a, e}, {b, d}, *pres, 8) == Inclusion::Yes) {
      ++yes;
      // The rotation is an isometry, so the exact distance is the standard one.
      CHECK(exact->dist(*a, *b, 0).lo + e < d);
    }
  }
  CHECK(yes > 10);
}

TEST_CASE("list codes") {
  CHECK(encode_list({}) == 0);
  for (std::uint64_t x = 0; x < 40; ++x)
    for (std::uint64_t y = 0; y < 40; ++y) CHECK(cantor_unpair(cantor_pair(x, y)) == std::pair{x, y});
  std::vector<std::uint64_t> xs{0, 1, 1, 2};
  CHECK(decode_list(encode_list(xs)) == std::vector<Code>{0, 1, 1, 2});
  // Codes beyond 64 bits.
  std::vector<std::uint64_t> deep{3, 1, 4, 1, 5, 9, 2, 6};
  auto back = decode_list(encode_list(deep));
  REQUIRE(back.size() == deep.size());
  for (std::size_t i = 0; i < deep.size(); ++i) CHECK(back[i] == deep[i]);
  CHECK(encode_list(deep) > Code("18446744073709551616"));
  // code([0,0]) = 1 + cantor(0, 1 + cantor(0, 0)) = 1 + cantor(0, 1) = 3.
  CHECK(encode_list({0, 0}) == 3);
}

TEST_CASE("induced randomization presentation decodes special points") {
  auto m = make_structure("pureset");
  auto pres = induced_randomization_presentation(m);
  // (i1 = 0, J1 = [0,1)) is the constant at element 0.
  SimpleRV c = pres->special(RVPresentation::code_of({0}, {0}));
  CHECK(c == SimpleRV::constant(m, 0));
  CHECK(RVPresentation::code_of({0}, {0}) == 3);
  // (0, 1, [0,1/2), [1/2,1)): a two-cell simple function.
  SimpleRV f = pres->special(RVPresentation::code_of({0, 1}, {1, 2}));
  CHECK(f.mass(0) == q("1/2"));
  CHECK(f.mass(1) == q("1/2"));
  CHECK(f == SimpleRV(m, {{0, evt("[0,1/2)")}, {1, evt("[1/2,1)")}}));
  // Overlapping J's: later cells lose what earlier cells already cover; the
  // uncovered remainder goes to the first value.
  SimpleRV g = pres->special(RVPresentation::code_of({2, 3}, {1, 3}));
  CHECK(g == SimpleRV(m, {{2, evt("[0,1/2)")}, {2, evt("[1/2,1)")}}));
  SimpleRV h = pres->special(RVPresentation::code_of({2, 3}, {3, 2}));
  CHECK(h.mass(2) == q("1/2"));
  CHECK(h.mass(3) == q("1/2"));

  CHECK(!pres->decode(0));
  CHECK(!pres->decode(encode_list({0, 1, 2})));
  CHECK_THROWS_AS(pres->special(0), PreconditionError);

  // dist against a direct refinement computation.
  gen::Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    Code a = RVPresentation::code_of({static_cast<std::uint64_t>(gen::uniform(rng, 0, 2)), 1},
                                              {static_cast<std::uint64_t>(gen::uniform(rng, 1, 14)), 5});
    Code b = RVPresentation::code_of({1, static_cast<std::uint64_t>(gen::uniform(rng, 0, 2))},
                                              {static_cast<std::uint64_t>(gen::uniform(rng, 1, 14)), 7});
    SimpleRV fa = pres->special(a), fb = pres->special(b);
    Rational direct = 0;
    for (long c = 0; c < 16; ++c) {
      Rational mid = ratio(2 * c + 1, 32);
      ElementId va = 0, vb = 0;
      for (const auto& cell : fa.cells())
        if (holds_at(cell.event, mid)) va = cell.value;
      for (const auto& cell : fb.cells())
        if (holds_at(cell.event, mid)) vb = cell.value;
      if (va != vb) direct += ratio(1, 16);
    }
    CHECK(pres->dist(a, b) == direct);
  }
}

TEST_CASE("scrambled randomization presentations move the cells") {
  auto m = make_structure("pureset");
  auto pres = make_rv_presentation(m, "rot:1/4");
  SimpleRV f = pres->special(RVPresentation::code_of({0, 1}, {1, 2}));
  CHECK(f == SimpleRV(m, {{0, evt("[1/4,3/4)")}, {1, Event::from_intervals({{q("0"), q("1/4")}, {q("3/4"), q("1")}})}}));
  CHECK_THROWS_AS(make_rv_presentation(m, "rot:sqrt2"), PreconditionError);
}

TEST_CASE("awareness: balls meeting the constants") {
  auto m = make_structure("pureset");
  SimpleRV f(m, {{0, evt("[0,3/4)")}, {1, evt("[3/4,1)")}});
  CHECK(ball_meets_constants(f, q("3/10")));
  CHECK(!ball_meets_constants(f, q("1/5")));
  CHECK(!ball_meets_constants(f, q("1/4")));
  SimpleRV c = SimpleRV::constant(m, 4);
  for (long d = 1; d < 30; ++d) CHECK(ball_meets_constants(c, ratio(1, d)));

  CHECK(radius_enum(0) == 1);
  CHECK(radius_enum(1) == q("1/2"));
  CHECK(radius_enum(2) == q("1/3"));
  CHECK(radius_enum(3) == q("2/3"));
  CHECK(radius_enum(4) == q("1/4"));
  CHECK(radius_enum(5) == q("3/4"));
}

TEST_CASE("aware enumerator is sound and complete on small codes") {
  auto m = make_structure("pureset");
  auto pres = induced_randomization_presentation(m);
  // Expected emissions by direct mass computation over every stage below the
  // bound; stage s examines (code, radius index) = unpair(s).
  const std::uint64_t bound = cantor_pair(60, 0);
  std::set<std::pair<std::string, std::string>> expected, got;
  for (std::uint64_t s = 0; s < bound; ++s) {
    auto [code, r] = cantor_unpair(s);
    auto f = pres->decode(code);
    if (f && ball_meets_constants(*f, radius_enum(r))) expected.insert({std::to_string(code), to_string(radius_enum(r))});
  }
  auto stream = aware_enumerator(pres, AwareStrategy::Induced);
  while (stream->steps() < bound) {
    auto b = stream->next(bound - stream->steps());
    if (!b) break;
    got.insert({b->center.get_str(), to_string(b->radius)});
  }
  CHECK(got == expected);
  CHECK(expected.size() > 50);
  // Two-cell f with masses 1/2, 1/2 meets the constants only at radius > 1/2.
  Code half = RVPresentation::code_of({0, 1}, {1, 2});
  CHECK(ball_meets_constants(pres->special(half), q("2/3")));
  CHECK(!ball_meets_constants(pres->special(half), q("1/2")));
}

TEST_CASE("recognizable strategy agrees with the induced strategy") {
  auto m = make_structure("named:graph3");
  auto pres = induced_randomization_presentation(m);
  CHECK_THROWS_AS(aware_enumerator(induced_randomization_presentation(make_structure("pureset")),
                                   AwareStrategy::Recognizable),
                  PreconditionError);
  auto rec = aware_enumerator(pres, AwareStrategy::Recognizable);
  for (int i = 0; i < 40; ++i) {
    auto b = rec->next(1u << 20);
    REQUIRE(b);
    CHECK(ball_meets_constants(pres->special(b->center), b->radius));
  }
}

TEST_CASE("constants from an aware presentation") {
  auto m = make_structure("pureset");
  auto pres = induced_randomization_presentation(m);
  ConstantSequence seq(pres, AwareStrategy::Induced);
  std::set<ElementId> found;
  for (std::size_t n = 0; n < 400 && found.size() < 5; ++n) {
    // Chase to precision 1/8 and read off the constant.
    SimpleRV a3 = pres->special(seq[n](3));
    for (const auto& cell : a3.cells())
      if (a3.mass(cell.value) > q("7/8")) found.insert(cell.value);
    CHECK(seq.ball(n).radius < q("1/2"));
  }
  for (ElementId i = 0; i < 5; ++i) CHECK(found.count(i));

  // Successive approximants converge at the promised rate.
  for (std::size_t n = 0; n < 6; ++n)
    for (unsigned k = 0; k < 5; ++k)
      for (unsigned j = k; j < 5; ++j) CHECK(pres->dist(seq[n](k), seq[n](j)) < pow2_neg(k) + pow2_neg(j));
}

TEST_CASE("induced classical presentation and the round trip") {
  for (const char* name : {"pureset", "graph3", "dlo"}) {
    auto m = make_structure(name);
    InducedClassicalPresentation back(induced_randomization_presentation(m));
    for (std::uint64_t i = 0; i < 5; ++i) {
      std::size_t n = back.roundtrip_index(i);
      ElementId a = m->canonical(m->enumerate(i));
      CHECK(back.element(n) == a);
      // Distance 0 between the constant and its round-trip image.
      SimpleRV img = back.sequence().presentation().special(back.point(n)(4));
      CHECK(rv_dist(img, SimpleRV::constant(m, a)) < pow2_neg(4));
    }
    // Two balls around the same constant are identified.
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b) CHECK(back.same(a, b) == (back.element(a) == back.element(b)));
  }
}

TEST_CASE("deciding through the randomization") {
  auto m = make_structure("graph3");
  auto pres = induced_randomization_presentation(m);
  InducedClassicalPresentation back(pres);
  std::vector<std::string> x{"x"};
  std::size_t v0 = back.roundtrip_index(0), v2 = back.roundtrip_index(2);
  std::vector<ComputablePoint> at0{back.point(v0)}, at2{back.point(v2)};
  auto exists_edge = parse_classical("(exists y (E x y))", m->signature());
  CHECK(decide_via_randomization(*pres, *exists_edge, x, at0));
  CHECK(!decide_via_randomization(*pres, *exists_edge, x, at2));
  auto neq = parse_classical("(not (= x x))", m->signature());
  CHECK(!decide_via_randomization(*pres, *neq, x, at0));
  CHECK_THROWS_AS(decide_via_randomization(*pres, *neq, {}, at0), PreconditionError);
}

TEST_CASE("decide_via_randomization agrees with the direct oracle") {
  auto m = make_graph3();
  auto pres = induced_randomization_presentation(m);
  InducedClassicalPresentation back(pres);
  std::vector<ComputablePoint> pts;
  for (std::uint64_t i = 0; i < 3; ++i) pts.push_back(back.point(back.roundtrip_index(i)));
  gen::Rng rng(21);
  std::vector<std::string> vars{"x", "y"};
  for (int trial = 0; trial < 80; ++trial) {
    auto phi = gen::formula(rng, m->signature(), vars, 2);
    ElementId a = static_cast<ElementId>(gen::uniform(rng, 0, 2)), b = static_cast<ElementId>(gen::uniform(rng, 0, 2));
    std::vector<ComputablePoint> args{pts[a], pts[b]};
    bool expected = gen::brute_force(*m, *phi, {{"x", a}, {"y", b}});
    CHECK_MESSAGE(decide_via_randomization(*pres, *phi, vars, args) == expected, to_sexpr(*phi));
  }
}
