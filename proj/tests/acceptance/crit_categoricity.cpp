// Criteria 8 and 9: decidability through the randomization and the
// back-and-forth isomorphisms.

#include <chrono>

#include "acceptance.hpp"
#include "formula_gen.hpp"
#include "gen.hpp"
#include "randqe/categoricity.hpp"

using namespace randqe;

namespace acceptance {

namespace {

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Rational gap(const Rational& a, const Rational& b) { return abs(Rational(a - b)); }

}  // namespace

Result decidability_transfer() {
  Result r;
  gen::Rng rng(8);
  const std::vector<std::string> vars{"x", "y"};
  for (const char* name : {"pureset", "dlo", "graph3", "one"}) {
    auto m = make_structure(name);
    auto pres = induced_randomization_presentation(m);
    InducedClassicalPresentation back(pres);
    const std::uint64_t pool = std::string(name) == "one" ? 1 : 3;
    std::vector<ComputablePoint> pts;
    std::vector<ElementId> elems;
    for (std::uint64_t i = 0; i < pool; ++i) {
      std::size_t n = back.roundtrip_index(i);
      pts.push_back(back.point(n));
      elems.push_back(back.element(n));
    }
    auto fin = std::dynamic_pointer_cast<const FiniteStructure>(m);
    for (int t = 0; t < 60; ++t) {
      auto phi = gen::formula(rng, m->signature(), vars, 2, 4);
      const auto a = static_cast<std::size_t>(gen::uniform(rng, 0, static_cast<int>(pool) - 1));
      const auto b = static_cast<std::size_t>(gen::uniform(rng, 0, static_cast<int>(pool) - 1));
      std::vector<ElementId> vals{elems[a], elems[b]};
      bool direct = decide(*m, *phi, vars, vals);
      if (fin) direct = gen::brute_force(*fin, *phi, {{"x", vals[0]}, {"y", vals[1]}});
      std::vector<ComputablePoint> args{pts[a], pts[b]};
      r.expect(decide_via_randomization(*pres, *phi, vars, args) == direct,
               std::string(name) + " " + to_sexpr(*phi) + " at (" + std::to_string(vals[0]) + ", " +
                   std::to_string(vals[1]) + ")");
    }

    // Round trip on the first five constants: the image of enumerate(i) is the
    // constant random variable at the same element; the chased codes are
    // checked at precisions 2..4.
    const std::uint64_t constants = std::string(name) == "one" ? 1 : 5;
    for (std::uint64_t i = 0; i < constants; ++i) {
      std::size_t n = back.roundtrip_index(i);
      ElementId e = m->canonical(m->enumerate(i));
      bool ok = back.element(n) == e;
      for (unsigned k = 2; k <= 4 && ok; ++k)
        ok = rv_dist(pres->special(back.point(n)(k)), SimpleRV::constant(m, e)) <= pow2_neg(k);
      r.expect(ok, std::string(name) + ": round trip moves constant " + std::to_string(i));
    }
  }
  return r;
}

Result back_and_forth() {
  Result r;
  const Rational tol = pow2_neg(4);
  IsoOptions opts;
  opts.steps = 8;
  opts.k = 6;

  for (const char* other : {"rot:1/3", "digitperm"}) {
    auto t0 = std::chrono::steady_clock::now();
    auto p1 = make_event_presentation("std"), p2 = make_event_presentation(other);
    auto s1 = event_space(p1), s2 = event_space(p2);
    IsoOracle iso = back_and_forth(s1, s2, opts);
    const std::string job = std::string("std vs ") + other;
    std::vector<Code> pts, img;
    for (std::uint64_t i = 0; i < 4; ++i) {
      pts.push_back(s1->point(i));
      auto f = iso.map(pts.back(), opts.k + 2);
      if (!f) {
        r.fail(job + ": point " + std::to_string(i) + " not in the domain");
        break;
      }
      img.push_back(*f);
    }
    if (img.size() < 4) continue;
    // Exact events on both sides: measures, distances and meets.
    auto event_of = [](const EventPresentation& p, const Code& c) { return *p.underlying(*apa_term(c)); };
    for (std::size_t a = 0; a < 4; ++a) {
      Event ea = event_of(*p1, pts[a]), fa = event_of(*p2, img[a]);
      r.expect(gap(measure(ea), measure(fa)) <= tol, job + ": measure of point " + std::to_string(a));
      for (std::size_t b = 0; b < 4; ++b) {
        Event eb = event_of(*p1, pts[b]), fb = event_of(*p2, img[b]);
        r.expect(gap(dist(ea, eb), dist(fa, fb)) <= tol,
                 job + ": distance of points " + std::to_string(a) + ", " + std::to_string(b));
        r.expect(gap(measure(intersect(ea, eb)), measure(intersect(fa, fb))) <= tol,
                 job + ": meet of points " + std::to_string(a) + ", " + std::to_string(b));
      }
    }
    const double s = since(t0);
    if (s >= 120) r.fail(job + ": runtime " + std::to_string(s) + " s exceeds 2 min");
  }

  {
    auto t0 = std::chrono::steady_clock::now();
    auto m = make_structure("pureset");
    auto p1 = induced_randomization_presentation(m), p2 = make_rv_presentation(m, "digitperm");
    IsoOracle iso = back_and_forth(rv_space(p1), rv_space(p2), opts);
    const std::string job = "RAND pure set std vs digitperm";
    auto s1 = rv_space(p1);
    std::vector<Code> pts, img;
    for (std::uint64_t i = 0; i < 4; ++i) {
      pts.push_back(s1->point(i));
      auto f = iso.map(pts.back(), opts.k + 2);
      if (!f) {
        r.fail(job + ": point " + std::to_string(i) + " not in the domain");
        break;
      }
      img.push_back(*f);
    }
    auto eq = parse_classical("(= x y)", m->signature());
    const std::vector<std::string> xy{"x", "y"};
    for (std::size_t a = 0; a < img.size(); ++a)
      for (std::size_t b = 0; b < img.size(); ++b) {
        std::vector<SimpleRV> src{p1->special(pts[a]), p1->special(pts[b])};
        std::vector<SimpleRV> dst{p2->special(img[a]), p2->special(img[b])};
        r.expect(gap(mu_formula(*m, *eq, xy, src), mu_formula(*m, *eq, xy, dst)) <= tol,
                 job + ": mu[[X = Y]] at points " + std::to_string(a) + ", " + std::to_string(b));
      }
    const double s = since(t0);
    if (s >= 120) r.fail(job + ": runtime " + std::to_string(s) + " s exceeds 2 min");
  }
  return r;
}

}  // namespace acceptance
