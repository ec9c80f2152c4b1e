#include "randqe/categoricity.hpp"

#include <algorithm>
#include <deque>

#include "randqe/qe.hpp"

namespace randqe {

namespace {

Rational pow2(unsigned l) {
  mpz_class n = 1;
  n <<= l;
  return Rational(n);
}

Rational abs_diff(const Rational& a, const Rational& b) { return a > b ? Rational(a - b) : Rational(b - a); }

// First isolating formula that holds of a tuple, memoized by canonical tuple.
class ThetaIndex {
 public:
  ThetaIndex(const StructureOracle& m, std::span<const FormulaPtr> thetas, std::vector<std::string> vars)
      : m_(m), thetas_(thetas), vars_(std::move(vars)) {}

  std::uint64_t operator()(std::vector<ElementId> values) {
    for (auto& v : values) v = m_.canonical(v);
    if (auto it = memo_.find(values); it != memo_.end()) return it->second;
    for (std::size_t i = 0; i < thetas_.size(); ++i)
      if (decide(m_, *thetas_[i], vars_, values)) return memo_[values] = i;
    throw PreconditionError("isolating formulas do not cover a tuple");
  }

 private:
  const StructureOracle& m_;
  std::span<const FormulaPtr> thetas_;
  std::vector<std::string> vars_;
  std::map<std::vector<ElementId>, std::uint64_t> memo_;
};

// mu[[theta_i(g, f)]] for every i that occurs.
std::map<std::uint64_t, Event> theta_parts(const StructureOracle& m, std::span<const FormulaPtr> thetas,
                                           const SimpleRV& g, std::span<const SimpleRV> f) {
  std::vector<SimpleRV> rvs{g};
  rvs.insert(rvs.end(), f.begin(), f.end());
  ThetaIndex index(m, thetas, isolating_vars(f.size()));
  std::map<std::uint64_t, Event> parts;
  for (const auto& cell : refine(rvs)) {
    auto& e = parts[index(cell.values)];
    e = unite(e, cell.event);
  }
  return parts;
}

void require_omega_categorical(const StructureOracle& m) {
  if (!m.is_effectively_omega_categorical())
    throw PreconditionError("structure '" + m.name() + "' is not effectively omega-categorical");
}

}  // namespace

Rational IsolatedType::formula_count() const {
  if (flavor == Flavor::APA) return pow2(static_cast<unsigned>(context_size));
  return Rational(static_cast<unsigned long>(thetas.size()));
}

Rational IsolatedType::target(std::uint64_t key) const {
  auto it = targets.find(key);
  return it == targets.end() ? Rational(0) : it->second;
}

nlohmann::ordered_json IsolatedType::to_json() const {
  nlohmann::ordered_json j;
  j["flavor"] = flavor == Flavor::APA ? "apa" : "rand";
  j["context"] = context_size;
  nlohmann::ordered_json t = nlohmann::ordered_json::object();
  for (const auto& [k, r] : targets) {
    std::string key = flavor == Flavor::APA ? "atom" + std::to_string(k) : to_sexpr(*thetas[k]);
    t[key] = to_string(r);
  }
  j["targets"] = t;
  j["exact"] = exact;
  if (!exact) j["precision"] = precision;
  return j;
}

std::map<std::uint64_t, Event> context_atoms(std::span<const Event> ctx) {
  if (ctx.size() > 63) throw ResourceCap("context of more than 63 events");
  std::map<std::uint64_t, Event> atoms{{0, Event::full()}};
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    std::map<std::uint64_t, Event> next;
    for (const auto& [key, e] : atoms) {
      Event in = intersect(e, ctx[i]), out = difference(e, ctx[i]);
      if (!in.is_empty()) next[key | (std::uint64_t{1} << i)] = std::move(in);
      if (!out.is_empty()) next[key] = std::move(out);
    }
    atoms = std::move(next);
  }
  return atoms;
}

IsolatedType apa_type(const Event& b, std::span<const Event> ctx) {
  IsolatedType p;
  p.flavor = Flavor::APA;
  p.context_size = ctx.size();
  for (const auto& [key, atom] : context_atoms(ctx)) {
    p.targets[key] = measure(intersect(b, atom));
    p.atom_measures[key] = measure(atom);
  }
  return p;
}

IsolatedType rand_type(const StructureOracle& m, const SimpleRV& g, std::span<const SimpleRV> f) {
  require_omega_categorical(m);
  IsolatedType p;
  p.flavor = Flavor::RAND;
  p.context_size = f.size();
  p.thetas = isolating_formulas(m, f.size());
  for (const auto& [i, e] : theta_parts(m, p.thetas, g, f)) p.targets[i] = measure(e);
  return p;
}

Rational psi(const IsolatedType& p, const Event& b, std::span<const Event> ctx) {
  if (p.flavor != Flavor::APA || p.context_size != ctx.size()) throw PreconditionError("psi: type does not fit the context");
  auto atoms = context_atoms(ctx);
  Rational worst = 0;
  for (const auto& [key, atom] : atoms) worst = std::max(worst, abs_diff(measure(intersect(b, atom)), p.target(key)));
  for (const auto& [key, r] : p.targets)
    if (!atoms.count(key)) worst = std::max(worst, r);
  return worst;
}

Rational psi(const StructureOracle& m, const IsolatedType& p, const SimpleRV& g, std::span<const SimpleRV> f) {
  if (p.flavor != Flavor::RAND || p.context_size != f.size()) throw PreconditionError("psi: type does not fit the context");
  auto parts = theta_parts(m, p.thetas, g, f);
  Rational worst = 0;
  for (const auto& [i, e] : parts) worst = std::max(worst, abs_diff(measure(e), p.target(i)));
  for (const auto& [i, r] : p.targets)
    if (!parts.count(i)) worst = std::max(worst, r);
  return worst;
}

Event near_realization_repair(const Event& B, std::span<const Event> A, const IsolatedType& p) {
  if (p.flavor != Flavor::APA || p.context_size != A.size())
    throw PreconditionError("near realization: type does not fit the context");
  auto atoms = context_atoms(A);
  for (const auto& [key, r] : p.targets)
    if (r < 0 || (r > 0 && (!atoms.count(key) || r > measure(atoms.at(key)))))
      throw PreconditionError("near realization: target " + to_string(r) + " exceeds its atom");
  Event out;
  for (const auto& [key, atom] : atoms) {
    const Rational r = p.target(key);
    Event in = intersect(B, atom);
    const Rational have = measure(in);
    if (have > r)
      out = unite(out, sub_event(in, r));
    else if (have < r)
      out = unite(out, unite(in, sub_event(difference(atom, B), r - have)));
    else
      out = unite(out, in);
  }
  return out;
}

SimpleRV k_realization_repair(const StructureOracle& m, const SimpleRV& g, std::span<const SimpleRV> f,
                              const IsolatedType& p) {
  require_omega_categorical(m);
  if (p.flavor != Flavor::RAND || p.context_size != f.size())
    throw PreconditionError("realization repair: type does not fit the context");
  Rational total = 0;
  for (const auto& [i, r] : p.targets) {
    if (r < 0) throw PreconditionError("realization repair: negative target");
    total += r;
  }
  if (total != 1) throw PreconditionError("realization repair: targets sum to " + to_string(total));

  const auto vars = isolating_vars(f.size());
  const std::string x = vars[0];
  const std::vector<std::string> ys(vars.begin() + 1, vars.end());
  const auto before = theta_parts(m, p.thetas, g, f);

  // Classes in play: occurring now or targeted.
  std::vector<std::uint64_t> cls;
  for (const auto& [i, e] : before) cls.push_back(i);
  for (const auto& [i, r] : p.targets)
    if (r > 0 && !before.count(i)) cls.push_back(i);
  std::sort(cls.begin(), cls.end());
  std::vector<FormulaPtr> th;
  for (auto i : cls) th.push_back(p.thetas[i]);
  const auto C = exists_events(m, th, x, ys, f);
  const std::size_t n = cls.size();

  std::vector<Event> B(n), own(n);
  std::vector<Rational> want(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (auto it = before.find(cls[a]); it != before.end()) B[a] = it->second;
    own[a] = B[a];
    want[a] = p.target(cls[a]);
  }

  // Regions on which the set of admissible classes is constant.
  std::vector<Event> regions{Event::full()};
  for (const auto& c : C) {
    std::vector<Event> next;
    for (const auto& r : regions) {
      Event in = intersect(r, c), out = difference(r, c);
      if (!in.is_empty()) next.push_back(std::move(in));
      if (!out.is_empty()) next.push_back(std::move(out));
    }
    regions = std::move(next);
  }
  std::vector<std::vector<bool>> admits(regions.size(), std::vector<bool>(n));
  for (std::size_t q = 0; q < regions.size(); ++q)
    for (std::size_t b = 0; b < n; ++b) admits[q][b] = is_subset(regions[q], C[b]);

  for (;;) {
    std::vector<std::size_t> surplus;
    bool deficit = false;
    for (std::size_t a = 0; a < n; ++a) {
      Rational have = measure(own[a]);
      if (have > want[a]) surplus.push_back(a);
      if (have < want[a]) deficit = true;
    }
    if (!deficit) break;
    // Breadth-first search from the surplus classes to a deficit class.
    struct Edge {
      std::size_t from, region;
    };
    std::vector<std::optional<Edge>> parent(n);
    std::vector<bool> seen(n);
    std::deque<std::size_t> queue;
    for (auto s : surplus) {
      seen[s] = true;
      queue.push_back(s);
    }
    std::optional<std::size_t> sink;
    while (!queue.empty() && !sink) {
      std::size_t a = queue.front();
      queue.pop_front();
      for (std::size_t q = 0; q < regions.size() && !sink; ++q) {
        if (measure(intersect(own[a], regions[q])) == 0) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (seen[b] || !admits[q][b]) continue;
          seen[b] = true;
          parent[b] = Edge{a, q};
          if (measure(own[b]) < want[b]) {
            sink = b;
            break;
          }
          queue.push_back(b);
        }
      }
    }
    if (!sink) throw PreconditionError("realization repair: infeasible targets");
    std::vector<std::pair<std::size_t, Edge>> path;
    std::size_t t = *sink;
    while (parent[t]) {
      path.push_back({t, *parent[t]});
      t = parent[t]->from;
    }
    std::reverse(path.begin(), path.end());
    const std::size_t source = path.front().second.from;
    Rational amount = std::min(measure(own[source]) - want[source], want[*sink] - measure(own[*sink]));
    for (const auto& [b, e] : path) amount = std::min(amount, measure(intersect(own[e.from], regions[e.region])));
    for (const auto& [b, e] : path) {
      Event piece = sub_event(intersect(own[e.from], regions[e.region]), amount);
      own[e.from] = difference(own[e.from], piece);
      own[b] = unite(own[b], piece);
    }
  }

  SimpleRV w = witness_partition_rv(m, th, x, ys, f, own);
  Event kept;
  for (std::size_t a = 0; a < n; ++a) kept = unite(kept, intersect(own[a], B[a]));
  std::vector<RVCell> cells;
  for (const auto& c : g.cells()) cells.push_back({c.value, intersect(c.event, kept)});
  for (const auto& c : w.cells()) cells.push_back({c.value, difference(c.event, kept)});
  return SimpleRV(g.structure(), std::move(cells));
}


// ---- point spaces ----------------------------------------------------------------

EvTermPtr apa_term(const Code& c) {
  if (c == 0) return ev::bot();
  return special_term(Code(c - 1).get_ui());
}

namespace {

std::string rational_json(const Rational& q) { return to_string(q); }

class EventSpace : public PointSpace {
 public:
  explicit EventSpace(EventPresentationPtr pres) : pres_(std::move(pres)) {}

  Flavor flavor() const override { return Flavor::APA; }
  std::string descriptor() const override { return pres_->descriptor(); }
  bool exact() const override { return pres_->exact(); }
  Code point(std::uint64_t i) const override { return Code(static_cast<unsigned long>(i)); }
  std::string point_text(const Code& c) const override { return to_string(*apa_term(c)); }

  Bracket dist(const Code& a, const Code& b, unsigned k) const override {
    if (exact()) return Bracket::exact(measure(symdiff(event(a), event(b))));
    return pres_->dist(*apa_term(a), *apa_term(b), k);
  }

  IsolatedType type_of(const Code& x, std::span<const Code> ctx, unsigned k) const override {
    if (exact()) return apa_type(event(x), events(ctx));
    // Approximate: every sign pattern, each measure within 2^-(k + m).
    check_inexact_context(ctx);
    IsolatedType p;
    p.flavor = Flavor::APA;
    p.context_size = ctx.size();
    p.exact = false;
    p.precision = k;
    const unsigned kk = k + static_cast<unsigned>(ctx.size());
    for (std::uint64_t key = 0; key < (std::uint64_t{1} << ctx.size()); ++key) {
      Bracket a = pres_->mu(*atom_term(ctx, key), kk);
      if (a.hi == 0) continue;
      p.atom_measures[key] = a.mid();
      p.targets[key] = pres_->mu(*ev::meet({apa_term(x), atom_term(ctx, key)}), kk).mid();
    }
    return p;
  }

  Bracket psi(const IsolatedType& p, const Code& d, std::span<const Code> ctx, unsigned k) const override {
    if (exact()) return Bracket::exact(randqe::psi(p, event(d), events(ctx)));
    check_inexact_context(ctx);
    Rational lo = 0, hi = 0;
    for (std::uint64_t key = 0; key < (std::uint64_t{1} << ctx.size()); ++key) {
      Bracket b = pres_->mu(*ev::meet({apa_term(d), atom_term(ctx, key)}), k);
      const Rational r = p.target(key);
      Rational far = std::max(abs_diff(b.lo, r), abs_diff(b.hi, r));
      Rational near = b.contains(r) ? Rational(0) : std::min(abs_diff(b.lo, r), abs_diff(b.hi, r));
      hi = std::max(hi, far);
      lo = std::max(lo, near);
    }
    return {lo, hi};
  }

  std::optional<Code> repaired(const IsolatedType& p, const Code& c, std::span<const Code> ctx) const override {
    auto mapped = std::dynamic_pointer_cast<const MappedEventPresentation>(pres_);
    if (!mapped) return std::nullopt;
    try {
      Event b = near_realization_repair(event(c), events(ctx), p);
      if (b.is_empty()) return Code(0);
      auto i = std_index(mapped->sigma()->inverse()->apply(b));
      if (!i) return std::nullopt;
      return Code(static_cast<unsigned long>(*i)) + 1;
    } catch (const PreconditionError&) {
      return std::nullopt;
    } catch (const ResourceCap&) {
      return std::nullopt;
    }
  }

  IsolatedType transport(const IsolatedType& p, std::span<const Code> ctx,
                         nlohmann::ordered_json& log) const override {
    IsolatedType q = p;
    q.targets.clear();
    q.atom_measures.clear();
    std::map<std::uint64_t, Rational> atoms;
    if (exact()) {
      for (const auto& [key, e] : context_atoms(events(ctx))) atoms[key] = measure(e);
    } else {
      check_inexact_context(ctx);
      const unsigned kk = p.precision + static_cast<unsigned>(ctx.size());
      for (std::uint64_t key = 0; key < (std::uint64_t{1} << ctx.size()); ++key) {
        Bracket a = pres_->mu(*atom_term(ctx, key), kk);
        if (a.hi > 0) atoms[key] = a.mid();
      }
    }
    q.atom_measures = atoms;
    for (const auto& [key, r] : p.targets) {
      auto it = atoms.find(key);
      const Rational room = it == atoms.end() ? Rational(0) : it->second;
      Rational t = r;
      if (r > room) {
        auto src = p.atom_measures.find(key);
        t = src == p.atom_measures.end() || src->second == 0 ? room : Rational(r * room / src->second);
        if (t > room) t = room;
        log.push_back({{"atom", key}, {"target", rational_json(r)}, {"renormalized", rational_json(t)}});
      }
      if (it != atoms.end()) q.targets[key] = t;
    }
    return q;
  }

 private:
  const Event& event(const Code& c) const {
    const std::string key = c.get_str();
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    return cache_[key] = *pres_->underlying(*apa_term(c));
  }
  std::vector<Event> events(std::span<const Code> cs) const {
    std::vector<Event> out;
    for (const auto& c : cs) out.push_back(event(c));
    return out;
  }
  static void check_inexact_context(std::span<const Code> ctx) {
    if (ctx.size() > 12) throw ResourceCap("approximate presentation: context of more than 12 points");
  }
  static EvTermPtr atom_term(std::span<const Code> ctx, std::uint64_t key) {
    std::vector<EvTermPtr> lits{ev::top()};
    for (std::size_t i = 0; i < ctx.size(); ++i)
      lits.push_back((key >> i) & 1 ? apa_term(ctx[i]) : ev::compl_(apa_term(ctx[i])));
    return ev::meet(std::move(lits));
  }

  EventPresentationPtr pres_;
  mutable std::map<std::string, Event> cache_;
};

class RVSpace : public PointSpace {
 public:
  explicit RVSpace(RVPresentationPtr pres) : pres_(std::move(pres)) { require_omega_categorical(*pres_->structure()); }

  Flavor flavor() const override { return Flavor::RAND; }
  std::string descriptor() const override { return pres_->descriptor(); }
  bool exact() const override { return true; }

  // Two-valued points: unpair(i) = (x, j), unpair(x) = (a, b) gives value a on
  // the special event j and value b elsewhere.
  Code point(std::uint64_t i) const override {
    auto [x, j] = cantor_unpair(i);
    auto [a, b] = cantor_unpair(x);
    return RVPresentation::code_of({a, b}, {j, 0});
  }
  std::string point_text(const Code& c) const override { return to_string(rv(c)); }

  Bracket dist(const Code& a, const Code& b, unsigned) const override { return Bracket::exact(rv_dist(rv(a), rv(b))); }

  IsolatedType type_of(const Code& x, std::span<const Code> ctx, unsigned) const override {
    auto f = rvs(ctx);
    IsolatedType p;
    p.flavor = Flavor::RAND;
    p.context_size = f.size();
    p.thetas = thetas(f.size());
    for (const auto& [i, e] : parts(p.thetas, rv(x), f)) p.targets[i] = measure(e);
    return p;
  }

  Bracket psi(const IsolatedType& p, const Code& d, std::span<const Code> ctx, unsigned) const override {
    auto f = rvs(ctx);
    auto ps = parts(p.thetas, rv(d), f);
    Rational worst = 0;
    for (const auto& [i, e] : ps) worst = std::max(worst, abs_diff(measure(e), p.target(i)));
    for (const auto& [i, r] : p.targets)
      if (!ps.count(i)) worst = std::max(worst, r);
    return Bracket::exact(worst);
  }

  std::optional<Code> repaired(const IsolatedType& p, const Code& c, std::span<const Code> ctx) const override {
    const StructureOracle& m = *pres_->structure();
    try {
      SimpleRV g = k_realization_repair(m, rv(c), rvs(ctx), p);
      auto inv = pres_->sigma()->inverse();
      std::vector<std::uint64_t> elements, evs;
      for (const auto& cell : g.cells()) {
        auto j = std_index(inv->apply(cell.event));
        auto a = element_index(cell.value);
        if (!j || !a) return std::nullopt;
        elements.push_back(*a);
        evs.push_back(*j);
      }
      return RVPresentation::code_of(elements, evs);
    } catch (const PreconditionError&) {
      return std::nullopt;
    } catch (const ResourceCap&) {
      return std::nullopt;
    }
  }

  IsolatedType transport(const IsolatedType& p, std::span<const Code> ctx,
                         nlohmann::ordered_json& log) const override {
    const StructureOracle& m = *pres_->structure();
    auto f = rvs(ctx);
    const auto vars = isolating_vars(f.size());
    const std::vector<std::string> ys(vars.begin() + 1, vars.end());
    IsolatedType q = p;
    // Group targeted formulas by the event where they are satisfiable; a
    // group's targets must add up to that event's measure.
    std::vector<std::uint64_t> keys;
    std::vector<FormulaPtr> th;
    for (const auto& [i, r] : p.targets)
      if (r > 0) {
        keys.push_back(i);
        th.push_back(p.thetas[i]);
      }
    auto C = exists_events(m, th, vars[0], ys, f);
    std::vector<bool> done(keys.size());
    Event covered;
    for (std::size_t a = 0; a < keys.size(); ++a) {
      if (done[a]) continue;
      Rational sum = 0;
      std::vector<std::size_t> group;
      for (std::size_t b = a; b < keys.size(); ++b)
        if (!done[b] && C[b] == C[a]) {
          done[b] = true;
          group.push_back(b);
          sum += p.target(keys[b]);
        }
      covered = unite(covered, C[a]);
      const Rational room = measure(C[a]);
      if (sum == room) continue;
      for (auto b : group) {
        Rational t = p.target(keys[b]) * room / sum;
        log.push_back({{"formula", to_sexpr(*p.thetas[keys[b]])},
                       {"target", rational_json(p.target(keys[b]))},
                       {"renormalized", rational_json(t)}});
        q.targets[keys[b]] = t;
      }
    }
    // Context tuples no targeted formula can describe.
    Event rest = complement(covered);
    if (!rest.is_empty()) {
      ThetaIndex index(m, p.thetas, vars);
      for (const auto& cell : refine(f, std::vector<Event>{rest})) {
        if (!cell.inside[0]) continue;
        std::vector<ElementId> values{ElementId(0)};
        values.insert(values.end(), cell.values.begin(), cell.values.end());
        // A witness for some formula: the first candidate element.
        auto cands = m.witness_candidates(cell.values);
        if (cands.empty()) throw PreconditionError("transport: no witness candidates");
        values[0] = cands.front();
        std::uint64_t i = index(values);
        q.targets[i] += measure(cell.event);
        log.push_back({{"formula", to_sexpr(*p.thetas[i])},
                       {"target", "0"},
                       {"renormalized", rational_json(q.targets[i])}});
      }
    }
    return q;
  }

 private:
  SimpleRV rv(const Code& c) const {
    const std::string key = c.get_str();
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    return cache_[key] = pres_->special(c);
  }
  std::vector<SimpleRV> rvs(std::span<const Code> cs) const {
    std::vector<SimpleRV> out;
    for (const auto& c : cs) out.push_back(rv(c));
    return out;
  }
  const std::vector<FormulaPtr>& thetas(std::size_t n) const {
    auto it = thetas_.find(n);
    if (it == thetas_.end()) it = thetas_.emplace(n, isolating_formulas(*pres_->structure(), n)).first;
    return it->second;
  }
  std::map<std::uint64_t, Event> parts(std::span<const FormulaPtr> th, const SimpleRV& g,
                                       std::span<const SimpleRV> f) const {
    return theta_parts(*pres_->structure(), th, g, f);
  }
  std::optional<std::uint64_t> element_index(ElementId a) const {
    const StructureOracle& m = *pres_->structure();
    for (std::uint64_t i = 0; i < 4096; ++i)
      if (m.canonical(m.enumerate(i)) == m.canonical(a)) return i;
    return std::nullopt;
  }

  RVPresentationPtr pres_;
  mutable std::map<std::string, SimpleRV> cache_;
  mutable std::map<std::size_t, std::vector<FormulaPtr>> thetas_;
};

}  // namespace

PointSpacePtr event_space(EventPresentationPtr pres) { return std::make_shared<EventSpace>(std::move(pres)); }
PointSpacePtr rv_space(RVPresentationPtr pres) { return std::make_shared<RVSpace>(std::move(pres)); }

IsolatedType isolated_type_of(const PointSpace& space, const Code& point, std::span<const Code> ctx, unsigned k) {
  return space.type_of(point, ctx, k);
}


// ---- realization sets ------------------------------------------------------------

RealizationSet::RealizationSet(PointSpacePtr space, std::vector<Code> ctx, IsolatedType p)
    : space_(std::move(space)), ctx_(std::move(ctx)), p_(std::move(p)) {
  if (p_.context_size != ctx_.size()) throw PreconditionError("realization set: type does not fit the context");
}

Bracket RealizationSet::psi_of(const Code& d, unsigned k) const {
  auto key = std::make_pair(d.get_str(), space_->exact() ? 0u : k);
  if (auto it = psi_cache_.find(key); it != psi_cache_.end()) return it->second;
  return psi_cache_[key] = space_->psi(p_, d, ctx_, k);
}

namespace {

unsigned precision_for(std::size_t depth) {
  // Evaluation precision grows with the search depth; exact spaces need none.
  unsigned k = 4;
  while ((std::size_t{1} << (k - 4)) < depth && k < 40) ++k;
  return k;
}

}  // namespace

std::optional<RealizationSet::Witness> RealizationSet::witness(const Code& c, const Rational& eps,
                                                               std::size_t depth) const {
  const Rational n = p_.formula_count();
  const unsigned k = precision_for(depth);
  const Rational delta = space_->exact() ? Rational(0) : pow2_neg(k);
  auto test = [&](const Code& d) -> std::optional<Witness> {
    Bracket dd = space_->dist(c, d, k);
    if (dd.hi >= eps) return std::nullopt;
    if (psi_of(d, k).hi + delta < (eps - dd.hi) / n) return Witness{d, delta};
    return std::nullopt;
  };
  if (self_witness(c, eps, depth)) return Witness{c, delta};
  if (auto r = space_->repaired(p_, c, ctx_))
    if (auto w = test(*r)) return w;
  for (std::size_t i = 0; i < depth; ++i)
    if (auto w = test(space_->point(i))) return w;
  return std::nullopt;
}

bool RealizationSet::self_witness(const Code& c, const Rational& eps, std::size_t depth) const {
  const unsigned k = precision_for(depth);
  const Rational delta = space_->exact() ? Rational(0) : pow2_neg(k);
  if (space_->exact()) return psi_of(c, k).hi < eps / p_.formula_count();
  // d(C, C) is known to be 0 exactly.
  return psi_of(c, k).hi + delta < eps / p_.formula_count();
}

std::optional<RVBall> RealizationSet::next(std::size_t max_steps) {
  for (std::size_t step = 0; step < max_steps; ++step) {
    const std::uint64_t s = stage_++;
    ++steps_;
    auto [ci, rest] = cantor_unpair(s);
    auto [ri, dexp] = cantor_unpair(rest);
    const std::size_t depth = std::size_t{1} << std::min<std::uint64_t>(dexp, 12);
    const Code c = space_->point(ci);
    const Rational eps = radius_enum(ri);
    auto key = std::make_pair(c.get_str(), to_string(eps));
    if (emitted_.count(key)) continue;
    if (witness(c, eps, depth)) {
      emitted_.insert(key);
      return RVBall{c, eps};
    }
  }
  return std::nullopt;
}

std::vector<RVBall> chase_point(const RealizationSet& set, unsigned k, std::size_t depth, std::size_t max_depth) {
  const PointSpace& space = set.space();
  std::vector<RVBall> chain;
  for (unsigned j = 0; j <= k; ++j) {
    const Rational radius = j == 0 ? Rational(2) : pow2_neg(j);
    bool found = false;
    for (std::size_t d = depth; !found; d *= 2) {
      std::vector<Code> cands;
      if (j > 0) {
        cands.push_back(chain.back().center);
        if (auto r = space.repaired(set.type(), chain.back().center, set.context())) cands.push_back(*r);
      }
      for (std::size_t i = 0; i < d; ++i) cands.push_back(space.point(i));
      auto inside = [&](const Code& c) {
        return j == 0 || space.dist(c, chain.back().center, j + 4).hi + radius < chain.back().radius;
      };
      for (int pass = 0; pass < 2 && !found; ++pass)
        for (const auto& c : cands) {
          if (!inside(c)) continue;
          if (pass == 0 ? set.self_witness(c, radius, d) : bool(set.witness(c, radius, d))) {
            chain.push_back({c, radius});
            found = true;
            break;
          }
        }
      if (!found && d >= max_depth)
        throw ResourceCap("realization chase: no ball of radius " + to_string(radius) + " found at depth " +
                          std::to_string(d));
    }
  }
  return chain;
}

// ---- back and forth ---------------------------------------------------------------

Code PartialMapEntry::at(const std::vector<RVBall>& chain, unsigned k) {
  return chain[std::min<std::size_t>(k, chain.size() - 1)].center;
}

std::vector<Code> PartialMap::domain(unsigned k) const {
  std::vector<Code> out;
  for (const auto& e : entries) out.push_back(PartialMapEntry::at(e.domain, k));
  return out;
}

std::vector<Code> PartialMap::range(unsigned k) const {
  std::vector<Code> out;
  for (const auto& e : entries) out.push_back(PartialMapEntry::at(e.range, k));
  return out;
}

namespace {

nlohmann::ordered_json chain_json(const PointSpace& space, const std::vector<RVBall>& chain) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& b : chain) out.push_back({{"center", space.point_text(b.center)}, {"radius", to_string(b.radius)}});
  return out;
}

}  // namespace

void extend_partial_map(const PointSpacePtr& s1, const PointSpacePtr& s2, PartialMap& map, const Code& next, bool forth,
                        const IsoOptions& opts) {
  const unsigned kw = opts.k + 2;
  const PointSpacePtr& src = forth ? s1 : s2;
  const PointSpacePtr& dst = forth ? s2 : s1;
  const auto ctx_src = forth ? map.domain(kw) : map.range(kw);
  const auto ctx_dst = forth ? map.range(kw) : map.domain(kw);

  IsolatedType p = src->type_of(next, ctx_src, kw + 4);
  nlohmann::ordered_json renorm = nlohmann::ordered_json::array();
  IsolatedType q = dst->transport(p, ctx_dst, renorm);
  RealizationSet set(dst, ctx_dst, q);
  auto chain = chase_point(set, kw, opts.depth, opts.max_depth);

  PartialMapEntry e;
  e.forth = forth;
  std::vector<RVBall> exact{{next, 0}};
  e.domain = forth ? exact : chain;
  e.range = forth ? chain : exact;

  nlohmann::ordered_json log;
  log["step"] = map.entries.size();
  log["direction"] = forth ? "forth" : "back";
  log["point"] = src->point_text(next);
  log["type"] = p.to_json();
  log["renormalized"] = renorm;
  log["chain"] = chain_json(*dst, chain);
  log["precision"] = kw;
  log["psi"] = to_string(dst->psi(q, chain.back().center, ctx_dst, kw + 4).hi);
  map.log.push_back(std::move(log));
  map.entries.push_back(std::move(e));
}

IsoOracle::IsoOracle(PointSpacePtr s1, PointSpacePtr s2, PartialMap map, unsigned k)
    : s1_(std::move(s1)), s2_(std::move(s2)), map_(std::move(map)), k_(k) {}

std::optional<Code> IsoOracle::map(const Code& p, unsigned k) const {
  for (const auto& e : map_.entries)
    if (e.forth && e.domain.front().center == p) return PartialMapEntry::at(e.range, k);
  return std::nullopt;
}

std::optional<Code> IsoOracle::inverse(const Code& q, unsigned k) const {
  for (const auto& e : map_.entries)
    if (!e.forth && e.range.front().center == q) return PartialMapEntry::at(e.domain, k);
  return std::nullopt;
}

nlohmann::ordered_json IsoOracle::log() const {
  nlohmann::ordered_json j;
  j["first"] = s1_->descriptor();
  j["second"] = s2_->descriptor();
  j["precision"] = k_;
  j["steps"] = map_.log;
  return j;
}

IsoOracle back_and_forth(PointSpacePtr s1, PointSpacePtr s2, const IsoOptions& opts) {
  if (s1->flavor() != s2->flavor()) throw PreconditionError("back and forth: presentations of different sorts");
  PartialMap map;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const bool forth = step % 2 == 0;
    const Code next = (forth ? s1 : s2)->point(step / 2);
    extend_partial_map(s1, s2, map, next, forth, opts);
  }
  return IsoOracle(std::move(s1), std::move(s2), std::move(map), opts.k + 2);
}

}  // namespace randqe
