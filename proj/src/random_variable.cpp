#include "randqe/random_variable.hpp"

#include <algorithm>
#include <map>

namespace randqe {

SimpleRV::SimpleRV(StructurePtr m, std::vector<RVCell> cells) : m_(std::move(m)) {
  if (!m_) throw PreconditionError("random variable without a structure");
  std::map<ElementId, Event> merged;
  Rational total = 0;
  for (auto& c : cells) {
    total += measure(c.event);
    auto& e = merged[m_->canonical(c.value)];
    e = unite(e, c.event);
  }
  Event cover;
  for (auto& [id, ev] : merged) {
    cover = unite(cover, ev);
    if (!ev.is_empty()) cells_.push_back({id, std::move(ev)});
  }
  if (total != 1 || !(cover == Event::full()))
    throw PreconditionError("random variable cells must partition [0,1)");
}

SimpleRV SimpleRV::constant(StructurePtr m, ElementId a) { return SimpleRV(std::move(m), {{a, Event::full()}}); }

Rational SimpleRV::mass(ElementId a) const {
  ElementId c = m_->canonical(a);
  for (const auto& cell : cells_)
    if (cell.value == c) return measure(cell.event);
  return 0;
}

std::vector<RefinedCell> refine(std::span<const SimpleRV> rvs, std::span<const Event> events) {
  struct Piece {
    Rational lo, hi;
    ElementId value;
  };
  // Sorted interval lists; for events the value is unused.
  std::vector<std::vector<Piece>> rv_pieces, ev_pieces;
  std::vector<Rational> cuts{0, 1};
  for (const auto& f : rvs) {
    std::vector<Piece> ps;
    for (const auto& c : f.cells())
      for (const auto& iv : c.event.intervals()) ps.push_back({iv.lo, iv.hi, c.value});
    std::sort(ps.begin(), ps.end(), [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    for (const auto& p : ps) {
      cuts.push_back(p.lo);
      cuts.push_back(p.hi);
    }
    rv_pieces.push_back(std::move(ps));
  }
  for (const auto& e : events) {
    std::vector<Piece> ps;
    for (const auto& iv : e.intervals()) {
      ps.push_back({iv.lo, iv.hi, 0});
      cuts.push_back(iv.lo);
      cuts.push_back(iv.hi);
    }
    ev_pieces.push_back(std::move(ps));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::map<std::pair<std::vector<ElementId>, std::vector<bool>>, std::vector<Interval>> groups;
  std::vector<std::size_t> rp(rv_pieces.size(), 0), ep(ev_pieces.size(), 0);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const Rational& lo = cuts[k];
    std::vector<ElementId> vals(rv_pieces.size());
    std::vector<bool> in(ev_pieces.size());
    for (std::size_t i = 0; i < rv_pieces.size(); ++i) {
      auto& ps = rv_pieces[i];
      while (rp[i] < ps.size() && ps[rp[i]].hi <= lo) ++rp[i];
      vals[i] = ps.at(rp[i]).value;
    }
    for (std::size_t i = 0; i < ev_pieces.size(); ++i) {
      auto& ps = ev_pieces[i];
      while (ep[i] < ps.size() && ps[ep[i]].hi <= lo) ++ep[i];
      in[i] = ep[i] < ps.size() && ps[ep[i]].lo <= lo;
    }
    groups[{std::move(vals), std::move(in)}].push_back({lo, cuts[k + 1]});
  }
  std::vector<RefinedCell> out;
  for (auto& [key, ivs] : groups) out.push_back({key.first, key.second, Event::from_intervals(std::move(ivs))});
  return out;
}

namespace {
void same_structure(std::span<const SimpleRV> f) {
  for (const auto& g : f)
    if (g.structure() != f[0].structure()) throw PreconditionError("random variables over different structures");
}
}  // namespace

Rational rv_dist(const SimpleRV& f, const SimpleRV& g) {
  if (f.structure() != g.structure()) throw PreconditionError("rv_dist: structure mismatch");
  SimpleRV both[] = {f, g};
  Rational d = 0;
  for (const auto& c : refine(both))
    if (!f.structure()->decide_eq(c.values[0], c.values[1])) d += measure(c.event);
  return d;
}

Event event_map(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
                std::span<const SimpleRV> f) {
  if (vars.size() != f.size()) throw PreconditionError("event_map: variable/argument count mismatch");
  same_structure(f);
  std::vector<Interval> out;
  for (const auto& c : refine(f))
    if (decide(m, phi, vars, c.values))
      for (const auto& iv : c.event.intervals()) out.push_back(iv);
  return Event::from_intervals(std::move(out));
}

Event event_map(const StructureOracle& m, const Formula& phi, std::span<const SimpleRV> f) {
  auto vars = free_vars(phi);
  return event_map(m, phi, vars, f);
}

Rational mu_formula(const StructureOracle& m, const Formula& phi, std::span<const std::string> vars,
                    std::span<const SimpleRV> f) {
  return measure(event_map(m, phi, vars, f));
}

std::optional<ElementId> find_witness(const StructureOracle& m, const Formula& phi,
                                      std::span<const std::string> vars, std::span<const ElementId> values,
                                      const std::string& y, std::uint64_t cap) {
  auto ex = fo::exists(y, std::make_shared<const Formula>(phi));
  if (!decide(m, *ex, vars, values)) return std::nullopt;
  std::vector<std::string> all(vars.begin(), vars.end());
  all.push_back(y);
  std::vector<ElementId> vals(values.begin(), values.end());
  vals.push_back(0);
  for (std::uint64_t i = 0; i < cap; ++i) {
    vals.back() = m.enumerate(i);
    if (decide(m, phi, all, vals)) return m.canonical(vals.back());
  }
  throw ResourceCap("witness search exceeded its candidate cap");
}

SimpleRV fullness_witness(const StructureOracle& m, const Formula& phi, std::span<const std::string> xs,
                          const std::string& y, std::span<const SimpleRV> f, const Rational& eps) {
  if (eps <= 0) throw PreconditionError("fullness_witness: eps must be positive");
  if (!m.is_decidable()) throw PreconditionError("fullness_witness needs a decidable structure");
  if (f.empty()) throw PreconditionError("fullness_witness needs at least one random variable");
  same_structure(f);
  std::vector<RVCell> cells;
  for (const auto& c : refine(f)) {
    auto w = find_witness(m, phi, xs, c.values, y);
    cells.push_back({w ? *w : m.enumerate(0), c.event});
  }
  return SimpleRV(f[0].structure(), std::move(cells));
}

LeftCeExistential::LeftCeExistential(StructurePtr m, FormulaPtr phi, std::vector<std::string> xs, std::string y,
                                     std::vector<SimpleRV> f)
    : m_(std::move(m)), phi_(std::move(phi)), vars_(std::move(xs)) {
  if (!is_quantifier_free(*phi_)) throw PreconditionError("left-c.e. stream needs a quantifier-free formula");
  if (vars_.size() != f.size()) throw PreconditionError("left-c.e. stream: variable/argument count mismatch");
  vars_.push_back(std::move(y));
  cells_ = refine(f);
}

Rational LeftCeExistential::next() {
  std::size_t level = std::min(stage_, kMaxLevel);
  ++stage_;
  std::vector<ElementId> pool;
  for (std::size_t i = 0; i < level + 2; ++i) pool.push_back(m_->enumerate(i));
  // truth[c][b]: phi(values of cell c, pool[b])
  std::vector<std::vector<bool>> truth(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    std::vector<ElementId> vals = cells_[c].values;
    vals.push_back(0);
    for (ElementId b : pool) {
      vals.back() = b;
      truth[c].push_back(qf_decide(*m_, *phi_, vars_, vals));
    }
  }
  const std::size_t n = std::size_t{1} << level;
  Rational total = 0;
  for (std::size_t t = 0; t < n; ++t) {
    Event d = Event::interval(ratio(t, n), ratio(t + 1, n));
    std::vector<Rational> mass;
    for (const auto& c : cells_) mass.push_back(measure(intersect(d, c.event)));
    Rational best = 0;
    for (std::size_t b = 0; b < pool.size(); ++b) {
      Rational s = 0;
      for (std::size_t c = 0; c < cells_.size(); ++c)
        if (truth[c][b]) s += mass[c];
      best = std::max(best, s);
    }
    total += best;
  }
  best_ = std::max(best_, total);
  return best_;
}

SimpleRV witness_partition_rv(const StructureOracle& m, std::span<const FormulaPtr> thetas, const std::string& x,
                              std::span<const std::string> ys, std::span<const SimpleRV> f,
                              std::span<const Event> parts) {
  if (thetas.size() != parts.size()) throw PreconditionError("witness_partition_rv: formula/event count mismatch");
  if (f.empty()) throw PreconditionError("witness_partition_rv needs at least one random variable");
  same_structure(f);
  Rational total = 0;
  Event cover;
  for (const auto& b : parts) {
    total += measure(b);
    cover = unite(cover, b);
  }
  if (total != 1 || !(cover == Event::full()))
    throw PreconditionError("witness_partition_rv: events do not partition [0,1)");
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    auto ex = fo::exists(x, thetas[i]);
    if (!is_subset(parts[i], event_map(m, *ex, ys, f)))
      throw PreconditionError("witness_partition_rv: event " + std::to_string(i + 1) +
                              " is not inside [[exists x theta_" + std::to_string(i + 1) + "]]");
  }
  std::vector<RVCell> cells;
  for (const auto& c : refine(f, parts)) {
    std::size_t i = std::find(c.inside.begin(), c.inside.end(), true) - c.inside.begin();
    auto w = find_witness(m, *thetas[i], ys, c.values, x);
    if (!w) throw PreconditionError("witness_partition_rv: no witness for theta_" + std::to_string(i + 1));
    cells.push_back({*w, c.event});
  }
  return SimpleRV(f[0].structure(), std::move(cells));
}

namespace {
std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}
}  // namespace

SimpleRV parse_rv(std::string_view text, StructurePtr m) {
  auto s = trim(text);
  if (s.size() < 2 || s.front() != '{' || s.back() != '}') throw ParseError("random variable literal needs braces", 0);
  s = s.substr(1, s.size() - 2);
  std::vector<RVCell> cells;
  std::size_t offset = 1;
  while (!trim(s).empty()) {
    auto semi = s.find(';');
    auto entry = s.substr(0, semi);
    auto colon = entry.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected 'element: event'", offset);
    auto name = trim(entry.substr(0, colon));
    ElementId a;
    try {
      a = m->parse_element(name);
    } catch (const ParseError&) {
      throw ParseError("unknown element '" + std::string(name) + "'", offset);
    }
    cells.push_back({a, parse_event(trim(entry.substr(colon + 1)))});
    if (semi == std::string_view::npos) break;
    s.remove_prefix(semi + 1);
    offset += semi + 1;
  }
  return SimpleRV(std::move(m), std::move(cells));
}

std::string to_string(const SimpleRV& f) {
  std::string out = "{";
  for (std::size_t i = 0; i < f.cells().size(); ++i) {
    if (i) out += "; ";
    out += f.structure()->element_name(f.cells()[i].value) + ": " + to_string(f.cells()[i].event);
  }
  return out + "}";
}

}  // namespace randqe
