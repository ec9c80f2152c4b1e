#include "randqe/presentation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace randqe {

namespace {

// Binary exponent of a dyadic denominator, or nullopt.
std::optional<unsigned> dyadic_level(const Rational& q) {
  mpz_class d = q.get_den();
  if ((d & (d - 1)) != 0) return std::nullopt;
  unsigned l = 0;
  while (d > 1) {
    d >>= 1;
    ++l;
  }
  return l;
}

std::optional<unsigned> event_level(const Event& e) {
  unsigned l = 0;
  for (const auto& iv : e.intervals()) {
    auto a = dyadic_level(iv.lo);
    auto b = dyadic_level(iv.hi);
    if (!a || !b) return std::nullopt;
    l = std::max({l, *a, *b});
  }
  return l;
}

Rational pow2(unsigned l) {
  mpz_class n = 1;
  n <<= l;
  return Rational(n);
}

// ---- the standard enumeration ----

constexpr unsigned kMaxLevel = 5;

std::uint64_t masks_at(unsigned l) { return l == 6 ? 0 : (std::uint64_t{1} << (std::uint64_t{1} << l)); }

std::uint64_t new_at(unsigned l) { return l == 0 ? 1 : masks_at(l) - masks_at(l - 1); }

// Mask at level l of a level-(l-1) mask: each cell split in two.
std::uint64_t expand(std::uint64_t c, unsigned bits) {
  std::uint64_t out = 0;
  for (unsigned b = 0; b < bits; ++b)
    if ((c >> b) & 1) out |= std::uint64_t{3} << (2 * b);
  return out;
}

// Number of coarse masks <= v at level l >= 1.
std::uint64_t coarse_le(std::uint64_t v, unsigned l) {
  const unsigned half_bits = 1u << (l - 1);
  std::uint64_t lo = 0, hi = masks_at(l - 1);  // count c with expand(c) <= v; monotone in c
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    if (expand(mid, half_bits) <= v)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

Event mask_event(std::uint64_t mask, unsigned l) {
  std::vector<Interval> ivs;
  const std::uint64_t cells = std::uint64_t{1} << l;
  const Rational w = 1 / pow2(l);
  for (std::uint64_t c = 0; c < cells; ++c)
    if ((mask >> c) & 1) ivs.push_back({w * static_cast<unsigned long>(c), w * static_cast<unsigned long>(c + 1)});
  return Event::from_intervals(std::move(ivs));
}

std::uint64_t event_mask(const Event& e, unsigned l) {
  std::uint64_t mask = 0;
  const Rational scale = pow2(l);
  for (const auto& iv : e.intervals()) {
    Rational a = iv.lo * scale, b = iv.hi * scale;
    for (std::uint64_t c = a.get_num().get_ui(); c < b.get_num().get_ui(); ++c) mask |= std::uint64_t{1} << c;
  }
  return mask;
}

// ---- evaluation of generated-point terms ----

std::uint64_t parse_special_name(const std::string& name) {
  if (name.size() < 2 || name[0] != 'p' || name.find_first_not_of("0123456789", 1) != std::string::npos)
    throw PreconditionError("generated point: '" + name + "' is not a special point name");
  return std::stoull(name.substr(1));
}

Event evaluate(const EvTerm& t, const std::function<Event(std::uint64_t)>& special) {
  switch (t.kind) {
    case EvTerm::Kind::Var: return special(parse_special_name(t.name));
    case EvTerm::Kind::Top: return Event::full();
    case EvTerm::Kind::Bot: return Event::empty();
    case EvTerm::Kind::Compl: return complement(evaluate(*t.args[0], special));
    case EvTerm::Kind::Meet: {
      Event e = Event::full();
      for (const auto& a : t.args) e = intersect(e, evaluate(*a, special));
      return e;
    }
    case EvTerm::Kind::Join: {
      Event e;
      for (const auto& a : t.args) e = unite(e, evaluate(*a, special));
      return e;
    }
    case EvTerm::Kind::Ev: throw PreconditionError("generated point: [[.]] terms have no meaning in B([0,1))");
  }
  return {};
}

// ---- maps ----

class IdentityMap : public EventMap {
 public:
  Event apply(const Event& e) const override { return e; }
  std::string describe() const override { return "id"; }
  EventMapPtr inverse() const override { return std::make_shared<IdentityMap>(); }
};

class RotationMap : public EventMap {
 public:
  explicit RotationMap(Rational c) : c_(std::move(c)) {
    c_ -= Rational(mpz_class(floor(c_)));
  }
  static mpz_class floor(const Rational& q) {
    mpz_class f;
    mpz_fdiv_q(f.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return f;
  }
  Event apply(const Event& e) const override {
    std::vector<Interval> out;
    for (const auto& iv : e.intervals()) {
      Rational a = iv.lo + c_, b = iv.hi + c_;
      if (a >= 1) {
        a -= 1;
        b -= 1;
      }
      if (b <= 1) {
        out.push_back({a, b});
      } else {
        out.push_back({a, Rational(1)});
        out.push_back({Rational(0), Rational(b - 1)});
      }
    }
    return Event::from_intervals(std::move(out));
  }
  std::string describe() const override { return "rot:" + to_string(c_); }
  EventMapPtr inverse() const override { return std::make_shared<RotationMap>(Rational(1 - c_)); }

 private:
  Rational c_;
};

class DigitPermutationMap : public EventMap {
 public:
  explicit DigitPermutationMap(std::vector<unsigned> perm) : perm_(std::move(perm)) {
    std::vector<unsigned> sorted = perm_;
    std::sort(sorted.begin(), sorted.end());
    for (unsigned i = 0; i < sorted.size(); ++i)
      if (sorted[i] != i) throw PreconditionError("digit permutation: not a permutation");
    if (perm_.empty()) throw PreconditionError("digit permutation: empty");
  }
  Event apply(const Event& e) const override {
    auto l = event_level(e);
    if (!l) throw PreconditionError("digit permutation: event is not dyadic");
    const unsigned B = static_cast<unsigned>(perm_.size());
    const unsigned L = (*l + B - 1) / B * B;
    if (L > 20) throw ResourceCap("digit permutation: level above 20");
    const Rational scale = pow2(L);
    const Rational w = 1 / scale;
    std::vector<Interval> out;
    for (const auto& iv : e.intervals()) {
      std::uint64_t a = Rational(iv.lo * scale).get_num().get_ui();
      std::uint64_t b = Rational(iv.hi * scale).get_num().get_ui();
      for (std::uint64_t c = a; c < b; ++c) {
        std::uint64_t img = 0;
        // Digit position p (0 = most significant) of c is bit L-1-p.
        for (unsigned blk = 0; blk < L; blk += B)
          for (unsigned i = 0; i < B; ++i) {
            unsigned from = blk + perm_[i];
            unsigned to = blk + i;
            if ((c >> (L - 1 - from)) & 1) img |= std::uint64_t{1} << (L - 1 - to);
          }
        out.push_back({w * static_cast<unsigned long>(img), w * static_cast<unsigned long>(img + 1)});
      }
    }
    return Event::from_intervals(std::move(out));
  }
  std::string describe() const override {
    std::string s = "digitperm:";
    for (unsigned p : perm_) s += std::to_string(p);
    return s;
  }
  EventMapPtr inverse() const override {
    std::vector<unsigned> inv(perm_.size());
    for (unsigned i = 0; i < perm_.size(); ++i) inv[perm_[i]] = i;
    return std::make_shared<DigitPermutationMap>(std::move(inv));
  }

 private:
  std::vector<unsigned> perm_;
};

}  // namespace

EventMapPtr identity_map() { return std::make_shared<IdentityMap>(); }
EventMapPtr rotation_map(const Rational& c) { return std::make_shared<RotationMap>(c); }
EventMapPtr digit_permutation_map(std::vector<unsigned> perm) {
  return std::make_shared<DigitPermutationMap>(std::move(perm));
}

Event std_special(std::uint64_t i) {
  if (i == 0) return Event::full();
  std::uint64_t rest = i - 1;
  for (unsigned l = 1; l <= kMaxLevel; ++l) {
    const std::uint64_t cnt = new_at(l);
    if (rest >= cnt) {
      rest -= cnt;
      continue;
    }
    // Smallest v with (v + 1 - coarse_le(v)) > rest.
    std::uint64_t lo = 0, hi = masks_at(l) - 1;
    while (lo < hi) {
      std::uint64_t mid = lo + (hi - lo) / 2;
      if (mid + 1 - coarse_le(mid, l) > rest)
        hi = mid;
      else
        lo = mid + 1;
    }
    return mask_event(lo, l);
  }
  throw ResourceCap("standard special point index beyond dyadic level 5");
}

std::optional<std::uint64_t> std_index(const Event& e) {
  if (e.is_empty()) return std::nullopt;
  auto l = event_level(e);
  if (!l || *l > kMaxLevel) return std::nullopt;
  if (*l == 0) return 0;
  std::uint64_t base = 1;
  for (unsigned j = 1; j < *l; ++j) base += new_at(j);
  std::uint64_t mask = event_mask(e, *l);
  return base + mask - coarse_le(mask, *l);
}

std::string special_name(std::uint64_t i) { return "p" + std::to_string(i); }
EvTermPtr special_term(std::uint64_t i) { return ev::var(special_name(i)); }

// ---- event presentations ---------------------------------------------------------

Bracket EventPresentation::dist(const EvTerm& a, const EvTerm& b, unsigned k) const {
  auto t = ev::symdiff(std::make_shared<const EvTerm>(a), std::make_shared<const EvTerm>(b));
  return mu(*t, k);
}

MappedEventPresentation::MappedEventPresentation(std::string descriptor, EventMapPtr sigma)
    : descriptor_(std::move(descriptor)), sigma_(std::move(sigma)) {}

Event MappedEventPresentation::special(std::uint64_t i) const { return sigma_->apply(std_special(i)); }

std::optional<Event> MappedEventPresentation::underlying(const EvTerm& t) const {
  return evaluate(t, [&](std::uint64_t i) { return special(i); });
}

Bracket MappedEventPresentation::mu(const EvTerm& t, unsigned) const { return Bracket::exact(measure(*underlying(t))); }

Rational IrrationalRotationPresentation::angle(unsigned j) {
  mpz_class two_scaled = 2;
  two_scaled <<= 2 * j;
  mpz_class root = sqrt(two_scaled);
  mpz_class scale = 1;
  scale <<= j;
  Rational a(root - scale, scale);
  a.canonicalize();
  return a;
}

Bracket IrrationalRotationPresentation::mu(const EvTerm& t, unsigned k) const {
  // Every endpoint moves by at most 2^-j when the angle is replaced by its
  // approximant; the measure moves by at most (#endpoints) 2^-j.
  std::size_t endpoints = 0;
  std::function<void(const EvTerm&)> count = [&](const EvTerm& s) {
    if (s.kind == EvTerm::Kind::Var) endpoints += 2 * std_special(parse_special_name(s.name)).intervals().size() + 2;
    for (const auto& a : s.args) count(*a);
  };
  count(t);
  unsigned j = k + 1;
  while ((std::size_t{1} << (j - k)) < endpoints + 1) ++j;
  RotationMap rot(angle(j));
  Rational v = measure(evaluate(t, [&](std::uint64_t i) { return rot.apply(std_special(i)); }));
  Rational err = Rational(static_cast<unsigned long>(endpoints)) / pow2(j);
  return {clamp01(v - err), clamp01(v + err)};
}

EventMapPtr make_event_map(std::string_view d) {
  if (d == "std" || d == "id") return identity_map();
  if (d.starts_with("rot:")) {
    if (d == "rot:sqrt2") throw PreconditionError("rot:sqrt2 is not an exact map");
    return rotation_map(parse_rational(d.substr(4)));
  }
  if (d == "digitperm") return digit_permutation_map({1, 0});
  if (d.starts_with("digitperm:")) {
    std::vector<unsigned> perm;
    for (char c : d.substr(10)) {
      if (c < '0' || c > '9') throw ParseError("digit permutation: expected digits", 10);
      perm.push_back(static_cast<unsigned>(c - '0'));
    }
    return digit_permutation_map(std::move(perm));
  }
  throw ParseError("unknown presentation '" + std::string(d) + "'", 0);
}

EventPresentationPtr make_event_presentation(std::string_view d) {
  if (d == "rot:sqrt2") return std::make_shared<IrrationalRotationPresentation>();
  EventMapPtr m = make_event_map(d);
  return std::make_shared<MappedEventPresentation>(d == "digitperm" ? m->describe() : std::string(d), m);
}

Inclusion formal_inclusion(const EventBall& b1, const EventBall& b2, const EventPresentation& pres, unsigned k) {
  if (b1.radius <= 0 || b2.radius <= 0) throw PreconditionError("formal inclusion: radii must be positive");
  Bracket d = pres.dist(*b1.center, *b2.center, k);
  if (pres.exact()) return d.lo + b1.radius < b2.radius ? Inclusion::Yes : Inclusion::NoAtThisPrecision;
  Rational upper = d.mid() + pow2_neg(k);
  return upper + b1.radius < b2.radius ? Inclusion::Yes : Inclusion::NoAtThisPrecision;
}

// ---- codes -----------------------------------------------------------------------

std::uint64_t cantor_pair(std::uint64_t x, std::uint64_t y) {
  mpz_class s = mpz_class(static_cast<unsigned long>(x)) + static_cast<unsigned long>(y);
  mpz_class z = s * (s + 1) / 2 + static_cast<unsigned long>(y);
  if (!z.fits_ulong_p()) throw ResourceCap("code overflow");
  return z.get_ui();
}

std::pair<std::uint64_t, std::uint64_t> cantor_unpair(std::uint64_t z) {
  mpz_class t = mpz_class(static_cast<unsigned long>(z)) * 8 + 1;
  mpz_class w = (sqrt(t) - 1) / 2;
  mpz_class tri = w * (w + 1) / 2;
  mpz_class y = mpz_class(static_cast<unsigned long>(z)) - tri;
  mpz_class x = w - y;
  return {x.get_ui(), y.get_ui()};
}

Code cantor_pair(const Code& x, const Code& y) {
  Code t = x + y;
  return t * (t + 1) / 2 + y;
}

std::pair<Code, Code> cantor_unpair(const Code& z) {
  Code w = (sqrt(Code(8 * z + 1)) - 1) / 2;
  Code y = z - w * (w + 1) / 2;
  return {w - y, y};
}

Code encode_list(const std::vector<std::uint64_t>& xs) {
  Code code = 0;
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) code = 1 + cantor_pair(Code(static_cast<unsigned long>(*it)), code);
  return code;
}

std::vector<Code> decode_list(const Code& code) {
  std::vector<Code> out;
  Code c = code;
  while (c > 0) {
    auto [x, rest] = cantor_unpair(Code(c - 1));
    out.push_back(x);
    c = rest;
  }
  return out;
}

// ---- randomization presentations -------------------------------------------------

RVPresentation::RVPresentation(StructurePtr m, EventMapPtr sigma, std::string descriptor)
    : m_(std::move(m)), sigma_(std::move(sigma)), descriptor_(std::move(descriptor)) {}

std::optional<SimpleRV> RVPresentation::decode(const Code& code) const {
  std::vector<std::uint64_t> xs;
  for (const auto& x : decode_list(code)) {
    if (!x.fits_ulong_p()) return std::nullopt;
    xs.push_back(x.get_ui());
  }
  if (xs.empty() || xs.size() % 2) return std::nullopt;
  const std::size_t n = xs.size() / 2;
  std::vector<RVCell> cells;
  Event covered;
  for (std::size_t t = 0; t < n; ++t) {
    ElementId a = m_->enumerate(xs[t]);
    Event J = sigma_->apply(std_special(xs[n + t]));
    cells.push_back({a, difference(J, covered)});
    covered = unite(covered, J);
  }
  cells.push_back({m_->enumerate(xs[0]), complement(covered)});
  return SimpleRV(m_, std::move(cells));
}

SimpleRV RVPresentation::special(const Code& code) const {
  auto f = decode(code);
  if (!f) throw PreconditionError("malformed special point code " + code.get_str());
  return *f;
}

Code RVPresentation::code_of(const std::vector<std::uint64_t>& elements,
                                      const std::vector<std::uint64_t>& events) {
  if (elements.size() != events.size() || elements.empty())
    throw PreconditionError("code_of: need equally many elements and events");
  std::vector<std::uint64_t> xs = elements;
  xs.insert(xs.end(), events.begin(), events.end());
  return encode_list(xs);
}

Rational RVPresentation::dist(const Code& a, const Code& b) const { return rv_dist(special(a), special(b)); }

Rational RVPresentation::mu(const Formula& phi, std::span<const std::string> vars,
                            std::span<const Code> points) const {
  std::vector<SimpleRV> f;
  for (auto c : points) f.push_back(special(c));
  return mu_formula(*m_, phi, vars, f);
}

RVPresentationPtr induced_randomization_presentation(StructurePtr m) {
  return std::make_shared<RVPresentation>(std::move(m));
}

RVPresentationPtr make_rv_presentation(StructurePtr m, std::string_view d) {
  if (d == "rot:sqrt2") throw PreconditionError("rot:sqrt2 is only available for the event sort");
  EventMapPtr sigma = make_event_map(d);
  return std::make_shared<RVPresentation>(std::move(m), sigma, d == "digitperm" ? sigma->describe() : std::string(d));
}

ComputablePoint ComputablePoint::constant(Code code) {
  return ComputablePoint([code](unsigned) { return code; });
}

// ---- awareness -------------------------------------------------------------------

Rational radius_enum(std::uint64_t i) {
  if (i == 0) return 1;
  std::uint64_t seen = 1;
  for (unsigned long q = 2;; ++q)
    for (unsigned long p = 1; p < q; ++p) {
      if (std::gcd(p, q) != 1) continue;
      if (seen++ == i) return ratio(static_cast<long>(p), static_cast<long>(q));
    }
}

bool ball_meets_constants(const SimpleRV& f, const Rational& radius) {
  std::map<ElementId, Rational> mass;
  for (const auto& c : f.cells()) mass[f.structure()->canonical(c.value)] += measure(c.event);
  for (const auto& [a, m] : mass)
    if (m > 1 - radius) return true;
  return false;
}

namespace {

class AwareStream : public CEClosedSet {
 public:
  AwareStream(RVPresentationPtr pres, AwareStrategy s) : pres_(std::move(pres)), strategy_(s) {
    if (s == AwareStrategy::Recognizable && !pres_->structure()->is_effectively_recognizable())
      throw PreconditionError("recognizable strategy: structure has no recognizer oracle");
  }

  std::optional<RVBall> next(std::size_t max_steps) override {
    for (std::size_t i = 0; i < max_steps; ++i) {
      std::uint64_t s = stage_++;
      ++steps_;
      std::uint64_t code, r, a = 0;
      if (strategy_ == AwareStrategy::Induced) {
        std::tie(code, r) = cantor_unpair(s);
      } else {
        std::uint64_t rest;
        std::tie(code, rest) = cantor_unpair(s);
        std::tie(r, a) = cantor_unpair(rest);
      }
      if (emitted_.count({code, r})) continue;
      auto f = pres_->decode(Code(static_cast<unsigned long>(code)));
      if (!f) continue;
      Rational radius = radius_enum(r);
      bool hit = false;
      if (strategy_ == AwareStrategy::Induced) {
        hit = ball_meets_constants(*f, radius);
      } else {
        const StructureOracle& m = *pres_->structure();
        FormulaPtr rho = recognizer(m, m.enumerate(a));
        std::vector<std::string> vars = free_vars(*rho);
        if (vars.size() > 1) throw PreconditionError("recognizer has more than one free variable");
        std::vector<Code> pts(vars.size(), Code(static_cast<unsigned long>(code)));
        if (vars.empty()) vars.push_back("x");
        if (pts.empty()) pts.push_back(Code(static_cast<unsigned long>(code)));
        hit = pres_->mu(*rho, vars, pts) > 1 - radius;
      }
      if (hit) {
        emitted_.insert({code, r});
        return RVBall{Code(static_cast<unsigned long>(code)), radius};
      }
    }
    return std::nullopt;
  }

  std::size_t steps() const override { return steps_; }

 private:
  RVPresentationPtr pres_;
  AwareStrategy strategy_;
  std::uint64_t stage_ = 0;
  std::size_t steps_ = 0;
  std::set<std::pair<std::uint64_t, std::uint64_t>> emitted_;
};

}  // namespace

std::unique_ptr<CEClosedSet> aware_enumerator(RVPresentationPtr pres, AwareStrategy strategy) {
  return std::make_unique<AwareStream>(std::move(pres), strategy);
}

ConstantSequence::ConstantSequence(RVPresentationPtr pres, AwareStrategy strategy, std::size_t max_steps)
    : pres_(std::move(pres)), strategy_(strategy), max_steps_(max_steps), stream_(aware_enumerator(pres_, strategy)) {}

bool ConstantSequence::pull() {
  auto b = stream_->next(max_steps_);
  if (!b) throw ResourceCap("aware enumeration made no progress within the step budget");
  emitted_.push_back(*b);
  if (b->radius >= ratio(1, 2)) return false;
  const std::size_t idx = small_.size();
  small_.push_back(*b);
  chain_.emplace_back();
  points_.emplace_back([this, idx](unsigned k) { return chase(idx, k); });
  return true;
}

void ConstantSequence::extend(std::size_t n) {
  while (small_.size() <= n) pull();
}

const ComputablePoint& ConstantSequence::operator[](std::size_t n) {
  extend(n);
  return points_[n];
}

const RVBall& ConstantSequence::ball(std::size_t n) {
  extend(n);
  return small_[n];
}

Code ConstantSequence::chase(std::size_t n, unsigned k) {
  auto& balls = chain_[n];
  if (balls.empty()) balls.push_back(small_[n]);
  while (balls.size() <= k) {
    const RVBall cur = balls.back();
    const Rational target = pow2_neg(static_cast<unsigned>(balls.size()));
    std::optional<RVBall> next;
    for (std::size_t i = 0; !next; ++i) {
      while (i >= emitted_.size()) pull();
      const RVBall& b = emitted_[i];
      if (b.radius < target && pres_->dist(b.center, cur.center) + b.radius < cur.radius) next = b;
    }
    balls.push_back(*next);
  }
  return balls[k].center;
}

InducedClassicalPresentation::InducedClassicalPresentation(RVPresentationPtr pres, AwareStrategy strategy)
    : pres_(pres), seq_(pres, strategy) {}

ElementId InducedClassicalPresentation::element(std::size_t n) {
  SimpleRV f = pres_->special(seq_[n](2));
  const StructureOracle& m = *pres_->structure();
  for (const auto& c : f.cells())
    if (f.mass(c.value) > ratio(3, 4)) return m.canonical(c.value);
  throw PreconditionError("induced classical presentation: approximant is not near a constant");
}

bool InducedClassicalPresentation::same(std::size_t a, std::size_t b) {
  return pres_->dist(seq_[a](3), seq_[b](3)) < ratio(1, 2);
}

std::size_t InducedClassicalPresentation::roundtrip_index(std::uint64_t i, std::size_t max_search) {
  const StructureOracle& m = *pres_->structure();
  ElementId target = m.canonical(m.enumerate(i));
  for (std::size_t n = 0; n < max_search; ++n)
    if (element(n) == target) return n;
  throw ResourceCap("round trip: constant not found among the first " + std::to_string(max_search) + " points");
}

bool decide_via_randomization(const RVPresentation& pres, const Formula& phi, std::span<const std::string> vars,
                              std::span<const ComputablePoint> points, unsigned max_k) {
  if (vars.size() != points.size()) throw PreconditionError("decide_via_randomization: arity mismatch");
  for (unsigned k = 1; k <= max_k; ++k) {
    std::vector<Code> codes;
    for (const auto& p : points) codes.push_back(p(k));
    Rational est = pres.mu(phi, vars, codes);
    Rational err = Rational(static_cast<unsigned long>(points.size())) * pow2_neg(k);
    if (est - err > ratio(1, 2)) return true;
    if (est + err < ratio(1, 2)) return false;
  }
  throw ResourceCap("decide_via_randomization: estimate did not separate from 1/2");
}

}  // namespace randqe
