#include "randqe/restricted.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace randqe {

namespace {

RestrictedFn make(RNode n) { return std::make_shared<const RNode>(std::move(n)); }

// Distinct nodes in post-order (children first).
std::vector<const RNode*> topo_order(const RestrictedFn& root) {
  std::vector<const RNode*> order;
  std::unordered_map<const RNode*, bool> seen;
  std::vector<std::pair<const RNode*, std::size_t>> stack{{root.get(), 0}};
  seen[root.get()] = true;
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->args.size()) {
      const RNode* c = n->args[next++].get();
      if (!seen[c]) {
        seen[c] = true;
        stack.emplace_back(c, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

// k with q = m / 2^k in lowest terms, or -1 if q is not dyadic or lies
// outside [0,1].
int dyadic_exponent(const Rational& q) {
  if (q < 0 || q > 1) return -1;
  const mpz_class& d = q.get_den();
  std::size_t k = mpz_scan1(d.get_mpz_t(), 0);
  if (mpz_sizeinbase(d.get_mpz_t(), 2) != k + 1) return -1;
  return static_cast<int>(k);
}

Rational max_entry(const std::vector<Rational>& v) {
  Rational m = 0;
  for (const auto& x : v) m = std::max(m, x);
  return m;
}

Bracket clip(Bracket b) {
  b.lo = clamp01(b.lo);
  b.hi = clamp01(b.hi);
  return b;
}

// Shares one Half-chain among many dyadic constants.
class DyadicBuilder {
 public:
  RestrictedFn build(const Rational& q) {
    if (q < 0 || q > 1) throw PreconditionError("dyadic constant outside [0,1]: " + to_string(q));
    if (q == 0) return rf::zero();
    if (q == 1) return rf::one();
    mpz_class den = q.get_den();
    if ((den & (den - 1)) != 0) throw PreconditionError("not a dyadic rational: " + to_string(q));
    auto it = cache_.find(q);
    if (it != cache_.end()) return it->second;
    std::size_t bits = mpz_sizeinbase(den.get_mpz_t(), 2) - 1;
    while (chain_.size() <= bits) chain_.push_back(chain_.empty() ? rf::one() : rf::half(chain_.back()));
    std::vector<RestrictedFn> terms;
    mpz_class num = q.get_num();
    for (std::size_t i = 1; i <= bits; ++i)
      if (mpz_tstbit(num.get_mpz_t(), bits - i)) terms.push_back(chain_[i]);
    auto v = rf::sum_of(std::move(terms));
    cache_.emplace(q, v);
    return v;
  }

 private:
  std::vector<RestrictedFn> chain_;
  std::map<Rational, RestrictedFn> cache_;
};

}  // namespace

namespace rf {

RestrictedFn zero() {
  static const RestrictedFn z = make({RNode::Kind::Zero, 0, 0, {}, nullptr});
  return z;
}
RestrictedFn one() {
  static const RestrictedFn o = make({RNode::Kind::One, 0, 0, {}, nullptr});
  return o;
}
RestrictedFn var(std::size_t i) { return make({RNode::Kind::Var, i, 0, {}, nullptr}); }
RestrictedFn half(RestrictedFn a) { return make({RNode::Kind::Half, 0, 0, {std::move(a)}, nullptr}); }
RestrictedFn sub(RestrictedFn a, RestrictedFn b) {
  return make({RNode::Kind::TruncSub, 0, 0, {std::move(a), std::move(b)}, nullptr});
}
RestrictedFn constant(const Rational& q) {
  if (q < 0 || q > 1) throw PreconditionError("constant outside [0,1]: " + to_string(q));
  if (q == 0) return zero();
  if (q == 1) return one();
  return make({RNode::Kind::Const, 0, q, {}, nullptr});
}
RestrictedFn apply(ComputableFnPtr fn, std::vector<RestrictedFn> args) {
  if (!fn || fn->arity() != args.size()) throw PreconditionError("apply: arity mismatch");
  return make({RNode::Kind::Apply, 0, 0, std::move(args), std::move(fn)});
}

RestrictedFn neg(RestrictedFn a) { return sub(one(), std::move(a)); }
RestrictedFn add(RestrictedFn a, RestrictedFn b) { return neg(sub(neg(std::move(a)), std::move(b))); }
RestrictedFn min(RestrictedFn a, RestrictedFn b) {
  auto d = sub(a, std::move(b));
  return sub(std::move(a), std::move(d));
}
RestrictedFn max(RestrictedFn a, RestrictedFn b) { return neg(min(neg(std::move(a)), neg(std::move(b)))); }
RestrictedFn abs_diff(RestrictedFn a, RestrictedFn b) { return add(sub(a, b), sub(b, a)); }

RestrictedFn scale(unsigned k, RestrictedFn a) {
  RestrictedFn acc;
  RestrictedFn pow = std::move(a);
  while (k > 0) {
    if (k & 1) acc = acc ? add(acc, pow) : pow;
    k >>= 1;
    if (k) pow = add(pow, pow);
  }
  return acc ? acc : zero();
}

namespace {
template <class F>
RestrictedFn fold(std::vector<RestrictedFn> xs, F f) {
  if (xs.empty()) return zero();
  while (xs.size() > 1) {
    std::vector<RestrictedFn> next;
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) next.push_back(f(xs[i], xs[i + 1]));
    if (xs.size() % 2) next.push_back(xs.back());
    xs = std::move(next);
  }
  return xs[0];
}
}  // namespace

RestrictedFn max_of(std::vector<RestrictedFn> xs) {
  return fold(std::move(xs), [](const RestrictedFn& a, const RestrictedFn& b) { return max(a, b); });
}
RestrictedFn sum_of(std::vector<RestrictedFn> xs) {
  return fold(std::move(xs), [](const RestrictedFn& a, const RestrictedFn& b) { return add(a, b); });
}

RestrictedFn dyadic(const Rational& q) { return DyadicBuilder().build(q); }

}  // namespace rf

std::size_t arity(const RestrictedFn& v) {
  std::size_t n = 0;
  for (const RNode* p : topo_order(v))
    if (p->kind == RNode::Kind::Var) n = std::max(n, p->index + 1);
  return n;
}

bool is_core(const RestrictedFn& v) {
  for (const RNode* p : topo_order(v))
    if (p->kind == RNode::Kind::Const || p->kind == RNode::Kind::Apply) return false;
  return true;
}

std::size_t node_count(const RestrictedFn& v) { return topo_order(v).size(); }

RestrictedFn substitute(const RestrictedFn& v, const std::vector<RestrictedFn>& args) {
  std::unordered_map<const RNode*, RestrictedFn> done;
  for (const RNode* p : topo_order(v)) {
    RestrictedFn r;
    switch (p->kind) {
      case RNode::Kind::Var:
        if (p->index >= args.size()) throw PreconditionError("substitute: missing argument");
        r = args[p->index];
        break;
      case RNode::Kind::Zero:
      case RNode::Kind::One:
      case RNode::Kind::Const: r = make(*p); break;
      default: {
        RNode n = *p;
        for (auto& a : n.args) a = done.at(a.get());
        r = make(std::move(n));
      }
    }
    done[p] = r;
  }
  return done.at(v.get());
}

// ---- tape ---------------------------------------------------------------------

Tape::Tape(const RestrictedFn& v) {
  auto order = topo_order(v);
  std::unordered_map<const RNode*, std::size_t> pos;
  for (const RNode* p : order) {
    Op op{p->kind, p->index, p->value, {}, p->fn};
    for (const auto& a : p->args) op.args.push_back(pos.at(a.get()));
    if (p->kind == RNode::Kind::Var) arity_ = std::max(arity_, p->index + 1);
    if (p->kind == RNode::Kind::Apply) exact_ = false;
    pos[p] = ops_.size();
    ops_.push_back(std::move(op));
  }
  std::vector<int> bits(ops_.size(), 0);
  for (std::size_t i = 0; i < ops_.size() && frac_bits_ >= 0; ++i) {
    const Op& op = ops_[i];
    if (op.kind == RNode::Kind::Const) {
      int k = dyadic_exponent(op.value);
      if (k < 0) frac_bits_ = -1;
      bits[i] = k;
    } else if (op.kind == RNode::Kind::Half) {
      bits[i] = bits[op.args[0]] + 1;
    } else {
      for (auto a : op.args) bits[i] = std::max(bits[i], bits[a]);
    }
    if (frac_bits_ >= 0) frac_bits_ = std::max(frac_bits_, bits[i]);
  }
}

// Machine-integer evaluation when all values fit on a common dyadic grid.
bool Tape::eval_fixed(std::span<const Rational> x, Rational& out) const {
  if (frac_bits_ < 0) return false;
  int in_bits = 0;
  for (std::size_t i = 0; i < arity_; ++i) {
    int k = dyadic_exponent(x[i]);
    if (k < 0) return false;
    in_bits = std::max(in_bits, k);
  }
  const int shift = in_bits + frac_bits_;
  if (shift > 62) return false;
  auto scaled = [&](const Rational& q) {
    mpz_class n = q.get_num() << static_cast<mp_bitcnt_t>(shift);
    n /= q.get_den();
    return static_cast<std::uint64_t>(n.get_ui());
  };
  const std::uint64_t one = std::uint64_t{1} << shift;
  std::vector<std::uint64_t> val(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    switch (op.kind) {
      case RNode::Kind::Zero: val[i] = 0; break;
      case RNode::Kind::One: val[i] = one; break;
      case RNode::Kind::Const: val[i] = scaled(op.value); break;
      case RNode::Kind::Var: val[i] = scaled(x[op.index]); break;
      case RNode::Kind::Half: val[i] = val[op.args[0]] >> 1; break;
      case RNode::Kind::TruncSub: {
        std::uint64_t a = val[op.args[0]], b = val[op.args[1]];
        val[i] = a > b ? a - b : 0;
        break;
      }
      case RNode::Kind::Apply: return false;
    }
  }
  out = Rational(mpz_class(static_cast<unsigned long>(val.back())), mpz_class(1)) / Rational(mpz_class(1) << static_cast<mp_bitcnt_t>(shift));
  out.canonicalize();
  return true;
}

Rational Tape::eval(std::span<const Rational> x) const {
  if (!exact_) throw PreconditionError("exact evaluation of a formula with computable leaves");
  if (x.size() < arity_) throw PreconditionError("eval_restricted: too few inputs");
  if (Rational fast; eval_fixed(x, fast)) return fast;
  std::vector<Rational> val(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    switch (op.kind) {
      case RNode::Kind::Zero: val[i] = 0; break;
      case RNode::Kind::One: val[i] = 1; break;
      case RNode::Kind::Const: val[i] = op.value; break;
      case RNode::Kind::Var: val[i] = x[op.index]; break;
      case RNode::Kind::Half: val[i] = val[op.args[0]] / 2; break;
      case RNode::Kind::TruncSub: val[i] = truncsub(val[op.args[0]], val[op.args[1]]); break;
      case RNode::Kind::Apply: break;
    }
  }
  return val.back();
}

Bracket Tape::eval(std::span<const Bracket> x, const Rational& tol) const {
  if (x.size() < arity_) throw PreconditionError("eval_restricted: too few inputs");
  std::vector<Bracket> val(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    switch (op.kind) {
      case RNode::Kind::Zero: val[i] = Bracket::exact(0); break;
      case RNode::Kind::One: val[i] = Bracket::exact(1); break;
      case RNode::Kind::Const: val[i] = Bracket::exact(op.value); break;
      case RNode::Kind::Var: val[i] = x[op.index]; break;
      case RNode::Kind::Half: val[i] = {val[op.args[0]].lo / 2, val[op.args[0]].hi / 2}; break;
      case RNode::Kind::TruncSub: {
        const Bracket& a = val[op.args[0]];
        const Bracket& b = val[op.args[1]];
        val[i] = {truncsub(a.lo, b.hi), truncsub(a.hi, b.lo)};
        break;
      }
      case RNode::Kind::Apply: {
        std::vector<Rational> mid;
        Rational slack = 0;
        auto lip = op.fn->lipschitz();
        for (std::size_t j = 0; j < op.args.size(); ++j) {
          const Bracket& a = val[op.args[j]];
          mid.push_back(a.mid());
          if (!a.is_exact()) {
            if (!op.fn->has_lipschitz()) throw PreconditionError("apply leaf without a Lipschitz bound");
            slack += lip[j] * a.width() / 2;
          }
        }
        Bracket b = op.fn->eval(mid, tol);
        val[i] = clip({b.lo - slack, b.hi + slack});
        if (slack > 0) {
          std::vector<Bracket> box;
          for (auto a : op.args) box.push_back(val[a]);
          if (auto e = op.fn->enclose(box, tol))
            val[i] = {std::max(val[i].lo, e->lo), std::max(std::max(val[i].lo, e->lo), std::min(val[i].hi, e->hi))};
        }
        break;
      }
    }
  }
  return val.back();
}

Rational eval_restricted(const RestrictedFn& v, std::span<const Rational> x) {
  for (const auto& q : x)
    if (q < 0 || q > 1) throw PreconditionError("eval_restricted: input outside [0,1]");
  return Tape(v).eval(x);
}

std::vector<Rational> lipschitz_vector(const RestrictedFn& v, std::size_t n) {
  auto order = topo_order(v);
  std::size_t dim = std::max(n, arity(v));
  std::unordered_map<const RNode*, std::vector<Rational>> lip;
  for (const RNode* p : order) {
    std::vector<Rational> l(dim, 0);
    switch (p->kind) {
      case RNode::Kind::Var: l[p->index] = 1; break;
      case RNode::Kind::Half:
        l = lip.at(p->args[0].get());
        for (auto& x : l) x /= 2;
        break;
      case RNode::Kind::TruncSub: {
        const RNode* a = p->args[0].get();
        const RNode* s = p->args[1].get();
        const auto& la = lip.at(a);
        bool min_pattern = s->kind == RNode::Kind::TruncSub && s->args[0].get() == a;
        const auto& lb = lip.at(min_pattern ? s->args[1].get() : s);
        for (std::size_t i = 0; i < dim; ++i) l[i] = min_pattern ? std::max(la[i], lb[i]) : la[i] + lb[i];
        break;
      }
      case RNode::Kind::Apply: {
        auto fl = p->fn->lipschitz();
        if (fl.empty()) throw PreconditionError("apply leaf without a Lipschitz bound");
        for (std::size_t j = 0; j < p->args.size(); ++j) {
          const auto& la = lip.at(p->args[j].get());
          if (fl[j] == 0) continue;
          for (std::size_t i = 0; i < dim; ++i) l[i] += fl[j] * la[i];
        }
        break;
      }
      default: break;
    }
    lip[p] = std::move(l);
  }
  return lip.at(v.get());
}

Rational lipschitz_modulus(const RestrictedFn& v) { return max_entry(lipschitz_vector(v)); }

std::string to_text(const RestrictedFn& v) {
  auto order = topo_order(v);
  std::unordered_map<const RNode*, int> refs;
  for (const RNode* p : order)
    for (const auto& a : p->args) ++refs[a.get()];
  std::unordered_map<const RNode*, std::string> text;
  std::vector<std::string> lets;
  for (const RNode* p : order) {
    std::string s;
    switch (p->kind) {
      case RNode::Kind::Zero: s = "0"; break;
      case RNode::Kind::One: s = "1"; break;
      case RNode::Kind::Var: s = "x" + std::to_string(p->index); break;
      case RNode::Kind::Const: s = "(const " + to_string(p->value) + ")"; break;
      case RNode::Kind::Half: s = "(half " + text.at(p->args[0].get()) + ")"; break;
      case RNode::Kind::TruncSub:
        s = "(sub " + text.at(p->args[0].get()) + " " + text.at(p->args[1].get()) + ")";
        break;
      case RNode::Kind::Apply:
        s = "(apply " + p->fn->describe();
        for (const auto& a : p->args) s += " " + text.at(a.get());
        s += ")";
        break;
    }
    bool leaf = p->args.empty() && p->kind != RNode::Kind::Const;
    if (refs[p] > 1 && !leaf && p != v.get()) {
      std::string name = "%" + std::to_string(lets.size());
      lets.push_back("(" + name + " " + s + ")");
      s = name;
    }
    text[p] = std::move(s);
  }
  if (lets.empty()) return text.at(v.get());
  std::string out = "(let (";
  for (std::size_t i = 0; i < lets.size(); ++i) out += (i ? " " : "") + lets[i];
  return out + ") " + text.at(v.get()) + ")";
}

// ---- computable functions ------------------------------------------------------

Rational ComputableFn::modulus(const Rational& eps) const {
  if (!has_lipschitz()) throw PreconditionError("function has no declared modulus");
  auto l = lipschitz();
  Rational m = max_entry(l);
  return m == 0 ? Rational(1) : Rational(eps / m);
}

Rational ComputableFn::approx(std::span<const Rational> x, unsigned k) const { return eval(x, pow2_neg(k)).mid(); }

RestrictedComputable::RestrictedComputable(RestrictedFn v, std::size_t n)
    : v_(std::move(v)), arity_(std::max(n, randqe::arity(v_))), lip_(lipschitz_vector(v_, arity_)), tape_(v_) {}

Bracket RestrictedComputable::eval(std::span<const Rational> x, const Rational& tol) const {
  if (tape_.exact()) return Bracket::exact(tape_.eval(x));
  std::vector<Bracket> in;
  for (const auto& q : x) in.push_back(Bracket::exact(q));
  Rational t = tol;
  for (int i = 0; i < 40; ++i) {
    Bracket b = tape_.eval(in, t);
    if (b.width() <= tol) return b;
    t /= 4;
  }
  throw ResourceCap("restricted evaluation did not reach the requested tolerance");
}

std::string RestrictedComputable::describe() const { return to_text(v_); }

ComputableFnPtr make_computable(const RestrictedFn& v, std::size_t n) {
  return std::make_shared<RestrictedComputable>(v, n);
}

OracleFn::OracleFn(std::string name, std::size_t n, Evaluator f, std::vector<Rational> lipschitz)
    : name_(std::move(name)), arity_(n), f_(std::move(f)), lip_(std::move(lipschitz)) {
  if (lip_.size() != arity_) throw PreconditionError("oracle: Lipschitz vector length mismatch");
}

OracleFn::OracleFn(std::string name, std::size_t n, Evaluator f, Modulus modulus)
    : name_(std::move(name)), arity_(n), f_(std::move(f)), modulus_(std::move(modulus)) {}

Rational OracleFn::modulus(const Rational& eps) const {
  if (modulus_) return modulus_(eps);
  return ComputableFn::modulus(eps);
}

Bracket OracleFn::eval(std::span<const Rational> x, const Rational& tol) const {
  if (x.size() != arity_) throw PreconditionError("oracle " + name_ + ": arity mismatch");
  Bracket b = f_(x, tol);
  if (b.width() > tol) throw PreconditionError("oracle " + name_ + " returned a bracket wider than requested");
  return b;
}

// ---- partial minimum -----------------------------------------------------------

PartialMinSpec PartialMinSpec::paired(std::size_t n, std::vector<std::size_t> minimized,
                                      std::vector<std::size_t> bounds) {
  if (minimized.size() != bounds.size()) throw PreconditionError("min_fn: bound pairing length mismatch");
  PartialMinSpec s;
  s.arity = n;
  s.passive.resize(n);
  for (std::size_t c = 0; c < n; ++c) s.passive[c] = c;
  for (std::size_t i = 0; i < minimized.size(); ++i) {
    if (minimized[i] >= n || bounds[i] >= n) throw PreconditionError("min_fn: coordinate out of range");
    s.passive[minimized[i]] = std::nullopt;
    s.groups.push_back({{minimized[i]}, bounds[i]});
  }
  return s;
}

PartialMinSpec PartialMinSpec::orthant(std::size_t n) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return paired(n, all, all);
}

std::string PartialMinSpec::describe() const {
  std::ostringstream os;
  os << "(spec " << arity << " (";
  for (std::size_t c = 0; c < passive.size(); ++c) {
    if (c) os << ' ';
    if (passive[c])
      os << *passive[c];
    else
      os << '_';
  }
  os << ")";
  for (const auto& g : groups) {
    os << " (";
    for (std::size_t i = 0; i < g.coords.size(); ++i) os << (i ? " " : "") << g.coords[i];
    os << " <= " << g.bound << ")";
  }
  os << ")";
  return os.str();
}

PartialMinFn::PartialMinFn(ComputableFnPtr base, PartialMinSpec spec) : base_(std::move(base)), spec_(std::move(spec)) {
  if (spec_.passive.size() != base_->arity()) throw PreconditionError("min_fn: spec does not match base arity");
  auto l = base_->lipschitz();
  if (!base_->has_lipschitz()) throw PreconditionError("min_fn: base function has no Lipschitz bound");
  std::vector<bool> covered(spec_.passive.size(), false);
  lip_.assign(spec_.arity, 0);
  for (std::size_t c = 0; c < spec_.passive.size(); ++c)
    if (spec_.passive[c]) {
      if (*spec_.passive[c] >= spec_.arity) throw PreconditionError("min_fn: passive coordinate out of range");
      lip_[*spec_.passive[c]] += l[c];
      covered[c] = true;
    }
  for (const auto& g : spec_.groups) {
    if (g.bound >= spec_.arity) throw PreconditionError("min_fn: bound coordinate out of range");
    Rational m = 0;
    for (auto c : g.coords) {
      if (c >= covered.size() || covered[c]) throw PreconditionError("min_fn: coordinate minimized twice or passive");
      covered[c] = true;
      m = std::max(m, l[c]);
    }
    lip_[g.bound] += m;
  }
  for (bool b : covered)
    if (!b) throw PreconditionError("min_fn: base coordinate neither passive nor minimized");
}

Bracket PartialMinFn::eval(std::span<const Rational> x, const Rational& tol) const {
  if (x.size() != spec_.arity) throw PreconditionError("min_fn: arity mismatch");
  auto L = base_->lipschitz();
  std::vector<Rational> y(base_->arity());
  for (std::size_t c = 0; c < y.size(); ++c)
    if (spec_.passive[c]) y[c] = x[*spec_.passive[c]];

  // Flattened minimized coordinates.
  std::vector<std::size_t> coord, group_of;
  std::vector<Rational> bound;
  for (std::size_t g = 0; g < spec_.groups.size(); ++g) {
    bound.push_back(std::max(Rational(0), x[spec_.groups[g].bound]));
    for (auto c : spec_.groups[g].coords) {
      coord.push_back(c);
      group_of.push_back(g);
    }
  }
  const std::size_t d = coord.size();
  const Rational tol_eval = tol / 4;

  struct Cell {
    std::vector<Rational> a, w;
    Rational lb, ub;
  };
  auto feasible = [&](const std::vector<Rational>& a) {
    std::vector<Rational> used(bound.size(), 0);
    for (std::size_t i = 0; i < d; ++i) used[group_of[i]] += a[i];
    for (std::size_t g = 0; g < bound.size(); ++g)
      if (used[g] > bound[g]) return false;
    return true;
  };
  std::vector<Bracket> box(y.size());
  for (std::size_t c = 0; c < y.size(); ++c) box[c] = Bracket::exact(y[c]);
  // Sample the centre when it is feasible, else the lower corner.
  auto evaluate = [&](Cell& cell) {
    std::vector<Rational> p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = cell.a[i] + cell.w[i] / 2;
    const bool centre = feasible(p);
    if (!centre) p = cell.a;
    for (std::size_t i = 0; i < d; ++i) y[coord[i]] = p[i];
    Bracket b = base_->eval(y, tol_eval);
    Rational slack = 0;
    for (std::size_t i = 0; i < d; ++i) slack += L[coord[i]] * cell.w[i];
    if (centre) slack /= 2;
    cell.lb = b.lo - slack;
    cell.ub = b.hi;
    for (std::size_t i = 0; i < d; ++i) box[coord[i]] = {cell.a[i], cell.a[i] + cell.w[i]};
    if (auto e = base_->enclose(box, tol_eval)) cell.lb = std::max(cell.lb, e->lo);
  };

  Cell root{std::vector<Rational>(d, 0), {}, 0, 0};
  for (std::size_t i = 0; i < d; ++i) root.w.push_back(bound[group_of[i]]);
  evaluate(root);
  if (d == 0) return clip({root.lb, root.ub});

  auto cmp = [](const Cell& p, const Cell& q) { return p.lb > q.lb; };
  std::priority_queue<Cell, std::vector<Cell>, decltype(cmp)> heap(cmp);
  Rational best = root.ub;
  heap.push(std::move(root));
  std::size_t cells = 1;
  while (true) {
    Cell c = heap.top();
    heap.pop();
    if (best - c.lb <= tol) return clip({std::min(c.lb, best), best});
    std::size_t k = 0;
    Rational widest = -1;
    for (std::size_t i = 0; i < d; ++i) {
      Rational s = L[coord[i]] * c.w[i];
      if (s > widest) {
        widest = s;
        k = i;
      }
    }
    for (int side = 0; side < 2; ++side) {
      Cell child{c.a, c.w, 0, 0};
      child.w[k] /= 2;
      if (side) child.a[k] += child.w[k];
      if (!feasible(child.a)) continue;
      evaluate(child);
      best = std::min(best, child.ub);
      if (child.lb < best) heap.push(std::move(child));
      if (++cells > kMaxCells) throw ResourceCap("partial minimum: branch-and-bound cell cap exceeded");
    }
    if (heap.empty()) return clip({best - tol, best});
  }
}

std::optional<Bracket> PartialMinFn::enclose(std::span<const Bracket> x, const Rational& tol) const {
  // Over a box, the minimum is at least the base minimum over the widest
  // feasible region and at most the base value with every minimized
  // coordinate at zero.
  std::vector<Bracket> wide(base_->arity()), low(base_->arity());
  for (std::size_t c = 0; c < wide.size(); ++c)
    if (spec_.passive[c]) wide[c] = low[c] = x[*spec_.passive[c]];
  for (const auto& g : spec_.groups)
    for (auto c : g.coords) {
      wide[c] = {0, std::max(Rational(0), x[g.bound].hi)};
      low[c] = Bracket::exact(0);
    }
  auto a = base_->enclose(wide, tol);
  auto b = base_->enclose(low, tol);
  if (!a || !b) return std::nullopt;
  return Bracket{a->lo, std::max(a->lo, b->hi)};
}

std::string PartialMinFn::describe() const { return "(pmin " + spec_.describe() + " " + base_->describe() + ")"; }

std::optional<PartialMinSpec> fuse_specs(const PartialMinSpec& inner, const PartialMinSpec& outer) {
  const std::size_t m = inner.arity;
  if (outer.passive.size() != m) return std::nullopt;
  // Outer group of each minimized middle coordinate.
  std::vector<std::optional<std::size_t>> outer_group(m);
  for (std::size_t g = 0; g < outer.groups.size(); ++g)
    for (auto b : outer.groups[g].coords) outer_group[b] = g;
  std::vector<std::size_t> inner_uses(m, 0);
  for (const auto& p : inner.passive)
    if (p && outer_group[*p]) return std::nullopt;
  for (const auto& g : inner.groups) ++inner_uses[g.bound];
  for (std::size_t b = 0; b < m; ++b)
    if (outer_group[b] && outer.groups[*outer_group[b]].coords.size() > 1 && inner_uses[b] > 1) return std::nullopt;

  PartialMinSpec f;
  f.arity = outer.arity;
  f.passive.resize(inner.passive.size());
  for (std::size_t c = 0; c < inner.passive.size(); ++c)
    if (inner.passive[c]) f.passive[c] = outer.passive[*inner.passive[c]];
  std::map<std::size_t, std::size_t> merged;  // outer group -> fused group
  for (const auto& g : inner.groups) {
    if (!outer_group[g.bound]) {
      f.groups.push_back({g.coords, *outer.passive[g.bound]});
      continue;
    }
    const auto& og = outer.groups[*outer_group[g.bound]];
    if (og.coords.size() == 1) {
      f.groups.push_back({g.coords, og.bound});
      continue;
    }
    auto [it, fresh] = merged.try_emplace(*outer_group[g.bound], f.groups.size());
    if (fresh) f.groups.push_back({{}, og.bound});
    auto& dst = f.groups[it->second].coords;
    dst.insert(dst.end(), g.coords.begin(), g.coords.end());
  }
  return f;
}

ComputableFnPtr min_fn(ComputableFnPtr u, PartialMinSpec spec) {
  if (auto* inner = dynamic_cast<const PartialMinFn*>(u.get()))
    if (auto f = fuse_specs(inner->spec(), spec)) return std::make_shared<PartialMinFn>(inner->base(), std::move(*f));
  return std::make_shared<PartialMinFn>(std::move(u), std::move(spec));
}

// ---- approximation ---------------------------------------------------------------

namespace {

unsigned bits_for(const Rational& target) {
  unsigned b = 0;
  while (pow2_neg(b) > target) ++b;
  return b;
}

// Calls f on every point of {0, h, ..., 1}^n with h = 2^-j.
template <class F>
void for_each_grid_point(std::size_t n, unsigned j, F f) {
  const std::size_t side = (std::size_t{1} << j) + 1;
  std::vector<std::size_t> idx(n, 0);
  std::vector<Rational> p(n, 0);
  Rational h = pow2_neg(j);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) p[i] = h * static_cast<unsigned long>(idx[i]);
    if (!f(p, idx)) return;
    std::size_t i = 0;
    while (i < n && ++idx[i] == side) idx[i++] = 0;
    if (i == n) return;
  }
}

std::size_t grid_size(std::size_t n, unsigned j, std::size_t cap) {
  if (j >= 40) return cap + 1;
  std::size_t side = (std::size_t{1} << j) + 1, total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > cap / side) return cap + 1;
    total *= side;
  }
  return total;
}

}  // namespace

RestrictedFn approx_restricted(const ComputableFn& u, const Rational& eps, ApproxOptions opts) {
  if (eps <= 0) throw PreconditionError("approx_restricted: eps must be positive");
  if (auto* rc = dynamic_cast<const RestrictedComputable*>(&u); rc && is_core(rc->fn())) return rc->fn();
  if (!u.has_lipschitz()) throw PreconditionError("approx_restricted: missing modulus");
  auto L = u.lipschitz();
  const std::size_t n = u.arity();
  const unsigned K = static_cast<unsigned>(ceil(max_entry(L)).get_ui());
  const unsigned cbits = bits_for(eps / 4);
  DyadicBuilder dy;
  auto value_at = [&](const std::vector<Rational>& p) {
    Rational m = u.eval(p, eps / 64).mid();
    return clamp01(dyadic_floor(m, cbits));
  };
  if (K == 0 || n == 0) return dy.build(value_at(std::vector<Rational>(n, 0)));

  unsigned j = 0;
  while (Rational(K * n) * pow2_neg(j) > eps / 4) ++j;
  if (grid_size(n, j, opts.max_points) > opts.max_points)
    throw ResourceCap("approx_restricted: lattice of mesh 2^-" + std::to_string(j) + " in dimension " +
                      std::to_string(n) + " exceeds the point cap");

  const std::size_t side = (std::size_t{1} << j) + 1;
  std::vector<std::vector<RestrictedFn>> dists(n, std::vector<RestrictedFn>(side));
  Rational h = pow2_neg(j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < side; ++t)
      dists[i][t] = rf::abs_diff(rf::var(i), dy.build(h * static_cast<unsigned long>(t)));

  std::vector<RestrictedFn> terms;
  for_each_grid_point(n, j, [&](const std::vector<Rational>& p, const std::vector<std::size_t>& idx) {
    Rational c = value_at(p);
    if (c > 0) {
      std::vector<RestrictedFn> parts;
      for (std::size_t i = 0; i < n; ++i) parts.push_back(dists[i][idx[i]]);
      terms.push_back(rf::sub(dy.build(c), rf::scale(K, rf::sum_of(std::move(parts)))));
    }
    return true;
  });
  return rf::max_of(std::move(terms));
}

bool verify_sup_close(const ComputableFn& u, const RestrictedFn& v, const Rational& eps, std::size_t max_points) {
  if (eps <= 0) throw PreconditionError("verify_sup_close: eps must be positive");
  const std::size_t n = std::max(u.arity(), arity(v));
  const Rational eta = eps / 6;
  Rational delta = u.modulus(eta);
  Rational lv = lipschitz_modulus(v);
  if (lv > 0) delta = std::min(delta, Rational(eta / lv));
  unsigned j = 0;
  while (pow2_neg(j) * static_cast<unsigned long>(std::max<std::size_t>(n, 1)) >= delta) ++j;

  // Combined per-coordinate Lipschitz bound, when u declares one.
  std::vector<Rational> lip;
  if (u.has_lipschitz()) {
    lip = lipschitz_vector(v, n);
    auto lu = u.lipschitz();
    for (std::size_t i = 0; i < lu.size(); ++i) lip[i] += lu[i];
  }
  Tape tape(v);
  std::size_t evaluated = 0;
  struct Cell {
    std::vector<Rational> lo;
    unsigned depth;
  };
  std::vector<Cell> stack{{std::vector<Rational>(n, 0), 0}};
  while (!stack.empty()) {
    Cell c = std::move(stack.back());
    stack.pop_back();
    const Rational half = pow2_neg(c.depth + 1);
    std::vector<Rational> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = c.lo[i] + half;
    if (++evaluated > max_points) throw ResourceCap("verify_sup_close: evaluation cap exceeded");
    Bracket ub = u.eval(std::span<const Rational>(p.data(), u.arity()), eta);
    Bracket vb;
    if (tape.exact()) {
      vb = Bracket::exact(tape.eval(p));
    } else {
      std::vector<Bracket> in;
      for (const auto& q : p) in.push_back(Bracket::exact(q));
      vb = tape.eval(in, eta);
    }
    Rational gap = std::max(ub.hi - vb.lo, vb.hi - ub.lo);
    if (!lip.empty()) {
      Rational spread = 0;
      for (std::size_t i = 0; i < n; ++i) spread += lip[i] * half;
      if (gap + spread < eps) continue;
    }
    if (c.depth >= j) {
      if (gap >= eps / 2) return false;
      continue;
    }
    // Split into 2^n children.
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Cell child{c.lo, c.depth + 1};
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) child.lo[i] += half;
      stack.push_back(std::move(child));
    }
  }
  return true;
}

}  // namespace randqe
