#pragma once

// Restricted connectives: functions [0,1]^n -> [0,1] generated by 0, 1, x/2
// and truncated subtraction under composition, plus the computable
// continuous functions they approximate.
//
// A RestrictedFn is an immutable DAG. Two extension leaves exist beside the
// core generators: exact rational constants and applications of an arbitrary
// ComputableFn. `is_core` tells whether a DAG uses neither.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "randqe/rational.hpp"

namespace randqe {

class ComputableFn;
using ComputableFnPtr = std::shared_ptr<const ComputableFn>;

struct RNode;
using RestrictedFn = std::shared_ptr<const RNode>;

struct RNode {
  enum class Kind { Zero, One, Var, Half, TruncSub, Const, Apply };
  Kind kind = Kind::Zero;
  std::size_t index = 0;  // Var
  Rational value;         // Const
  std::vector<RestrictedFn> args;
  ComputableFnPtr fn;  // Apply
};

namespace rf {
RestrictedFn zero();
RestrictedFn one();
RestrictedFn var(std::size_t i);
RestrictedFn half(RestrictedFn a);
RestrictedFn sub(RestrictedFn a, RestrictedFn b);
/// Extension leaf; q must lie in [0,1].
RestrictedFn constant(const Rational& q);
RestrictedFn apply(ComputableFnPtr fn, std::vector<RestrictedFn> args);

// Macros, expanded to core nodes.
RestrictedFn neg(RestrictedFn a);
RestrictedFn add(RestrictedFn a, RestrictedFn b);  // min(1, a+b)
RestrictedFn min(RestrictedFn a, RestrictedFn b);
RestrictedFn max(RestrictedFn a, RestrictedFn b);
RestrictedFn abs_diff(RestrictedFn a, RestrictedFn b);
/// k-fold truncated sum a + ... + a, i.e. min(1, k*a); k = 0 gives zero.
RestrictedFn scale(unsigned k, RestrictedFn a);
/// Balanced folds; an empty list gives zero.
RestrictedFn max_of(std::vector<RestrictedFn> xs);
RestrictedFn sum_of(std::vector<RestrictedFn> xs);
/// Dyadic rational in [0,1] from Half-chains and truncated addition.
RestrictedFn dyadic(const Rational& q);
}  // namespace rf

std::size_t arity(const RestrictedFn& v);
bool is_core(const RestrictedFn& v);
std::size_t node_count(const RestrictedFn& v);

/// Replaces Var(i) by args[i].
RestrictedFn substitute(const RestrictedFn& v, const std::vector<RestrictedFn>& args);

/// Topologically sorted evaluation program for a DAG; evaluation cost is
/// linear in the number of distinct nodes.
class Tape {
 public:
  explicit Tape(const RestrictedFn& v);

  std::size_t arity() const { return arity_; }
  bool exact() const { return exact_; }
  Rational eval(std::span<const Rational> x) const;
  /// Interval evaluation; Apply leaves are evaluated at the midpoint of their
  /// argument boxes with tolerance `tol` and widened by their Lipschitz bounds.
  Bracket eval(std::span<const Bracket> x, const Rational& tol) const;

 private:
  struct Op {
    RNode::Kind kind;
    std::size_t index;
    Rational value;
    std::vector<std::size_t> args;
    ComputableFnPtr fn;
  };
  bool eval_fixed(std::span<const Rational> x, Rational& out) const;

  std::vector<Op> ops_;
  std::size_t arity_ = 0;
  bool exact_ = true;
  // Binary digits a node adds below the inputs' own; -1 if some constant is
  // not dyadic.
  int frac_bits_ = 0;
};

/// Exact value; requires every input in [0,1] and no Apply leaves.
Rational eval_restricted(const RestrictedFn& v, std::span<const Rational> x);

/// Per-coordinate l1 Lipschitz bounds (length max(arity, n)). Rules: Var 1 in
/// its coordinate, constants 0, Half halves, TruncSub adds, except that the
/// min pattern a - (a - b) gets the coordinatewise max.
std::vector<Rational> lipschitz_vector(const RestrictedFn& v, std::size_t n = 0);
/// Largest entry of the vector above.
Rational lipschitz_modulus(const RestrictedFn& v);

/// Deterministic text; shared subterms are bound once in a `let`.
std::string to_text(const RestrictedFn& v);

class ComputableFn {
 public:
  virtual ~ComputableFn() = default;

  virtual std::size_t arity() const = 0;
  /// Per-coordinate l1 Lipschitz bounds; empty when only a modulus is known.
  virtual std::vector<Rational> lipschitz() const = 0;
  /// False when only a modulus of continuity is known.
  virtual bool has_lipschitz() const { return true; }
  /// delta with |u(x)-u(y)| <= eps whenever ||x-y||_1 <= delta.
  virtual Rational modulus(const Rational& eps) const;
  /// Bracket of u(x) of width at most tol.
  virtual Bracket eval(std::span<const Rational> x, const Rational& tol) const = 0;
  virtual std::string describe() const = 0;
  /// Optional enclosure of the range of u over a box, used for pruning.
  virtual std::optional<Bracket> enclose(std::span<const Bracket>, const Rational&) const { return std::nullopt; }

  /// |u(x) - approx(x, k)| <= 2^-k.
  Rational approx(std::span<const Rational> x, unsigned k) const;
};

/// Wraps a restricted DAG.
class RestrictedComputable : public ComputableFn {
 public:
  RestrictedComputable(RestrictedFn v, std::size_t arity);
  std::size_t arity() const override { return arity_; }
  std::vector<Rational> lipschitz() const override { return lip_; }
  Bracket eval(std::span<const Rational> x, const Rational& tol) const override;
  std::string describe() const override;
  std::optional<Bracket> enclose(std::span<const Bracket> box, const Rational& tol) const override {
    return tape_.eval(box, tol);
  }
  const RestrictedFn& fn() const { return v_; }

 private:
  RestrictedFn v_;
  std::size_t arity_;
  std::vector<Rational> lip_;
  Tape tape_;
};

/// Black-box function with a declared Lipschitz vector or modulus.
class OracleFn : public ComputableFn {
 public:
  using Evaluator = std::function<Bracket(std::span<const Rational>, const Rational&)>;
  using Modulus = std::function<Rational(const Rational&)>;

  OracleFn(std::string name, std::size_t arity, Evaluator f, std::vector<Rational> lipschitz);
  OracleFn(std::string name, std::size_t arity, Evaluator f, Modulus modulus);

  std::size_t arity() const override { return arity_; }
  std::vector<Rational> lipschitz() const override { return lip_; }
  bool has_lipschitz() const override { return !modulus_; }
  Rational modulus(const Rational& eps) const override;
  Bracket eval(std::span<const Rational> x, const Rational& tol) const override;
  std::string describe() const override { return name_; }

 private:
  std::string name_;
  std::size_t arity_;
  Evaluator f_;
  std::vector<Rational> lip_;
  Modulus modulus_;
};

ComputableFnPtr make_computable(const RestrictedFn& v, std::size_t arity);

/// Which base coordinates are minimized and what bounds them.
///
/// Every base coordinate is either passive (read from a result coordinate) or
/// minimized. Minimized coordinates come in groups: the coordinates of a
/// group range over s >= 0 with sum(s) <= x[bound]. Singleton groups give the
/// lower-left orthant minimum.
struct PartialMinSpec {
  struct Group {
    std::vector<std::size_t> coords;
    std::size_t bound = 0;
  };
  std::size_t arity = 0;
  std::vector<std::optional<std::size_t>> passive;
  std::vector<Group> groups;

  /// min{u(s) : s_i <= r_i} with every coordinate minimized.
  static PartialMinSpec orthant(std::size_t n);
  /// Minimize the listed coordinates with s_i <= x[bounds[i]], all other base
  /// coordinates passive and read from the same-numbered result coordinate.
  static PartialMinSpec paired(std::size_t n, std::vector<std::size_t> minimized, std::vector<std::size_t> bounds);

  std::string describe() const;
};

/// Branch-and-bound partial minimum.
class PartialMinFn : public ComputableFn {
 public:
  PartialMinFn(ComputableFnPtr base, PartialMinSpec spec);
  std::size_t arity() const override { return spec_.arity; }
  std::vector<Rational> lipschitz() const override { return lip_; }
  Bracket eval(std::span<const Rational> x, const Rational& tol) const override;
  std::string describe() const override;
  std::optional<Bracket> enclose(std::span<const Bracket> box, const Rational& tol) const override;
  const ComputableFnPtr& base() const { return base_; }
  const PartialMinSpec& spec() const { return spec_; }

  /// Cap on branch-and-bound cells per evaluation.
  static constexpr std::size_t kMaxCells = 400000;

 private:
  ComputableFnPtr base_;
  PartialMinSpec spec_;
  std::vector<Rational> lip_;
};

/// Spec of min_outer(min_inner(u)) as one partial minimum over u, when the
/// two feasible regions compose into a single one of the same shape.
std::optional<PartialMinSpec> fuse_specs(const PartialMinSpec& inner, const PartialMinSpec& outer);

/// Partial minimum; a partial minimum of a partial minimum is fused when
/// fuse_specs allows it.
ComputableFnPtr min_fn(ComputableFnPtr u, PartialMinSpec spec);

struct ApproxOptions {
  /// Largest number of lattice points before ResourceCap is raised.
  std::size_t max_points = 1u << 16;
};

/// Restricted v close to u, by lattice interpolation
/// v = max_p (c_p - K*||x - p||_1).
RestrictedFn approx_restricted(const ComputableFn& u, const Rational& eps, ApproxOptions opts = {});

/// Sup-distance check. Dyadic cells are split until a Lipschitz bound
/// certifies them or their width reaches the mesh below the eps/6 moduli of u
/// and v, where a centre gap of eps/2 or more rejects. A true answer
/// guarantees sup |u - v| < eps, and sup |u - v| < eps/6 guarantees true.
/// `max_points` caps the number of centres evaluated.
bool verify_sup_close(const ComputableFn& u, const RestrictedFn& v, const Rational& eps,
                      std::size_t max_points = 1u << 20);

}  // namespace randqe
