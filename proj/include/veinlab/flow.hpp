#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

#include "veinlab/labeled_tree.hpp"
#include "veinlab/point.hpp"
#include "veinlab/strings.hpp"

namespace veinlab {

/// Decidable matrix of a question family.  Rank-2 semantics: x lies in the
/// n-th piece at ξ iff the matrix holds at infinitely many prefix lengths;
/// rank-1: at every prefix length.
///
/// `trace_period(ξ,n,x,z)` returns (T,P) such that t ↦ eval(ξ,n,x↾t,z↾t) is
/// eventually periodic with preperiod T and period P whenever x and z carry
/// periodicity witnesses; this is what makes the semantics decidable on
/// eventually periodic probes.
class MatrixPred {
public:
  using Eval = std::function<bool(const NodePath&, Nat, BitSpan, BitSpan)>;
  using TracePeriod = std::function<std::optional<std::pair<Stage, Stage>>(
      const NodePath&, Nat, const StagePoint&, const StagePoint&)>;

  MatrixPred() = default;
  MatrixPred(std::string name, Eval eval, TracePeriod period = nullptr)
      : name_(std::move(name)),
        eval_(std::move(eval)),
        period_(std::move(period)) {}

  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(eval_); }

  bool eval(const NodePath& node, Nat outcome, BitSpan x, BitSpan z) const {
    return eval_(node, outcome, x, z);
  }

  std::optional<std::pair<Stage, Stage>> trace_period(const NodePath& node, Nat outcome,
                                                      const StagePoint& x,
                                                      const StagePoint& z) const {
    if (!period_) return std::nullopt;
    return period_(node, outcome, x, z);
  }

  /// Exact decision of the rank-1 set: the matrix holds at every stage.
  std::optional<bool> decide_pi1(const NodePath& node, Nat outcome, const StagePoint& x,
                                 const StagePoint& z) const {
    auto tp = trace_period(node, outcome, x, z);
    if (!tp) return std::nullopt;
    auto [T, P] = *tp;
    Bits xs = x.prefix(T + P), zs = z.prefix(T + P);
    for (Stage t = 0; t < T + P; ++t)
      if (!eval(node, outcome, xs.span(t), zs.span(t))) return false;
    return true;
  }

  /// Exact decision of the rank-2 set: the matrix holds infinitely often.
  std::optional<bool> decide_pi2(const NodePath& node, Nat outcome, const StagePoint& x,
                                 const StagePoint& z) const {
    auto tp = trace_period(node, outcome, x, z);
    if (!tp) return std::nullopt;
    auto [T, P] = *tp;
    Bits xs = x.prefix(T + P), zs = z.prefix(T + P);
    for (Stage t = T; t < T + P; ++t)
      if (eval(node, outcome, xs.span(t), zs.span(t))) return true;
    return false;
  }

private:
  std::string name_;
  Eval eval_;
  TracePeriod period_;
};

/// The rank-0 labels η(ξ,n): a partial, stage-gated map to binary strings.
/// `converges_at` is the semantic view (nullopt = diverges forever).
class ClopenFn {
public:
  using At = std::function<std::optional<Bits>(const NodePath&, Nat, Stage)>;
  using ConvergesAt = std::function<std::optional<Stage>(const NodePath&, Nat)>;
  // (T,P) bound for the trace t -> "no label converged by t is a prefix of
  // x|t"; what the complement questions of weak-totalization need
  using ComplementPeriod = std::function<std::optional<std::pair<Stage, Stage>>(
      const NodePath&, const StagePoint&)>;

  ClopenFn() = default;
  ClopenFn(std::string name, At at, ConvergesAt conv, ComplementPeriod comp = nullptr)
      : name_(std::move(name)),
        at_(std::move(at)),
        conv_(std::move(conv)),
        comp_(std::move(comp)) {}

  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(at_); }

  std::optional<Bits> at(const NodePath& node, Nat outcome, Stage s) const {
    return at_(node, outcome, s);
  }
  std::optional<Stage> converges_at(const NodePath& node, Nat outcome) const {
    return conv_ ? conv_(node, outcome) : std::nullopt;
  }
  void set_complement_period(ComplementPeriod f) { comp_ = std::move(f); }
  std::optional<std::pair<Stage, Stage>> complement_period(const NodePath& node,
                                                           const StagePoint& x) const {
    if (!comp_) return std::nullopt;
    return comp_(node, x);
  }

private:
  std::string name_;
  At at_;
  ConvergesAt conv_;
  ComplementPeriod comp_;
};

/// A budgeted monotone stream transform placed on a leaf.  The stage-|σ|
/// approximation of the machine on oracle σ is transform(σ, |σ|).
struct LeafFn {
  std::string name;
  bool nowhere_defined = false;
  std::function<Bits(const Bits&, std::uint64_t)> transform;

  Bits stage_output(const Bits& input) const { return transform(input, input.size()); }
};

/// A flowchart on a (stage approximated) branching of a vein.
struct Flow {
  std::string name;
  Vein vein;
  std::function<LabeledTree(Stage)> tree_at;  // stage-s tree approximation
  MatrixPred p;                               // rank-2 question matrices
  MatrixPred q;                               // rank-1 question matrices
  ClopenFn eta;                               // rank-0 labels
  std::function<const LeafFn*(const NodePath&)> leaf_fn;
  StagePoint oracle = StagePoint::zeros();
  std::uint64_t outcome_bound = 64;  // search cap at infinitely branching nodes
  bool weakly_total = false;

  LabeledTree tree(Stage s) const { return tree_at(s); }

  std::optional<std::pair<Stage, Stage>> eta_complement_period(const NodePath& node,
                                                               const StagePoint& x) const {
    return eta.complement_period(node, x);
  }
};

// ---------------------------------------------------------------------------
// Built-in question and leaf-function library.

namespace lib {

inline std::pair<Stage, Stage> point_period(const StagePoint& x, const StagePoint& z,
                                            Stage extra_pre = 0) {
  const auto& wx = x.periodicity();
  const auto& wz = z.periodicity();
  if (!wx || !wz) throw std::invalid_argument("point has no periodicity witness");
  Stage pre = std::max(wx->first.size(), wz->first.size()) + extra_pre;
  Stage per = std::lcm<Stage, Stage>(std::max<std::size_t>(wx->second.size(), 1),
                                     std::max<std::size_t>(wz->second.size(), 1));
  return {pre, per};
}

inline MatrixPred p_const(bool value) {
  return MatrixPred(
      value ? "true" : "false",
      [value](const NodePath&, Nat, BitSpan, BitSpan) { return value; },
      [](const NodePath&, Nat, const StagePoint&, const StagePoint&)
          -> std::optional<std::pair<Stage, Stage>> { return std::make_pair<Stage, Stage>(0, 1); });
}

/// Outcome 0 watches for prefixes ending in 1, every later outcome accepts.
/// On rank 2 this is the Cantor-space Dirichlet question: outcome 0 holds of
/// x iff x has infinitely many ones.
inline MatrixPred dir() {
  return MatrixPred(
      "dir",
      [](const NodePath&, Nat outcome, BitSpan x, BitSpan) {
        if (outcome >= 1) return true;
        return !x.empty() && x.last() == 1;
      },
      [](const NodePath&, Nat, const StagePoint& x, const StagePoint& z) {
        return std::optional(point_period(x, z, 1));
      });
}

/// Outcome i requires the prefix to end with the i-th pattern; outcomes past
/// the list accept everything.
inline MatrixPred ends_with(std::vector<Bits> patterns) {
  Stage w = 0;
  for (const auto& b : patterns) w = std::max<Stage>(w, b.size());
  auto ps = std::make_shared<std::vector<Bits>>(std::move(patterns));
  return MatrixPred(
      "ends_with",
      [ps](const NodePath&, Nat outcome, BitSpan x, BitSpan) {
        if (outcome >= ps->size()) return true;
        const Bits& pat = (*ps)[outcome];
        if (x.size() < pat.size()) return false;
        for (std::size_t i = 0; i < pat.size(); ++i)
          if (x.at(x.size() - pat.size() + i) != pat.at(i)) return false;
        return true;
      },
      [ps, w](const NodePath&, Nat, const StagePoint& x, const StagePoint& z) {
        return std::optional(point_period(x, z, w));
      });
}

/// q(ξ,n,σ): every scanned position up to n is still compatible with "the
/// n-th bit is `value`".  On rank 1 outcome n holds of x iff x(n) = value,
/// with unexplored outcomes vacuously alive.
inline MatrixPred bit_at(int value) {
  return MatrixPred(
      value == 0 ? "least_zero" : "least_one",
      [value](const NodePath&, Nat outcome, BitSpan x, BitSpan) {
        if (x.size() <= outcome) return true;
        return x.at(outcome) == value;
      },
      [](const NodePath&, Nat outcome, const StagePoint& x, const StagePoint& z) {
        return std::optional(point_period(x, z, outcome + 1));
      });
}

/// q(ξ,i,σ): σ is compatible with the i-th cylinder string.  Outcomes past
/// the list are empty (never hold).
inline MatrixPred cyl_list(std::vector<Bits> cylinders) {
  Stage w = 0;
  for (const auto& b : cylinders) w = std::max<Stage>(w, b.size());
  auto cs = std::make_shared<std::vector<Bits>>(std::move(cylinders));
  return MatrixPred(
      "cyl_list",
      [cs](const NodePath&, Nat outcome, BitSpan x, BitSpan) {
        if (outcome >= cs->size()) return false;
        const Bits& c = (*cs)[outcome];
        return comparable(c, x);
      },
      [cs, w](const NodePath&, Nat, const StagePoint& x, const StagePoint& z) {
        return std::optional(point_period(x, z, w));
      });
}

/// Outcome 0 watches prefixes with an even number of ones; later outcomes
/// accept.
inline MatrixPred parity_even() {
  return MatrixPred(
      "parity_even",
      [](const NodePath&, Nat outcome, BitSpan x, BitSpan) {
        if (outcome >= 1) return true;
        int ones = 0;
        for (std::size_t i = 0; i < x.size(); ++i) ones ^= x.at(i);
        return ones == 0;
      },
      [](const NodePath&, Nat, const StagePoint& x, const StagePoint& z) {
        auto [T, P] = point_period(x, z, 0);
        return std::optional(std::make_pair(T, 2 * P));
      });
}

/// The canonical enumeration of binary strings in length-lex order:
/// 0 ↦ "", 1 ↦ "0", 2 ↦ "1", 3 ↦ "00", ...
inline Bits nth_bit_string(std::uint64_t n) {
  std::uint64_t len = 0, count = 1;
  while (n >= count) {
    n -= count;
    ++len;
    count <<= 1;
  }
  Bits b;
  for (std::uint64_t i = 0; i < len; ++i)
    b.push_back(static_cast<int>((n >> (len - 1 - i)) & 1));
  return b;
}

/// η(ξ,n) = the n-th binary string, converging at stage n + delay.
inline ClopenFn eta_binary(Stage delay = 0) {
  return ClopenFn(
      "eta_binary",
      [delay](const NodePath&, Nat outcome, Stage s) -> std::optional<Bits> {
        if (s < outcome + delay) return std::nullopt;
        return nth_bit_string(outcome);
      },
      [delay](const NodePath&, Nat outcome) -> std::optional<Stage> {
        return outcome + delay;
      },
      // the empty label converges at `delay` and matches every point
      [delay](const NodePath&, const StagePoint&)
          -> std::optional<std::pair<Stage, Stage>> {
        return std::make_pair<Stage, Stage>(delay + 1, 1);
      });
}

inline ClopenFn eta_list(std::vector<Bits> labels, Stage delay = 0) {
  auto ls = std::make_shared<std::vector<Bits>>(std::move(labels));
  Stage width = 0;
  for (const auto& b : *ls) width = std::max<Stage>(width, b.size());
  return ClopenFn(
      "eta_list",
      [ls, delay](const NodePath&, Nat outcome, Stage s) -> std::optional<Bits> {
        if (outcome >= ls->size() || s < delay) return std::nullopt;
        return (*ls)[outcome];
      },
      [ls, delay](const NodePath&, Nat outcome) -> std::optional<Stage> {
        if (outcome >= ls->size()) return std::nullopt;
        return delay;
      },
      [ls, delay, width](const NodePath&, const StagePoint&)
          -> std::optional<std::pair<Stage, Stage>> {
        return std::make_pair<Stage, Stage>(delay + std::max<Stage>(width, ls->size()) + 1, 1);
      });
}

inline ClopenFn eta_none() {
  return ClopenFn(
      "eta_none",
      [](const NodePath&, Nat, Stage) -> std::optional<Bits> { return std::nullopt; },
      [](const NodePath&, Nat) -> std::optional<Stage> { return std::nullopt; },
      [](const NodePath&, const StagePoint&) -> std::optional<std::pair<Stage, Stage>> {
        return std::make_pair<Stage, Stage>(0, 1);
      });
}

inline LeafFn leaf_identity() {
  return LeafFn{"id", false, [](const Bits& in, std::uint64_t budget) {
                  return in.take(std::min<std::uint64_t>(in.size(), budget));
                }};
}

inline LeafFn leaf_const_stream(Bits word) {
  auto w = std::make_shared<Bits>(std::move(word));
  return LeafFn{"const:" + w->str(), false, [w](const Bits& in, std::uint64_t budget) {
                  std::uint64_t n = std::min<std::uint64_t>(in.size(), budget);
                  Bits out;
                  if (w->empty()) return out;
                  for (std::uint64_t i = 0; i < n; ++i)
                    out.push_back(w->at(i % w->size()));
                  return out;
                }};
}

inline LeafFn leaf_zeros() { return leaf_const_stream(Bits::from_string("0")); }
inline LeafFn leaf_ones() { return leaf_const_stream(Bits::from_string("1")); }

inline LeafFn leaf_flip() {
  return LeafFn{"flip", false, [](const Bits& in, std::uint64_t budget) {
                  std::uint64_t n = std::min<std::uint64_t>(in.size(), budget);
                  Bits out;
                  for (std::uint64_t i = 0; i < n; ++i) out.push_back(1 - in.at(i));
                  return out;
                }};
}

/// Emits the first half of what it has seen; the machine that keeps its
/// output one step behind the evidence.
inline LeafFn leaf_half() {
  return LeafFn{"half", false, [](const Bits& in, std::uint64_t budget) {
                  std::uint64_t n = std::min<std::uint64_t>(in.size(), budget);
                  return in.take(n / 2);
                }};
}

inline LeafFn leaf_delay(std::uint64_t k) {
  return LeafFn{"delay:" + std::to_string(k), false,
                [k](const Bits& in, std::uint64_t budget) {
                  std::uint64_t n = std::min<std::uint64_t>(in.size(), budget);
                  return in.take(n > k ? n - k : 0);
                }};
}

inline LeafFn leaf_nowhere() {
  return LeafFn{"nowhere", true,
                [](const Bits&, std::uint64_t) { return Bits(); }};
}

}  // namespace lib

// ---------------------------------------------------------------------------
// Helpers for assembling concrete flows.

/// Leaf assignment backed by an explicit table plus an optional fallback for
/// schematic positions (all leaves under an infinite branching share one).
class LeafTable {
public:
  LeafTable() = default;

  void set(const NodePath& node, LeafFn fn) {
    table_[node] = std::make_shared<LeafFn>(std::move(fn));
  }
  void set_default(LeafFn fn) { fallback_ = std::make_shared<LeafFn>(std::move(fn)); }

  std::function<const LeafFn*(const NodePath&)> fn() const {
    auto table = std::make_shared<std::map<NodePath, std::shared_ptr<LeafFn>>>(table_);
    auto fb = fallback_;
    return [table, fb](const NodePath& node) -> const LeafFn* {
      auto it = table->find(node);
      if (it != table->end()) return it->second.get();
      return fb ? fb.get() : nullptr;
    };
  }

private:
  std::map<NodePath, std::shared_ptr<LeafFn>> table_;
  std::shared_ptr<LeafFn> fallback_;
};

/// A flow over a fixed (stage independent) branching of a vein.
inline Flow make_static_flow(std::string name, const Vein& vein, const BranchingFunction& b,
                             MatrixPred p, MatrixPred q, ClopenFn eta, LeafTable leaves,
                             StagePoint oracle = StagePoint::zeros()) {
  Flow f;
  f.name = std::move(name);
  f.vein = vein;
  LabeledTree t = b_branching(vein, b);
  f.tree_at = [t](Stage) { return t; };
  f.p = std::move(p);
  f.q = std::move(q);
  f.eta = std::move(eta);
  f.leaf_fn = leaves.fn();
  f.oracle = oracle;
  return f;
}

}  // namespace veinlab
