#pragma once

#include <memory>
#include <vector>

#include "veinlab/flow.hpp"
#include "veinlab/tp.hpp"

namespace veinlab {

/// Cantor pairing, used wherever the construction codes tuples into one
/// natural.
inline std::uint64_t pair_code(std::uint64_t a, std::uint64_t b) {
  return (a + b) * (a + b + 1) / 2 + b;
}
inline std::pair<std::uint64_t, std::uint64_t> unpair_code(std::uint64_t c) {
  std::uint64_t w = 0;
  while ((w + 1) * (w + 2) / 2 <= c) ++w;
  std::uint64_t b = c - w * (w + 1) / 2;
  return {w - b, b};
}
inline std::uint64_t triple_code(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return pair_code(pair_code(a, b), c);
}

/// A budgeted evaluator of branching widths: the width of a fin node
/// becomes visible once its computation converges.
class WidthEvaluator {
public:
  using At = std::function<std::optional<Nat>(const NodePath&, Stage)>;
  using ConvergesAt = std::function<std::optional<Stage>(const NodePath&)>;

  WidthEvaluator() = default;
  WidthEvaluator(std::string name, At at, ConvergesAt conv)
      : name_(std::move(name)), at_(std::move(at)), conv_(std::move(conv)) {}

  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(at_); }

  std::optional<Nat> at(const NodePath& vein_addr, Stage s) const {
    return at_(vein_addr, s);
  }
  std::optional<Stage> converges_at(const NodePath& vein_addr) const {
    return conv_ ? conv_(vein_addr) : std::nullopt;
  }

private:
  std::string name_;
  At at_;
  ConvergesAt conv_;
};

namespace lib {

inline WidthEvaluator width_const(Nat value, Stage delay = 0) {
  return WidthEvaluator(
      "const:" + std::to_string(value),
      [value, delay](const NodePath&, Stage s) -> std::optional<Nat> {
        if (s < delay) return std::nullopt;
        return value;
      },
      [delay](const NodePath&) -> std::optional<Stage> { return delay; });
}

inline WidthEvaluator width_never() {
  return WidthEvaluator(
      "never", [](const NodePath&, Stage) -> std::optional<Nat> { return std::nullopt; },
      [](const NodePath&) -> std::optional<Stage> { return std::nullopt; });
}

inline WidthEvaluator width_table(std::map<NodePath, std::pair<Stage, Nat>> table) {
  auto t = std::make_shared<std::map<NodePath, std::pair<Stage, Nat>>>(std::move(table));
  return WidthEvaluator(
      "table",
      [t](const NodePath& addr, Stage s) -> std::optional<Nat> {
        auto it = t->find(addr);
        if (it == t->end() || s < it->second.first) return std::nullopt;
        return it->second.second;
      },
      [t](const NodePath& addr) -> std::optional<Stage> {
        auto it = t->find(addr);
        if (it == t->end()) return std::nullopt;
        return it->second.first;
      });
}

}  // namespace lib

/// One registered partial flow: the tuple of budgeted evaluators the
/// enumeration hands out at an index.
struct RegistryEntry {
  std::string name;
  WidthEvaluator width;
  MatrixPred p;
  MatrixPred q;
  ClopenFn eta;
  LeafFn leaf;
};

/// The effective enumeration of partial flows: indices are registry
/// positions, appended before an experiment starts and immutable afterwards.
class FlowRegistry {
public:
  std::size_t add(RegistryEntry entry) {
    entries_.push_back(std::make_shared<RegistryEntry>(std::move(entry)));
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  bool has(std::size_t e) const { return e < entries_.size(); }

  const RegistryEntry& entry(std::size_t e) const {
    if (!has(e)) throw std::out_of_range("no registry entry " + std::to_string(e));
    return *entries_[e];
  }

  std::shared_ptr<const RegistryEntry> entry_ptr(std::size_t e) const {
    if (!has(e)) throw std::out_of_range("no registry entry " + std::to_string(e));
    return entries_[e];
  }

private:
  std::vector<std::shared_ptr<const RegistryEntry>> entries_;
};

namespace detail {

/// Resolver for the stage-s approximation of the e-th branching of a vein:
/// fin nodes sprout children only once their width computation converges,
/// rank-0 dispatch children only once their label converges; children of a
/// positive-rank infinite node are always present.
inline std::optional<TreeNodeInfo> resolve_staged(const Vein& v, const RegistryEntry& ent,
                                                  Stage s, const NodePath& p) {
  NodePath addr;
  const Vein::Node* cur = &v.root();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Nat n = p.at(i);
    switch (cur->mark) {
      case Mark::Leaf:
        return std::nullopt;
      case Mark::Fin: {
        auto w = ent.width.at(addr, s);
        if (!w || n >= *w) return std::nullopt;
        break;
      }
      case Mark::Inf:
        if (cur->rank == 0) {
          if (!ent.eta.at(p.take(i), n, s)) return std::nullopt;
        }
        break;
    }
    addr = addr.child(0);
    cur = &cur->kids[0];
  }
  TreeNodeInfo info;
  info.rank = cur->rank;
  info.copy_source = addr;
  switch (cur->mark) {
    case Mark::Leaf:
      info.width = 0;
      info.genuine_leaf = true;
      break;
    case Mark::Fin: {
      auto w = ent.width.at(addr, s);
      info.width = w ? *w : 0;
      info.genuine_leaf = false;
      break;
    }
    case Mark::Inf:
      info.width = std::nullopt;
      info.genuine_leaf = false;
      break;
  }
  return info;
}

}  // namespace detail

/// The stage-s approximation of the e-th branching of V.
inline LabeledTree stage_branching(const FlowRegistry& reg, const Vein& v, std::size_t e,
                                   Stage s) {
  if (!is_normal(v)) throw std::invalid_argument("stage_branching needs a normal vein");
  auto vp = std::make_shared<Vein>(v);
  auto ep = reg.entry_ptr(e);
  return LabeledTree([vp, ep, s](const NodePath& p) {
    return detail::resolve_staged(*vp, *ep, s, p);
  });
}

/// The e-th partial flow on V, with all stage gates wired in.
inline Flow registry_flow(const FlowRegistry& reg, const Vein& v, std::size_t e,
                          StagePoint oracle = StagePoint::zeros()) {
  if (!is_normal(v)) throw std::invalid_argument("registry_flow needs a normal vein");
  auto vp = std::make_shared<Vein>(v);
  auto ep = reg.entry_ptr(e);
  Flow f;
  f.name = "reg[" + std::to_string(e) + "]:" + ep->name;
  f.vein = v;
  f.tree_at = [vp, ep](Stage s) {
    return LabeledTree([vp, ep, s](const NodePath& p) {
      return detail::resolve_staged(*vp, *ep, s, p);
    });
  };
  f.p = ep->p;
  f.q = ep->q;
  f.eta = ep->eta;
  auto leaf = std::make_shared<LeafFn>(ep->leaf);
  f.leaf_fn = [leaf](const NodePath&) -> const LeafFn* { return leaf.get(); };
  f.oracle = oracle;
  return f;
}

}  // namespace veinlab
