#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "veinlab/strings.hpp"
#include "veinlab/vein.hpp"

namespace veinlab {

/// Resolved information about one node of a (possibly infinitely branching)
/// labeled tree.  `width` is nullopt for an infinitely branching node; a
/// waiting node is one whose successors are not yet available at the current
/// stage (its width reads 0 but `genuine_leaf` is false).
struct TreeNodeInfo {
  int rank = 0;
  std::optional<std::uint64_t> width = 0;
  bool genuine_leaf = true;
  NodePath copy_source;  // address into the generating vein

  bool infinite() const { return !width.has_value(); }
  bool waiting() const { return width.has_value() && *width == 0 && !genuine_leaf; }

  std::uint64_t bounded_width(std::uint64_t cap) const {
    return width.has_value() ? std::min(*width, cap) : cap;
  }
};

/// A lazily enumerable labeled tree, addressed by NodePath.  Value type; the
/// resolver must be pure.
class LabeledTree {
public:
  using Resolver = std::function<std::optional<TreeNodeInfo>(const NodePath&)>;

  LabeledTree() = default;
  explicit LabeledTree(Resolver r) : resolve_(std::make_shared<Resolver>(std::move(r))) {}

  bool contains(const NodePath& p) const { return static_cast<bool>(info(p)); }

  std::optional<TreeNodeInfo> info(const NodePath& p) const {
    if (!resolve_) return std::nullopt;
    return (*resolve_)(p);
  }

  TreeNodeInfo at(const NodePath& p) const {
    auto i = info(p);
    if (!i) throw std::out_of_range("tree node " + p.str() + " not present");
    return *i;
  }

  bool child_present(const NodePath& p, Nat n) const {
    auto i = info(p);
    if (!i) return false;
    if (i->infinite()) return contains(p.child(n));
    return n < *i->width && contains(p.child(n));
  }

  /// Materialize all nodes up to the given depth, capping infinite widths.
  FiniteTree explore(std::size_t depth, std::uint64_t width_cap) const {
    FiniteTree out;
    if (!contains(NodePath())) return out;
    std::vector<NodePath> frontier{NodePath()};
    out.insert_with_prefixes(NodePath());
    for (std::size_t d = 0; d < depth && !frontier.empty(); ++d) {
      std::vector<NodePath> next;
      for (const auto& p : frontier) {
        auto i = at(p);
        for (std::uint64_t n = 0; n < i.bounded_width(width_cap); ++n) {
          NodePath c = p.child(static_cast<Nat>(n));
          if (contains(c)) {
            out.insert_with_prefixes(c);
            next.push_back(c);
          }
        }
      }
      frontier = std::move(next);
    }
    return out;
  }

  /// Node count of the longest root-to-leaf path among explored nodes.
  std::size_t levels(std::size_t depth, std::uint64_t width_cap) const {
    std::size_t best = 0;
    FiniteTree t = explore(depth, width_cap);
    for (const auto& p : t.nodes()) best = std::max(best, p.size() + 1);
    return best;
  }

private:
  std::shared_ptr<Resolver> resolve_;
};

/// Widths assigned to the fin nodes of a vein (by schematic address).
struct BranchingFunction {
  std::map<NodePath, Nat> assign;

  Nat operator()(const NodePath& vein_addr) const {
    auto it = assign.find(vein_addr);
    if (it == assign.end())
      throw std::invalid_argument("branching function undefined on fin node " +
                                  vein_addr.str());
    return it->second;
  }
  bool defined_on(const NodePath& vein_addr) const { return assign.count(vein_addr) > 0; }
};

namespace detail {

// Width rule abstracted over both plain branching functions and the
// last-entry rule of T(V): receives the vein address and the tree position.
using WidthRule = std::function<Nat(const NodePath& vein_addr, const NodePath& tree_pos)>;

inline std::optional<TreeNodeInfo> resolve_branched(const Vein& v, const WidthRule& rule,
                                                    const NodePath& p) {
  NodePath addr;  // schematic cursor into the vein
  const Vein::Node* cur = &v.root();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Nat n = p.at(i);
    switch (cur->mark) {
      case Mark::Leaf:
        return std::nullopt;
      case Mark::Fin: {
        Nat w = rule(addr, p.take(i));
        if (n >= w) return std::nullopt;
        break;
      }
      case Mark::Inf:
        break;  // all children share the schematic successor
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
    case Mark::Fin:
      info.width = rule(addr, p);
      info.genuine_leaf = false;
      break;
    case Mark::Inf:
      info.width = std::nullopt;
      info.genuine_leaf = false;
      break;
  }
  return info;
}

}  // namespace detail

/// The b-branching of a vein: fin nodes open into b(source)-many copies of
/// their successor schema, inf and leaf nodes are copied verbatim.
inline LabeledTree b_branching(const Vein& v, const BranchingFunction& b) {
  for (const auto& addr : v.addresses()) {
    if (v.at(addr).mark == Mark::Fin && !b.defined_on(addr))
      throw std::invalid_argument("branching function misses fin node " + addr.str());
  }
  auto vp = std::make_shared<Vein>(v);
  auto bp = std::make_shared<BranchingFunction>(b);
  return LabeledTree([vp, bp](const NodePath& p) {
    return detail::resolve_branched(
        *vp, [bp](const NodePath& a, const NodePath&) { return (*bp)(a); }, p);
  });
}

/// T(V): the closure of the vein branched by d(σ) = last entry of σ, so the
/// n-th copy of a fin node under its dispatch node opens into n branches.
inline LabeledTree tree_of(const Vein& v) {
  auto cp = std::make_shared<Vein>(closure(v));
  return LabeledTree([cp](const NodePath& p) {
    return detail::resolve_branched(
        *cp,
        [](const NodePath& a, const NodePath& pos) -> Nat {
          if (pos.empty())
            throw std::logic_error("closure root cannot be finitely branching");
          (void)a;
          return pos.last();
        },
        p);
  });
}

}  // namespace veinlab
