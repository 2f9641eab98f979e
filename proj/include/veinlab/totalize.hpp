#pragma once

#include <memory>
#include <mutex>

#include "veinlab/registry.hpp"

namespace veinlab {

namespace detail {

/// Where a node of the weak-totalization lives relative to the base flow.
struct TotNode {
  enum class Kind { SyntheticRoot, Star, Base };
  Kind kind = Kind::Base;
  NodePath base;        // meaningful for Base
  bool doubled = false; // Base node whose branches were doubled
  TreeNodeInfo base_info;
};

struct TotCore {
  Flow base;
  LabeledTree sem_tree;  // structure in the limit; gates are monotone
  bool add_root = false;
  int root_rank = 0;  // rank of the base root (from the vein)

  bool vstar(const TreeNodeInfo& info) const {
    if (info.genuine_leaf || info.waiting()) return false;
    const Vein::Node& src = base.vein.at(info.copy_source);
    return src.mark == Mark::Fin && src.kids[0].mark == Mark::Inf;
  }

  int child_rank(const NodePath& base_node) const {
    const TreeNodeInfo info = sem_tree.at(base_node);
    return base.vein.at(info.copy_source).kids[0].rank;
  }

  std::optional<TotNode> resolve(const LabeledTree& base_tree, const NodePath& p) const {
    std::size_t i = 0;
    NodePath bp;
    if (add_root) {
      if (p.empty()) return TotNode{TotNode::Kind::SyntheticRoot, {}, false, {}};
      if (p.at(0) == 0) {
        if (p.size() != 1) return std::nullopt;
        return TotNode{TotNode::Kind::Star, {}, false, {}};
      }
      if (p.at(0) != 1) return std::nullopt;
      i = 1;
    }
    for (; i < p.size(); ++i) {
      auto info = base_tree.info(bp);
      if (!info || info->genuine_leaf) return std::nullopt;
      Nat n = p.at(i);
      if (vstar(*info)) {
        std::uint64_t w = *info->width;
        if (n >= 2 * w) return std::nullopt;
        if (n % 2 == 0) {
          if (i != p.size() - 1) return std::nullopt;
          return TotNode{TotNode::Kind::Star, bp, false, {}};
        }
        bp = bp.child(n / 2);
      } else {
        if (!info->infinite() && n >= *info->width) return std::nullopt;
        bp = bp.child(n);
      }
    }
    auto info = base_tree.info(bp);
    if (!info) return std::nullopt;
    return TotNode{TotNode::Kind::Base, bp, vstar(*info), *info};
  }

  std::optional<TreeNodeInfo> info_of(const LabeledTree& base_tree, const NodePath& p) const {
    auto node = resolve(base_tree, p);
    if (!node) return std::nullopt;
    TreeNodeInfo out;
    switch (node->kind) {
      case TotNode::Kind::SyntheticRoot:
        out.rank = root_rank + 1;
        out.width = 2;
        out.genuine_leaf = false;
        out.copy_source = NodePath();
        break;
      case TotNode::Kind::Star:
        out.rank = 0;
        out.width = 0;
        out.genuine_leaf = true;
        out.copy_source = NodePath();
        break;
      case TotNode::Kind::Base:
        out = node->base_info;
        if (node->doubled) out.width = 2 * *out.width;
        break;
    }
    return out;
  }

  /// The complement question over all branches hanging below a node whose
  /// own question has rank `rank_below`: no rank-1 branch is still alive at
  /// this prefix (the matrices fail visibly), no converged rank-0 cylinder
  /// matches.
  bool complement_holds(const NodePath& base_node, int rank_below, BitSpan x,
                        BitSpan z, std::uint64_t bound) const {
    if (rank_below == 1) {
      for (std::uint64_t m = 0; m < bound; ++m)
        if (base.q.eval(base_node, static_cast<Nat>(m), x, z)) return false;
      return true;
    }
    // rank 0: complement of a union of cylinders
    Stage s = x.size();
    for (std::uint64_t m = 0; m <= s; ++m) {
      auto label = base.eta.at(base_node, static_cast<Nat>(m), s);
      if (label && is_prefix(*label, x)) return false;
    }
    return true;
  }

  std::optional<std::pair<Stage, Stage>> complement_period(const NodePath& base_node,
                                                           int rank_below,
                                                           const StagePoint& x,
                                                           const StagePoint& z,
                                                           std::uint64_t bound) const {
    if (rank_below == 1) {
      Stage T = 0, P = 1;
      for (std::uint64_t m = 0; m < bound; ++m) {
        auto tp = base.q.trace_period(base_node, static_cast<Nat>(m), x, z);
        if (!tp) return std::nullopt;
        T = std::max(T, tp->first);
        P = std::lcm(P, tp->second);
      }
      return std::make_pair(T, P);
    }
    return base.eta_complement_period(base_node, x);
  }
};

}  // namespace detail

/// The weak-totalization of a partial flow on a strongly normal vein: every
/// finitely branching node whose successors branch infinitely has its
/// branches doubled with complement questions and star leaves, and an
/// infinitely branching root gains a two-branching root one rank up.  The
/// generated function is unchanged; the point is that question families now
/// cover, so the staged walk always finds an outcome in the limit.
inline Flow weak_totalize(const Flow& base) {
  if (!is_strongly_normal(base.vein))
    throw std::invalid_argument("weak_totalize needs a strongly normal vein");
  auto core = std::make_shared<detail::TotCore>();
  core->base = base;
  core->sem_tree = base.tree(kSemanticStage);
  core->root_rank = base.vein.root().rank;
  core->add_root = base.vein.root().mark == Mark::Inf;
  std::uint64_t bound = base.outcome_bound;

  Flow f;
  f.name = base.name + "^tot";
  f.vein = core->add_root ? increment_fin(base.vein, core->root_rank + 1) : base.vein;
  f.tree_at = [core](Stage s) {
    LabeledTree bt = core->base.tree(s);
    return LabeledTree(
        [core, bt](const NodePath& p) { return core->info_of(bt, p); });
  };

  f.p = MatrixPred(
      "tot(" + base.p.name() + ")",
      [core, bound](const NodePath& node, Nat outcome, BitSpan x, BitSpan z) {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn) return false;
        if (tn->kind == detail::TotNode::Kind::SyntheticRoot) {
          if (outcome == 0)
            return core->complement_holds(NodePath(), core->root_rank, x, z, bound);
          return outcome == 1;
        }
        if (tn->doubled) {
          if (outcome % 2 == 1)
            return core->base.p.eval(tn->base, outcome / 2, x, z);
          return core->complement_holds(tn->base.child(outcome / 2),
                                        core->child_rank(tn->base), x, z, bound);
        }
        return core->base.p.eval(tn->base, outcome, x, z);
      },
      [core, bound](const NodePath& node, Nat outcome, const StagePoint& x,
                    const StagePoint& z) -> std::optional<std::pair<Stage, Stage>> {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn) return std::nullopt;
        if (tn->kind == detail::TotNode::Kind::SyntheticRoot) {
          if (outcome == 0)
            return core->complement_period(NodePath(), core->root_rank, x, z, bound);
          return std::make_pair<Stage, Stage>(0, 1);
        }
        if (tn->doubled) {
          if (outcome % 2 == 1)
            return core->base.p.trace_period(tn->base, outcome / 2, x, z);
          return core->complement_period(tn->base.child(outcome / 2),
                                         core->child_rank(tn->base), x, z, bound);
        }
        return core->base.p.trace_period(tn->base, outcome, x, z);
      });

  f.q = MatrixPred(
      "tot(" + base.q.name() + ")",
      [core, bound](const NodePath& node, Nat outcome, BitSpan x, BitSpan z) {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn) return false;
        if (tn->kind == detail::TotNode::Kind::SyntheticRoot) {
          if (outcome == 0)
            return core->complement_holds(NodePath(), core->root_rank, x, z, bound);
          return outcome == 1;
        }
        if (tn->doubled) {
          if (outcome % 2 == 1)
            return core->base.q.eval(tn->base, outcome / 2, x, z);
          return core->complement_holds(tn->base.child(outcome / 2),
                                        core->child_rank(tn->base), x, z, bound);
        }
        return core->base.q.eval(tn->base, outcome, x, z);
      },
      [core, bound](const NodePath& node, Nat outcome, const StagePoint& x,
                    const StagePoint& z) -> std::optional<std::pair<Stage, Stage>> {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn) return std::nullopt;
        if (tn->kind == detail::TotNode::Kind::SyntheticRoot) {
          if (outcome == 0)
            return core->complement_period(NodePath(), core->root_rank, x, z, bound);
          return std::make_pair<Stage, Stage>(0, 1);
        }
        if (tn->doubled) {
          if (outcome % 2 == 1)
            return core->base.q.trace_period(tn->base, outcome / 2, x, z);
          return core->complement_period(tn->base.child(outcome / 2),
                                         core->child_rank(tn->base), x, z, bound);
        }
        return core->base.q.trace_period(tn->base, outcome, x, z);
      });

  f.eta = ClopenFn(
      "tot(" + base.eta.name() + ")",
      [core](const NodePath& node, Nat outcome, Stage s) -> std::optional<Bits> {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn || tn->kind != detail::TotNode::Kind::Base) return std::nullopt;
        return core->base.eta.at(tn->base, outcome, s);
      },
      [core](const NodePath& node, Nat outcome) -> std::optional<Stage> {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn || tn->kind != detail::TotNode::Kind::Base) return std::nullopt;
        return core->base.eta.converges_at(tn->base, outcome);
      });
  f.eta.set_complement_period(
      [core](const NodePath& node, const StagePoint& x)
          -> std::optional<std::pair<Stage, Stage>> {
        auto tn = core->resolve(core->sem_tree, node);
        if (!tn || tn->kind != detail::TotNode::Kind::Base) return std::nullopt;
        return core->base.eta_complement_period(tn->base, x);
      });

  auto star_leaf = std::make_shared<LeafFn>(lib::leaf_nowhere());
  f.leaf_fn = [core, star_leaf](const NodePath& node) -> const LeafFn* {
    auto tn = core->resolve(core->sem_tree, node);
    if (!tn) return nullptr;
    if (tn->kind == detail::TotNode::Kind::Star) return star_leaf.get();
    if (tn->kind == detail::TotNode::Kind::SyntheticRoot) return nullptr;
    return core->base.leaf_fn(tn->base);
  };

  f.oracle = base.oracle;
  f.outcome_bound = base.outcome_bound;
  f.weakly_total = true;
  return f;
}

namespace detail {

/// Shared state of a merged flow: the old flow plus the set of spliced
/// rank-0 finitely-branching vein addresses.  New tree positions map to old
/// ones by inserting, at every spliced level, the branch whose cylinder the
/// input has matched.
struct MergeCore {
  Flow old_flow;
  Vein old_vein;
  Vein new_vein;
  LabeledTree old_tree;

  bool spliced(const Vein::Node& n) const { return n.mark == Mark::Fin && n.rank == 0; }

  /// Old tree position for a new position, given the input prefix; nullopt
  /// while some dispatch cylinder is still undetermined.
  std::optional<NodePath> to_old(const NodePath& p, BitSpan x) const {
    NodePath old_path;
    const Vein::Node* cur = &old_vein.root();
    std::size_t i = 0;
    while (true) {
      while (spliced(*cur)) {
        auto info = old_tree.info(old_path);
        if (!info || !info->width) return std::nullopt;
        std::optional<Nat> match;
        for (std::uint64_t k = 0; k < *info->width; ++k) {
          auto label = old_flow.eta.at(old_path, static_cast<Nat>(k), x.size());
          if (label && is_prefix(*label, x)) {
            match = static_cast<Nat>(k);
            break;
          }
        }
        if (!match) return std::nullopt;
        old_path = old_path.child(*match);
        cur = &cur->kids[0];
      }
      if (i == p.size()) break;
      old_path = old_path.child(p.at(i));
      if (cur->mark == Mark::Leaf) return std::nullopt;
      cur = &cur->kids[0];
      ++i;
    }
    return old_path;
  }

  mutable std::map<NodePath, std::unique_ptr<LeafFn>> leaf_cache;
  mutable std::mutex leaf_mutex;
};

}  // namespace detail

/// The normalization lemma's flow translation: rank-0 finite branches are
/// folded away, their cylinders turned into a dispatch inside the questions
/// and leaf functions below.  The generated function is unchanged.
inline Flow normalize_flow(const Flow& base, const Vein& v_norm) {
  auto core = std::make_shared<detail::MergeCore>();
  core->old_flow = base;
  core->old_vein = base.vein;
  core->old_tree = base.tree(kSemanticStage);

  // fold rank-0 fin nodes only; anything else is out of this translation's
  // scope and the caller gets told
  Vein::Node folded = base.vein.root();
  std::function<Vein::Node(const Vein::Node&)> fold = [&](const Vein::Node& n) {
    if (core->spliced(n)) return fold(n.kids[0]);
    Vein::Node out{n.rank, n.mark, {}};
    for (const auto& k : n.kids) out.kids.push_back(fold(k));
    return out;
  };
  core->new_vein = Vein(fold(folded));
  if (core->new_vein != v_norm)
    throw std::invalid_argument(
        "normalize_flow handles rank-0 finite-branch merges only; expected " +
        core->new_vein.print() + ", caller wants " + v_norm.print());
  if (core->new_vein == base.vein) return base;

  // widths for the surviving fin addresses come from the old child-0 spine
  BranchingFunction new_b;
  {
    const Vein::Node* cur = &base.vein.root();
    NodePath old_spine, new_addr;
    while (true) {
      if (cur->mark == Mark::Fin && !core->spliced(*cur)) {
        auto info = core->old_tree.info(old_spine);
        new_b.assign[new_addr] = info && info->width ? static_cast<Nat>(*info->width) : 1;
      }
      if (!core->spliced(*cur) && cur->mark != Mark::Leaf) new_addr = new_addr.child(0);
      if (cur->mark == Mark::Leaf) break;
      old_spine = old_spine.child(0);
      cur = &cur->kids[0];
    }
  }

  Flow f;
  f.name = base.name + "*";
  f.vein = core->new_vein;
  LabeledTree t = b_branching(core->new_vein, new_b);
  f.tree_at = [t](Stage) { return t; };

  f.p = MatrixPred("merge(" + base.p.name() + ")",
                   [core](const NodePath& node, Nat outcome, BitSpan x, BitSpan z) {
                     auto old = core->to_old(node, x);
                     return old && core->old_flow.p.eval(*old, outcome, x, z);
                   });
  f.q = MatrixPred("merge(" + base.q.name() + ")",
                   [core](const NodePath& node, Nat outcome, BitSpan x, BitSpan z) {
                     auto old = core->to_old(node, x);
                     // still-alive until the dispatch settles
                     return !old || core->old_flow.q.eval(*old, outcome, x, z);
                   });
  f.eta = ClopenFn(
      "merge(" + base.eta.name() + ")",
      [core](const NodePath& node, Nat outcome, Stage s) -> std::optional<Bits> {
        // a rank-0 dispatch below a fold needs the input to locate itself, so
        // fold targets with rank-0 questions below are resolved lazily via
        // the longest determined cylinder: unsupported combinations simply
        // never converge
        auto old = core->to_old(node, BitSpan());
        if (!old) return std::nullopt;
        return core->old_flow.eta.at(*old, outcome, s);
      },
      [core](const NodePath& node, Nat outcome) -> std::optional<Stage> {
        auto old = core->to_old(node, BitSpan());
        if (!old) return std::nullopt;
        return core->old_flow.eta.converges_at(*old, outcome);
      });

  f.leaf_fn = [core](const NodePath& node) -> const LeafFn* {
    std::lock_guard<std::mutex> lock(core->leaf_mutex);
    auto it = core->leaf_cache.find(node);
    if (it == core->leaf_cache.end()) {
      auto fn = std::make_unique<LeafFn>();
      fn->name = "merged";
      fn->transform = [core, node](const Bits& in, std::uint64_t budget) {
        auto old = core->to_old(node, in.span());
        if (!old) return Bits();
        const LeafFn* lf = core->old_flow.leaf_fn(*old);
        return lf ? lf->transform(in, budget) : Bits();
      };
      it = core->leaf_cache.emplace(node, std::move(fn)).first;
    }
    return it->second.get();
  };

  f.oracle = base.oracle;
  f.outcome_bound = base.outcome_bound;
  f.weakly_total = base.weakly_total;
  return f;
}

}  // namespace veinlab
