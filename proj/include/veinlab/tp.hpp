#pragma once

#include <map>
#include <optional>
#include <vector>

#include "veinlab/flow.hpp"

namespace veinlab {

/// Stage used when a question is asked "in the limit": every registry gate
/// that converges at all has converged by then.
constexpr Stage kSemanticStage = 1u << 30;

/// The walking state of the staged true-path computation along a growing
/// input prefix.  Value type with explicit push/pop so that searches can
/// branch without copying; copying still works and gives an independent
/// thread.
class TpThread {
public:
  explicit TpThread(const Flow& flow) : flow_(&flow) {
    oracle_prefix_ = Bits();
    step_to(Bits());
  }

  const Flow& flow() const { return *flow_; }
  const Bits& sigma() const { return sigma_; }
  Stage stage() const { return sigma_.size(); }
  const NodePath& current() const { return tp_history_.back(); }
  const std::vector<NodePath>& history() const { return tp_history_; }
  bool hit_outcome_bound() const { return bound_hits_ > 0; }

  Stage timer(const NodePath& node) const {
    auto it = node_.find(node);
    return it == node_.end() ? 0 : it->second.timer;
  }

  bool eligible(const NodePath& node) const { return is_prefix(node, current()); }

  /// Cumulative count of eligibility events strictly to the left of `node`,
  /// over all stages so far.
  Nat prior(const NodePath& node) {
    auto it = prior_.find(node);
    if (it != prior_.end()) return it->second;
    Nat total = 0;
    for (const auto& tp : tp_history_) total += left_eligible_count(node, tp);
    prior_[node] = total;
    return total;
  }

  void push_bit(int bit) {
    sigma_.push_back(bit);
    oracle_prefix_.push_back(flow_->oracle.bit_at(oracle_prefix_.size()));
    step_to(sigma_);
  }

  void pop_bit() {
    if (undo_.empty()) throw std::logic_error("nothing to pop");
    Undo u = std::move(undo_.back());
    undo_.pop_back();
    for (const auto& n : u.timer_bumped) node_[n].timer -= 1;
    for (const auto& [node, outcome, prev] : u.r1_restore)
      node_[node].r1_alive_upto[outcome] = prev;
    for (const auto& [node, prev] : u.prior_restore) prior_[node] = prev;
    bound_hits_ -= u.bound_hits;
    tp_history_.pop_back();
    sigma_.pop_back();
    oracle_prefix_.pop_back();
  }

  /// Current timers of every node touched so far (for traces).
  std::map<NodePath, Stage> timers() const {
    std::map<NodePath, Stage> out;
    for (const auto& [n, st] : node_)
      if (st.timer > 0) out[n] = st.timer;
    return out;
  }

private:
  struct NodeState {
    Stage timer = 0;
    // per outcome: number of prefix lengths j for which the rank-1 matrix is
    // verified true; kDead marks a refuted outcome (permanent on this chain)
    std::vector<Stage> r1_alive_upto;
  };
  static constexpr Stage kDead = ~Stage(0);

  struct Undo {
    std::vector<NodePath> timer_bumped;
    std::vector<std::tuple<NodePath, Nat, Stage>> r1_restore;
    std::vector<std::pair<NodePath, Nat>> prior_restore;
    int bound_hits = 0;
  };

  const Flow* flow_;
  Bits sigma_;
  Bits oracle_prefix_;
  std::map<NodePath, NodeState> node_;
  std::map<NodePath, Nat> prior_;
  std::vector<NodePath> tp_history_;
  std::vector<Undo> undo_;
  int bound_hits_ = 0;

  static Nat left_eligible_count(const NodePath& node, const NodePath& tp) {
    Nat c = 0;
    for (std::size_t n = 0; n <= tp.size(); ++n)
      if (strictly_left_of(tp.take(n), node)) ++c;
    return c;
  }

  bool rank1_alive(const NodePath& node, Nat outcome, Stage s, Undo* undo) {
    NodeState& st = node_[node];
    if (st.r1_alive_upto.size() <= outcome) st.r1_alive_upto.resize(outcome + 1, 0);
    Stage& upto = st.r1_alive_upto[outcome];
    if (upto == kDead) return false;
    Stage prev = upto;
    while (upto < s) {
      if (!flow_->q.eval(node, outcome, sigma_.span(upto), oracle_prefix_.span(upto))) {
        if (undo) undo->r1_restore.emplace_back(node, outcome, prev);
        upto = kDead;
        return false;
      }
      ++upto;
    }
    if (undo && upto != prev) undo->r1_restore.emplace_back(node, outcome, prev);
    return true;
  }

  void step_to(const Bits& sigma) {
    Undo undo;
    Stage s = sigma.size();
    LabeledTree tree = flow_->tree(s);
    NodePath path;
    while (true) {
      auto info = tree.info(path);
      if (!info) {
        // the surrounding tree lost this node; treat as a waiting halt
        break;
      }
      if (info->genuine_leaf || info->waiting()) break;
      std::uint64_t limit =
          info->infinite() ? flow_->outcome_bound : *info->width;
      std::optional<Nat> outcome;
      switch (info->rank) {
        case 2: {
          Stage t = node_[path].timer;
          for (std::uint64_t i = 0; i < limit; ++i) {
            if (!info->infinite() && !tree.contains(path.child(static_cast<Nat>(i))))
              continue;
            if (flow_->p.eval(path, static_cast<Nat>(i), sigma_.span(t),
                              oracle_prefix_.span(t))) {
              outcome = static_cast<Nat>(i);
              break;
            }
          }
          if (!outcome && info->infinite()) ++undo.bound_hits;
          break;
        }
        case 1: {
          for (std::uint64_t i = 0; i < limit; ++i) {
            if (!info->infinite() && !tree.contains(path.child(static_cast<Nat>(i))))
              continue;
            if (rank1_alive(path, static_cast<Nat>(i), s, &undo)) {
              outcome = static_cast<Nat>(i);
              break;
            }
          }
          if (!outcome && info->infinite()) ++undo.bound_hits;
          break;
        }
        case 0: {
          std::uint64_t r0_limit =
              info->infinite() ? s + 1 : std::min<std::uint64_t>(s + 1, *info->width);
          for (std::uint64_t i = 0; i < r0_limit; ++i) {
            auto label = flow_->eta.at(path, static_cast<Nat>(i), s);
            if (label && is_prefix(*label, sigma) &&
                tree.contains(path.child(static_cast<Nat>(i)))) {
              outcome = static_cast<Nat>(i);
              break;
            }
          }
          break;
        }
        default:
          throw std::logic_error("rank out of range in tree");
      }
      if (!outcome) break;
      path = path.child(*outcome);
    }

    // timers advance for every node eligible along a nonempty prefix
    if (!sigma.empty()) {
      for (std::size_t n = 0; n <= path.size(); ++n) {
        NodePath xi = path.take(n);
        node_[xi].timer += 1;
        undo.timer_bumped.push_back(xi);
      }
    }
    for (auto& [node, value] : prior_) {
      Nat add = left_eligible_count(node, path);
      if (add) {
        undo.prior_restore.emplace_back(node, value);
        value += add;
      }
    }
    bound_hits_ += undo.bound_hits;
    tp_history_.push_back(path);
    undo_.push_back(std::move(undo));
  }
};

/// Snapshot view of a thread, matching the state the staged algorithm
/// carries: timers, priority values, and the current path.
struct TpState {
  Bits sigma;
  NodePath current;
  std::map<NodePath, Stage> timers;
  std::map<NodePath, Nat> priors;
};

inline TpState tp_snapshot(TpThread& t) {
  TpState out{t.sigma(), t.current(), t.timers(), {}};
  for (const auto& [node, value] : out.timers) out.priors[node] = t.prior(node);
  return out;
}

/// One stage of the staged true-path computation: sigma must extend the
/// state's string by exactly one bit.
inline TpState tp_step(const Flow& flow, const TpState& state, const Bits& sigma) {
  if (sigma.size() != state.sigma.size() + 1 || !is_prefix(state.sigma, sigma))
    throw std::invalid_argument("tp_step needs a one-bit extension of the previous prefix");
  TpThread t(flow);
  for (std::size_t i = 0; i < sigma.size(); ++i) t.push_bit(sigma.at(i));
  return tp_snapshot(t);
}

enum class TruePathStatus { Certified, Unstable, BudgetExhausted };

struct TruePathResult {
  NodePath path;
  Stage stabilized_at = 0;  // least stage >= 1 with nothing strictly left afterwards
  TruePathStatus status = TruePathStatus::Unstable;
  bool leaf = false;

  bool certified() const { return status == TruePathStatus::Certified; }
};

/// Liminf recovery of the true path within a stage budget: the reported path
/// is the left-of-least path that recurs after the last occurrence of
/// anything strictly to its left.  `stabilized_at` is the certificate stage.
inline TruePathResult true_path(const Flow& flow, const StagePoint& x, Stage stages) {
  if (stages < 1) throw std::invalid_argument("true_path needs stages >= 1");
  TpThread t(flow);
  for (Stage s = 0; s < stages; ++s) t.push_bit(x.bit_at(s));
  const auto& hist = t.history();  // tp at stages 0..stages

  TruePathResult res;
  if (t.hit_outcome_bound()) {
    res.status = TruePathStatus::BudgetExhausted;
    return res;
  }

  // Values recurring in the recent half of the window are the candidates;
  // halting states that are proper prefixes of other recent values are
  // way-stations, not liminf values.
  std::map<NodePath, std::vector<Stage>> occ;
  for (Stage s = 0; s < hist.size(); ++s) occ[hist[s]].push_back(s);
  Stage tail_from = (stages + 1) / 2;

  std::vector<NodePath> recent;
  for (Stage s = tail_from; s < hist.size(); ++s)
    if (std::find(recent.begin(), recent.end(), hist[s]) == recent.end())
      recent.push_back(hist[s]);
  std::vector<NodePath> maximal;
  for (const auto& c : recent) {
    bool shadowed = false;
    for (const auto& d : recent)
      if (c != d && is_proper_prefix(c, d)) shadowed = true;
    if (!shadowed) maximal.push_back(c);
  }
  NodePath best = maximal.front();
  for (const auto& c : maximal)
    if (strictly_left_of(c, best)) best = c;

  // certificate: last stage anywhere in the window with a value strictly to
  // the left of the winner; the winner must recur after it
  Stage first_clear = 0;
  for (const auto& [other, other_at] : occ)
    if (other != best && strictly_left_of(other, best))
      first_clear = std::max(first_clear, other_at.back() + 1);
  std::size_t recurrences = 0;
  for (Stage s : occ[best])
    if (s >= first_clear) ++recurrences;
  if (recurrences < 2) {
    res.status = TruePathStatus::Unstable;
    return res;
  }

  res.path = best;
  res.stabilized_at = std::max<Stage>(1, first_clear);
  res.status = TruePathStatus::Certified;
  auto info = flow.tree(stages).info(best);
  res.leaf = info && info->genuine_leaf;
  return res;
}

enum class EvalStatus { Complete, Shortfall, UndefinedInterior, BudgetExhausted };

struct EvalResult {
  Bits output;
  EvalStatus status = EvalStatus::BudgetExhausted;
  bool nowhere_defined_leaf = false;
  TruePathResult tp;
};

/// f_Λ(x) to `out_bits` bits: find the true path, then drive its leaf
/// function on growing prefixes of x.
inline EvalResult eval_flow(const Flow& flow, const StagePoint& x, std::size_t out_bits,
                            Stage stages) {
  EvalResult res;
  res.tp = true_path(flow, x, stages);
  if (!res.tp.certified()) {
    res.status = EvalStatus::BudgetExhausted;
    return res;
  }
  if (!res.tp.leaf) {
    res.status = EvalStatus::UndefinedInterior;
    return res;
  }
  const LeafFn* fn = flow.leaf_fn(res.tp.path);
  if (!fn) {
    res.status = EvalStatus::UndefinedInterior;
    return res;
  }
  if (fn->nowhere_defined) {
    res.nowhere_defined_leaf = true;
    res.status = EvalStatus::Shortfall;
    return res;
  }
  Bits out;
  Bits fed;
  for (Stage m = 1; m <= stages; ++m) {
    fed.push_back(x.bit_at(m - 1));
    out = fn->transform(fed, m);
    if (out.size() >= out_bits) {
      res.output = out.take(out_bits);
      res.status = EvalStatus::Complete;
      return res;
    }
  }
  res.output = out;
  res.status = EvalStatus::Shortfall;
  return res;
}

/// Priority value of ξ along σ: how often strategies strictly to its left
/// were eligible, summed over all stages up to |σ|.
inline Nat priority_value(const Flow& flow, const NodePath& xi, const Bits& sigma) {
  TpThread t(flow);
  for (std::size_t i = 0; i < sigma.size(); ++i) t.push_bit(sigma.at(i));
  return t.prior(xi);
}

/// Stage of the n-th eligibility of ξ along x (stages counted from 1), or
/// nullopt when the budget runs out first.  n = 0 answers 0 by convention.
inline std::optional<Stage> settle_tilde(const Flow& flow, const NodePath& xi,
                                         const StagePoint& x, Nat n, Stage budget) {
  if (n == 0) return 0;
  TpThread t(flow);
  Nat seen = 0;
  for (Stage s = 1; s <= budget; ++s) {
    t.push_bit(x.bit_at(s - 1));
    if (t.eligible(xi)) {
      ++seen;
      if (seen == n) return s;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Exact semantics on eventually periodic points (test oracles and the direct
// decision procedure).

/// Least outcome at a non-terminal node that semantically contains x, or
/// nullopt when none exists below the search bound.  Throws when a question
/// lacks an exact decider.
inline std::optional<Nat> semantic_outcome(const Flow& flow, const LabeledTree& tree,
                                           const NodePath& node, const StagePoint& x) {
  auto info = tree.at(node);
  std::uint64_t limit = info.infinite() ? flow.outcome_bound : *info.width;
  for (std::uint64_t i = 0; i < limit; ++i) {
    Nat n = static_cast<Nat>(i);
    if (!info.infinite() && !tree.contains(node.child(n))) continue;
    std::optional<bool> in;
    switch (info.rank) {
      case 2:
        in = flow.p.decide_pi2(node, n, x, flow.oracle);
        break;
      case 1:
        in = flow.q.decide_pi1(node, n, x, flow.oracle);
        break;
      case 0: {
        auto conv = flow.eta.converges_at(node, n);
        if (!conv) {
          in = false;
        } else {
          auto label = flow.eta.at(node, n, *conv);
          in = label && *label == x.prefix(label->size());
        }
        break;
      }
    }
    if (!in) throw std::runtime_error("no exact decider for question at " + node.str());
    if (*in) return n;
  }
  return std::nullopt;
}

struct SemanticPathResult {
  NodePath path;
  bool leaf = false;
};

/// The direct decision procedure: greedy least-outcome descent with exact
/// membership tests, halting where the staged computation would halt in the
/// limit.
inline SemanticPathResult semantic_true_path(const Flow& flow, const StagePoint& x) {
  LabeledTree tree = flow.tree(kSemanticStage);
  NodePath path;
  while (true) {
    auto info = tree.info(path);
    if (!info) return {path, false};
    if (info->genuine_leaf) return {path, true};
    if (info->waiting()) return {path, false};
    auto n = semantic_outcome(flow, tree, path, x);
    if (!n) return {path, false};
    path = path.child(*n);
  }
}

/// Exhaustive oracle for small finite trees: the leftmost leaf whose whole
/// path of memberships holds of x.
inline std::optional<NodePath> exhaustive_true_path(const Flow& flow, const StagePoint& x) {
  LabeledTree tree = flow.tree(kSemanticStage);
  std::optional<NodePath> best;
  struct Frame {
    NodePath node;
    bool ok;  // all edges to this node hold of x
  };
  std::vector<Frame> frames{{NodePath(), true}};
  while (!frames.empty()) {
    Frame f = frames.back();
    frames.pop_back();
    auto info = tree.info(f.node);
    if (!info) continue;
    if (info->genuine_leaf) {
      if (f.ok && (!best || strictly_left_of(f.node, *best))) best = f.node;
      continue;
    }
    if (info->infinite())
      throw std::invalid_argument("exhaustive oracle needs a finite tree");
    for (std::uint64_t i = 0; i < *info->width; ++i) {
      Nat n = static_cast<Nat>(i);
      if (!tree.contains(f.node.child(n))) continue;
      bool edge = false;
      switch (info->rank) {
        case 2: {
          auto d = flow.p.decide_pi2(f.node, n, x, flow.oracle);
          if (!d) throw std::runtime_error("no exact decider");
          edge = *d;
          break;
        }
        case 1: {
          auto d = flow.q.decide_pi1(f.node, n, x, flow.oracle);
          if (!d) throw std::runtime_error("no exact decider");
          edge = *d;
          break;
        }
        case 0: {
          auto conv = flow.eta.converges_at(f.node, n);
          edge = false;
          if (conv) {
            auto label = flow.eta.at(f.node, n, *conv);
            edge = label && *label == x.prefix(label->size());
          }
          break;
        }
      }
      frames.push_back({f.node.child(n), f.ok && edge});
    }
  }
  return best;
}

}  // namespace veinlab
