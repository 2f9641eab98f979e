#pragma once

#include <algorithm>
#include <map>
#include <tuple>
#include <memory>

#include "veinlab/approx.hpp"
#include "veinlab/totalize.hpp"

namespace veinlab {

struct Triple {
  std::size_t e = 0, i = 0, j = 0;

  std::uint64_t code() const { return triple_code(e, i, j); }
  friend bool operator==(const Triple& a, const Triple& b) {
    return a.e == b.e && a.i == b.i && a.j == b.j;
  }
  friend bool operator<(const Triple& a, const Triple& b) {
    return std::tie(a.e, a.i, a.j) < std::tie(b.e, b.i, b.j);
  }
  std::string str() const {
    return std::to_string(e) + "," + std::to_string(i) + "," + std::to_string(j);
  }
};

struct ConstructionConfig {
  BitTreePredicate S;
  ApproxMultifunction U;
  BitTreePredicate E = BitTreePredicate::full();
  FlowRegistry registry;
  Vein vein;
  std::vector<Triple> triples;
  StagePoint fiber = StagePoint::zeros();    // the designated z
  StagePoint oracle_d = StagePoint::zeros(); // the designated d
  Stage stages = 100;
  std::size_t depth = 64;             // exploration bound on comb strings
  std::size_t search_budget = 100000; // DFS node cap per stage per triple
  std::size_t rho_depth = 24;
};

struct TraceEvent {
  enum class Kind { Attention, Gamma, Freeze };
  Kind kind = Kind::Gamma;
  Stage stage = 0;
  Triple triple;
  Nat substage = 0;
  NodePath xi;
  NodePath lambda;
  Bits alpha;
  Bits sigma;           // for Gamma the new image, for Freeze the erased key
  std::size_t flen = 0; // |f_lambda(sigma)| at an attention receipt
};

/// A candidate found by the attention scan, ordered by (substage, length of
/// the monitored image, left-of on sigma, left-of on xi).
struct AttentionWitness {
  Nat substage = 0;
  std::size_t gamma_len = 0;
  Bits sigma;
  NodePath xi;
  Bits alpha;
  NodePath lambda;
  std::size_t flen = 0;

  bool beats(const AttentionWitness& o) const {
    if (substage != o.substage) return substage < o.substage;
    if (gamma_len != o.gamma_len) return gamma_len < o.gamma_len;
    if (sigma != o.sigma) {
      Bits a = sigma, b = o.sigma;  // same length: lexicographic = left-of
      return a < b;
    }
    if (xi != o.xi) return strictly_left_of(xi, o.xi);
    return false;
  }
};

namespace detail {

/// Per-triple engine: the weak-totalized flow, the patch representation of
/// gamma, the cached walking thread, and the opponent view.
class TripleEngine {
public:
  TripleEngine(const ConstructionConfig& cfg, Triple t, Bits rho)
      : cfg_(&cfg), triple_(t), rho_(std::move(rho)) {
    tot_ = std::make_unique<Flow>(
        weak_totalize(registry_flow(cfg.registry, cfg.vein, t.e, cfg.oracle_d)));
    patch_[Bits()] = rho_;
    last_change_[Bits()] = 0;
    thread_ = std::make_unique<TpThread>(*tot_);
    collect_prune_fns();
  }

  const Triple& triple() const { return triple_; }
  const Bits& rho() const { return rho_; }
  const Flow& tot_flow() const { return *tot_; }
  const std::map<Bits, Bits>& patches() const { return patch_; }
  const std::map<Bits, Stage>& last_change() const { return last_change_; }
  const std::map<NodePath, Nat>& attention_counts() const { return attention_counts_; }
  const std::map<std::pair<NodePath, NodePath>, std::size_t>& witness_maxima() const {
    return vmax_;
  }

  Bits gamma(const Bits& alpha) const {
    // straight-copy completion from the deepest patched prefix
    std::size_t best = 0;
    const Bits* img = &patch_.at(Bits());
    for (const auto& [key, value] : patch_) {
      if (key.size() >= best && is_prefix(key, alpha)) {
        best = key.size();
        img = &value;
      }
    }
    Bits out = *img;
    for (std::size_t i = best; i < alpha.size(); ++i) out.push_back(alpha.at(i));
    return out;
  }

  /// Maximal α ∈ S with γ(α) ⪯ σ, or nullopt when even the root image does
  /// not fit.
  std::optional<Bits> gamma_inverse(BitSpan sigma) const {
    const Bits& base = patch_.at(Bits());
    if (!is_prefix(base, sigma)) return std::nullopt;
    Bits alpha;
    while (true) {
      bool moved = false;
      for (int bit : {0, 1}) {
        Bits next = alpha.append(bit);
        if (!cfg_->S.member(next)) continue;
        Bits img = gamma(next);
        if (is_prefix(img, sigma)) {
          alpha = std::move(next);
          moved = true;
          break;
        }
      }
      if (!moved) return alpha;
    }
  }

  UIndexedView opponent_view(Stage s) {
    auto it = view_cache_.find(s);
    if (it == view_cache_.end()) {
      it = view_cache_
               .emplace(s, u_indexed_view(cfg_->registry, cfg_->U, triple_.i, triple_.j,
                                          cfg_->fiber, cfg_->oracle_d, s, cfg_->E))
               .first;
      if (view_cache_.size() > 4) view_cache_.erase(view_cache_.begin());
    }
    return it->second;
  }

  /// One stage of the strategy loop; true when someone received attention.
  bool run_stage(Stage s, std::vector<TraceEvent>& events) {
    std::size_t L = rho_.size() + s;
    if (L > cfg_->depth) return false;  // beyond the exploration bound
    const Bits& base = patch_.at(Bits());
    if (base.size() > L) return false;  // the frontier has outrun the window

    UIndexedView view = opponent_view(s);
    auto best = search_witness(L, view);
    if (!best) return false;

    receive_attention(s, *best, events);
    return true;
  }

  /// The attention test at a fixed substage, exposed for the diagnostics:
  /// the winning witness of strategy xi with priority value t, if any.
  std::optional<AttentionWitness> requires_attention(const NodePath& xi, Nat t, Stage s) {
    std::size_t L = rho_.size() + s;
    if (L > cfg_->depth || patch_.at(Bits()).size() > L) return std::nullopt;
    UIndexedView view = opponent_view(s);
    return search_witness(L, view, &xi, &t);
  }

private:
  const ConstructionConfig* cfg_;
  Triple triple_;
  Bits rho_;
  std::unique_ptr<Flow> tot_;
  std::map<Bits, Bits> patch_;
  std::map<Bits, Stage> last_change_;
  std::map<NodePath, Nat> attention_counts_;
  std::map<std::pair<NodePath, NodePath>, std::size_t> vmax_;
  std::unique_ptr<TpThread> thread_;  // positioned somewhere above patch_[ε]
  std::vector<const LeafFn*> prune_fns_;
  std::map<Stage, UIndexedView> view_cache_;

  void collect_prune_fns() {
    LabeledTree t = tot_->tree(kSemanticStage);
    FiniteTree explored = t.explore(8, 6);
    for (const auto& n : explored.nodes()) {
      auto info = t.at(n);
      if (!info.genuine_leaf) continue;
      const LeafFn* fn = tot_->leaf_fn(n);
      if (fn && !fn->nowhere_defined &&
          std::find(prune_fns_.begin(), prune_fns_.end(), fn) == prune_fns_.end())
        prune_fns_.push_back(fn);
    }
  }

  /// Ensure the walking thread sits exactly on `target`.
  void position_thread(const Bits& target) {
    // pop to the common prefix, then push the rest
    while (thread_->sigma().size() > 0 && !is_prefix(thread_->sigma(), target))
      thread_->pop_bit();
    while (thread_->sigma().size() > target.size()) thread_->pop_bit();
    for (std::size_t i = thread_->sigma().size(); i < target.size(); ++i)
      thread_->push_bit(target.at(i));
  }

  // A subtree is dead once every leaf machine's output has either outgrown
  // the agreement window or visibly left the opponent tree; outputs only
  // grow, so pruning here is sound.
  bool dead_by_pruning(const Bits& v, const UIndexedView& view) const {
    if (prune_fns_.empty()) return false;
    for (const LeafFn* fn : prune_fns_) {
      Bits out = fn->transform(v, v.size());
      if (out.size() >= view.agreement) continue;
      if (view.contains(out.span())) return false;
    }
    return true;
  }

  /// Leftmost-first depth-first scan over the length-L window of the comb,
  /// collecting attention witnesses.  `only_xi`/`only_t` filter for the
  /// diagnostic entry point.
  std::optional<AttentionWitness> search_witness(std::size_t L, const UIndexedView& view,
                                                 const NodePath* only_xi = nullptr,
                                                 const Nat* only_t = nullptr) {
    const Bits& base = patch_.at(Bits());
    position_thread(base);
    std::optional<AttentionWitness> best;
    std::size_t budget = cfg_->search_budget;

    // iterative DFS with explicit bit stack; 0 first so sigma runs left to
    // right
    std::vector<int> pending{-1};  // -1 marks "expand current node"
    while (!pending.empty() && budget > 0) {
      int action = pending.back();
      pending.pop_back();
      if (action == 2) {  // backtrack marker
        thread_->pop_bit();
        continue;
      }
      if (action != -1) {
        thread_->push_bit(action);
        pending.push_back(2);
      }
      --budget;
      const Bits& v = thread_->sigma();
      if (v.size() == L) {
        evaluate_witnesses(view, best, only_xi, only_t);
        if (best && best->substage == 0 && !only_xi) return best;  // optimal already
        continue;
      }
      if (v.size() > base.size() && dead_by_pruning(v, view)) continue;
      pending.push_back(1);
      pending.push_back(0);
    }
    return best;
  }

  /// At a full-length window string: find every almost-terminal strategy on
  /// the current path that monitors someone, and test the attention clause.
  void evaluate_witnesses(const UIndexedView& view, std::optional<AttentionWitness>& best,
                          const NodePath* only_xi, const Nat* only_t) {
    const Bits& sigma = thread_->sigma();
    auto alpha0 = gamma_inverse(sigma.span());
    if (!alpha0) return;
    const NodePath& tp = thread_->current();
    LabeledTree tree = tot_->tree(sigma.size());

    for (std::size_t n = 0; n <= tp.size(); ++n) {
      NodePath xi = tp.take(n);
      auto info = tree.info(xi);
      if (!info) continue;
      std::vector<NodePath> lambdas;
      if (info->genuine_leaf) {
        // leaf under an infinitely branching parent is its own strategy
        if (xi.empty()) {
          lambdas.push_back(xi);
        } else {
          auto parent = tree.info(xi.parent());
          if (parent && parent->infinite()) lambdas.push_back(xi);
        }
        if (lambdas.empty()) continue;
      } else if (!info->infinite() && *info->width > 0) {
        // finitely branching with a leaf child: the strategy of its leaves
        bool has_leaf_child = false;
        for (std::uint64_t k = 0; k < *info->width; ++k) {
          auto child = tree.info(xi.child(static_cast<Nat>(k)));
          if (child && child->genuine_leaf) {
            has_leaf_child = true;
            lambdas.push_back(xi.child(static_cast<Nat>(k)));
          }
        }
        if (!has_leaf_child) continue;
      } else {
        continue;
      }
      if (only_xi && xi != *only_xi) continue;

      Nat t = thread_->prior(xi);
      if (only_t && t != *only_t) continue;
      if (t > alpha0->size()) continue;  // not active along sigma
      Bits alpha = alpha0->take(t);
      Bits galpha = gamma(alpha);

      for (const auto& lambda : lambdas) {
        const LeafFn* fn = tot_->leaf_fn(lambda);
        if (!fn || fn->nowhere_defined) continue;
        Bits out_sigma = fn->transform(sigma, sigma.size());
        if (!view.contains(out_sigma.span())) continue;
        Bits out_gamma = fn->transform(galpha, galpha.size());
        if (!is_proper_prefix(out_gamma, out_sigma)) continue;

        AttentionWitness w;
        w.substage = t;
        w.gamma_len = galpha.size();
        w.sigma = sigma;
        w.xi = xi;
        w.alpha = alpha;
        w.lambda = lambda;
        w.flen = out_sigma.size();
        if (!best || w.beats(*best)) best = w;
      }
    }
  }

  void receive_attention(Stage s, const AttentionWitness& w, std::vector<TraceEvent>& events) {
    // injuries: straight copies override every patch strictly below
    for (auto it = patch_.begin(); it != patch_.end();) {
      if (it->first != w.alpha && is_prefix(w.alpha, it->first)) {
        TraceEvent ev;
        ev.kind = TraceEvent::Kind::Freeze;
        ev.stage = s;
        ev.triple = triple_;
        ev.alpha = it->first;
        ev.sigma = it->second;
        events.push_back(ev);
        last_change_.erase(it->first);
        it = patch_.erase(it);
      } else {
        ++it;
      }
    }
    patch_[w.alpha] = w.sigma;
    last_change_[w.alpha] = s + 1;
    attention_counts_[w.xi] += 1;
    auto key = std::make_pair(w.xi, w.lambda);
    vmax_[key] = std::max(vmax_[key], w.flen);

    TraceEvent at;
    at.kind = TraceEvent::Kind::Attention;
    at.stage = s;
    at.triple = triple_;
    at.substage = w.substage;
    at.xi = w.xi;
    at.lambda = w.lambda;
    at.alpha = w.alpha;
    at.sigma = w.sigma;
    at.flen = w.flen;
    events.push_back(at);

    TraceEvent g;
    g.kind = TraceEvent::Kind::Gamma;
    g.stage = s;
    g.triple = triple_;
    g.alpha = w.alpha;
    g.sigma = w.sigma;
    events.push_back(g);
  }
};

}  // namespace detail

/// The full construction state: per-triple gamma maps, ledgers, and the walk
/// caches.  Advance with `construction_stage`.
class ConstructionState {
public:
  explicit ConstructionState(ConstructionConfig cfg) : cfg_(std::make_unique<ConstructionConfig>(std::move(cfg))) {
    std::size_t want = 0;
    for (const auto& t : cfg_->triples) want = std::max<std::size_t>(want, t.code() + 1);
    RhoEnumeration rho = rho_enumeration(cfg_->S, want, cfg_->rho_depth);
    if (rho.shortfall)
      throw std::invalid_argument("source tree has too few minimal non-members for the triples");
    for (const auto& t : cfg_->triples)
      engines_.push_back(std::make_unique<detail::TripleEngine>(*cfg_, t, rho.rho[t.code()]));
    rho_ = std::move(rho.rho);
  }

  const ConstructionConfig& config() const { return *cfg_; }
  Stage stage() const { return stage_; }
  const std::vector<TraceEvent>& events() const { return events_; }
  const std::vector<Bits>& rho_list() const { return rho_; }

  std::size_t triple_count() const { return engines_.size(); }
  detail::TripleEngine& engine(std::size_t k) { return *engines_[k]; }
  const detail::TripleEngine& engine(std::size_t k) const { return *engines_[k]; }

  const detail::TripleEngine& engine_for(const Triple& t) const {
    for (const auto& e : engines_)
      if (e->triple() == t) return *e;
    throw std::out_of_range("triple " + t.str() + " not part of the construction");
  }

  void advance_stage() {
    for (auto& e : engines_) e->run_stage(stage_, events_);
    ++stage_;
  }

  /// T_s membership up to the exploration depth: the source tree plus
  /// everything compatible with a current gamma image.
  bool in_T(BitSpan tau) const {
    if (cfg_->S.member(tau)) return true;
    for (const auto& e : engines_) {
      const Bits& base = e->patches().at(Bits());
      if (is_prefix(base, tau)) return true;
      bool prefix_of_base = tau.size() <= base.size();
      for (std::size_t i = 0; prefix_of_base && i < tau.size(); ++i)
        prefix_of_base = tau.at(i) == base.at(i);
      if (prefix_of_base) return true;
    }
    return false;
  }
  bool in_T(const Bits& tau) const { return in_T(tau.span()); }

  BitsTree build_T(std::size_t depth) const {
    if (depth > 22) throw std::invalid_argument("build_T materialization capped at depth 22");
    BitsTree out;
    std::vector<Bits> frontier;
    if (in_T(Bits())) {
      out.insert_with_prefixes(Bits());
      frontier.push_back(Bits());
    }
    for (std::size_t d = 0; d < depth; ++d) {
      std::vector<Bits> next;
      for (const auto& b : frontier)
        for (int bit : {0, 1}) {
          Bits c = b.append(bit);
          if (in_T(c)) {
            out.insert_with_prefixes(c);
            next.push_back(c);
          }
        }
      frontier = std::move(next);
    }
    return out;
  }

private:
  std::unique_ptr<ConstructionConfig> cfg_;
  std::vector<std::unique_ptr<detail::TripleEngine>> engines_;
  std::vector<Bits> rho_;
  std::vector<TraceEvent> events_;
  Stage stage_ = 0;
};

inline void construction_stage(ConstructionState& state) { state.advance_stage(); }

inline BitsTree build_T(const ConstructionState& state, std::size_t depth) {
  return state.build_T(depth);
}

/// Everything a finished run leaves behind: inputs, the event log, final
/// gamma maps, and stabilization data.  This is what the verifier reads.
struct ConstructionTrace {
  std::shared_ptr<ConstructionState> state;  // final state (engines intact)
  Stage stages = 0;

  const ConstructionConfig& config() const { return state->config(); }

  /// gamma_s for a triple, replayed from the event log.
  std::map<Bits, Bits> gamma_at(const Triple& t, Stage s) const {
    std::map<Bits, Bits> patch{{Bits(), state->engine_for(t).rho()}};
    for (const auto& ev : state->events()) {
      if (ev.stage >= s) break;
      if (!(ev.triple == t)) continue;
      if (ev.kind == TraceEvent::Kind::Freeze) {
        patch.erase(ev.alpha);
      } else if (ev.kind == TraceEvent::Kind::Gamma) {
        patch[ev.alpha] = ev.sigma;
      }
    }
    return patch;
  }

  static Bits complete(const std::map<Bits, Bits>& patch, const Bits& alpha) {
    std::size_t best = 0;
    const Bits* img = &patch.at(Bits());
    for (const auto& [key, value] : patch) {
      if (key.size() >= best && is_prefix(key, alpha)) {
        best = key.size();
        img = &value;
      }
    }
    Bits out = *img;
    for (std::size_t i = best; i < alpha.size(); ++i) out.push_back(alpha.at(i));
    return out;
  }

  Bits gamma_image(const Triple& t, const Bits& alpha, Stage s) const {
    auto patch = gamma_at(t, s);
    return complete(patch, alpha);
  }

  /// The limit point gamma(x) as a stage point (final patches frozen).
  StagePoint gamma_point(const Triple& t, const StagePoint& x) const {
    const auto& eng = state->engine_for(t);
    auto patch = std::make_shared<std::map<Bits, Bits>>(eng.patches());
    auto xp = std::make_shared<StagePoint>(x);
    return StagePoint::from_bit_fn([patch, xp](std::uint64_t n) -> int {
      std::size_t len = 0;
      Bits alpha;
      while (true) {
        Bits img = complete(*patch, alpha);
        if (img.size() > n) return img.at(n);
        alpha.push_back(xp->bit_at(len));
        ++len;
      }
    });
  }

  Stage last_change(const Triple& t, const Bits& alpha) const {
    const auto& lc = state->engine_for(t).last_change();
    Stage latest = 0;
    for (const auto& [key, st] : lc)
      if (is_prefix(key, alpha)) latest = std::max(latest, st);
    return latest;
  }
};

inline ConstructionTrace run_construction(ConstructionConfig cfg) {
  ConstructionTrace trace;
  trace.stages = cfg.stages;
  trace.state = std::make_shared<ConstructionState>(std::move(cfg));
  for (Stage s = 0; s < trace.stages; ++s) trace.state->advance_stage();
  return trace;
}

enum class RequirementVerdict { Escaped, StillInside, Inconclusive };

inline const char* verdict_name(RequirementVerdict v) {
  switch (v) {
    case RequirementVerdict::Escaped: return "escaped";
    case RequirementVerdict::StillInside: return "still-inside";
    case RequirementVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

/// Does the e-th totalized flow, run on the stabilized gamma image of x,
/// leave the opponent tree within the budget?
inline RequirementVerdict check_requirement_N(const ConstructionTrace& trace,
                                              const Triple& t, const StagePoint& x,
                                              std::size_t precision, Stage budget) {
  if (budget == 0) return RequirementVerdict::Inconclusive;
  const auto& eng = trace.state->engine_for(t);
  // stability gate: the image prefix feeding the check must not have moved
  // in the closing half of the run
  Bits alpha = x.prefix(precision);
  if (!trace.config().S.member(alpha)) return RequirementVerdict::Inconclusive;
  if (trace.last_change(t, alpha) > trace.stages / 2)
    return RequirementVerdict::Inconclusive;

  StagePoint y = trace.gamma_point(t, x);
  auto view = const_cast<detail::TripleEngine&>(eng).opponent_view(trace.stages);
  auto result = eval_flow(eng.tot_flow(), y, precision, budget);
  if (result.status == EvalStatus::BudgetExhausted)
    return RequirementVerdict::Inconclusive;
  if (result.status == EvalStatus::UndefinedInterior || result.nowhere_defined_leaf)
    return RequirementVerdict::Escaped;  // no output at all can sit inside the fiber
  const Bits& out = result.output;
  for (std::size_t k = 0; k <= out.size(); ++k) {
    if (!view.contains(out.take(k).span())) return RequirementVerdict::Escaped;
  }
  if (out.size() < precision) return RequirementVerdict::Inconclusive;
  return RequirementVerdict::StillInside;
}

}  // namespace veinlab
