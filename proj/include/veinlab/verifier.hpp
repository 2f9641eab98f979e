#pragma once

#include <mutex>

#include "veinlab/construction.hpp"

namespace veinlab {

struct VerifierOptions {
  std::uint64_t outcome_bound = 20000;  // the (s,n)-codes can grow quadratically
  Stage decoder_budget = 1 << 14;       // cap on the decoder's internal waits
};

namespace detail {

/// Everything the verifier flowchart closes over: the finished construction,
/// per-triple coordinate maps between the plain branching and the
/// weak-totalized priority tree, and cached walking threads.
struct VerifierCore {
  ConstructionTrace trace;
  VerifierOptions opt;
  bool inf_root = false;
  int root_rank = 0;

  struct TripleData {
    Triple t;
    Bits rho;
    Flow base;             // the e-th plain partial flow
    LabeledTree base_tree; // its limit tree
    const Flow* tot;       // the engine's weak-totalization
    // shared walking thread along the verifier input, for priors/settling
    std::unique_ptr<TpThread> thread;
    std::unique_ptr<std::mutex> lock;
  };
  std::vector<TripleData> triples;
  mutable std::map<NodePath, std::unique_ptr<LeafFn>> leaf_cache;
  mutable std::mutex leaf_cache_mutex;

  const TripleData* by_code(std::uint64_t code) const {
    for (const auto& td : triples)
      if (td.t.code() == code) return &td;
    return nullptr;
  }

  // --- almost-terminal combinatorics on the plain tree ---------------------

  bool at_node(const TripleData& td, const NodePath& ve) const {
    auto info = td.base_tree.info(ve);
    if (!info) return false;
    if (info->genuine_leaf) {
      if (ve.empty()) return true;
      auto parent = td.base_tree.info(ve.parent());
      return parent && parent->infinite();
    }
    if (info->infinite() || *info->width == 0) return false;
    for (std::uint64_t k = 0; k < *info->width; ++k) {
      auto child = td.base_tree.info(ve.child(static_cast<Nat>(k)));
      if (child && child->genuine_leaf) return true;
    }
    return false;
  }

  mutable std::map<std::pair<std::uint64_t, NodePath>, bool> at_below_memo;
  mutable std::mutex at_below_mutex;

  /// Does the subtree below `ve` (inclusive) ever reach an almost-terminal
  /// node?  Bounded exploration: the scenario flows keep their strategies
  /// shallow.
  bool subtree_has_at(const TripleData& td, const NodePath& ve, std::size_t depth = 8,
                      std::uint64_t cap = 8) const {
    auto key = std::make_pair(td.t.code(), ve);
    {
      std::lock_guard<std::mutex> hold(at_below_mutex);
      auto it = at_below_memo.find(key);
      if (it != at_below_memo.end()) return it->second;
    }
    bool found = false;
    std::vector<NodePath> frontier{ve};
    for (std::size_t d = 0; d <= depth && !found && !frontier.empty(); ++d) {
      std::vector<NodePath> next;
      for (const auto& n : frontier) {
        if (at_node(td, n)) {
          found = true;
          break;
        }
        auto info = td.base_tree.info(n);
        if (!info || info->genuine_leaf) continue;
        for (std::uint64_t k = 0; k < info->bounded_width(cap); ++k)
          if (td.base_tree.contains(n.child(static_cast<Nat>(k))))
            next.push_back(n.child(static_cast<Nat>(k)));
      }
      frontier = std::move(next);
    }
    std::lock_guard<std::mutex> hold(at_below_mutex);
    at_below_memo[key] = found;
    return found;
  }

  /// Leaves of the plain tree extending an almost-terminal node.
  std::vector<NodePath> leaves_below(const TripleData& td, const NodePath& ve) const {
    std::vector<NodePath> out;
    auto info = td.base_tree.info(ve);
    if (!info) return out;
    if (info->genuine_leaf) {
      out.push_back(ve);
      return out;
    }
    if (!info->infinite())
      for (std::uint64_t k = 0; k < *info->width; ++k) {
        auto child = td.base_tree.info(ve.child(static_cast<Nat>(k)));
        if (child && child->genuine_leaf) out.push_back(ve.child(static_cast<Nat>(k)));
      }
    return out;
  }

  /// Plain coordinates to priority-tree coordinates: doubled nodes shift
  /// their children to the odd slots, an infinitely branching root gets the
  /// new root prefixed.
  NodePath ve_to_tot(const TripleData& td, const NodePath& ve) const {
    std::vector<Nat> out;
    if (inf_root) out.push_back(1);
    NodePath cur;
    for (std::size_t i = 0; i < ve.size(); ++i) {
      auto info = td.base_tree.info(cur);
      bool doubled = false;
      if (info && !info->genuine_leaf && !info->infinite() && !info->waiting()) {
        const Vein::Node& src = td.base.vein.at(info->copy_source);
        doubled = src.mark == Mark::Fin && src.kids[0].mark == Mark::Inf;
      }
      out.push_back(doubled ? 2 * ve.at(i) + 1 : ve.at(i));
      cur = cur.child(ve.at(i));
    }
    return NodePath(std::move(out));
  }

  // --- classification of verifier tree positions ---------------------------

  struct Place {
    enum class Kind {
      Root,
      IdentityLeaf,   // <0> (fin case) / <00> (inf case)
      DomSplit,       // <0> in the inf case
      Dispatch,       // <1> (fin) / <01> (inf): the rho dispatch
      RootOutcome,    // <1> in the inf case: least-outcome question
      NoLedgerLeaf,   // <01,c>
      Body,           // interior copy of the plain tree
      AtQuestion,     // almost-terminal node turned (s,n)-question
      Decoder,        // <...,at, code(s,n)>
      Absent
    };
    Kind kind = Kind::Absent;
    const TripleData* td = nullptr;
    NodePath ve;        // plain-tree coordinates (Body/AtQuestion/Decoder)
    std::uint64_t sn_code = 0;
  };

  Place classify(const NodePath& p) const {
    Place out;
    if (p.empty()) {
      out.kind = Place::Kind::Root;
      return out;
    }
    if (!inf_root) {
      if (p.at(0) == 0) {
        out.kind = p.size() == 1 ? Place::Kind::IdentityLeaf : Place::Kind::Absent;
        return out;
      }
      if (p.at(0) != 1) return out;
      if (p.size() == 1) {
        out.kind = Place::Kind::Dispatch;
        return out;
      }
      const TripleData* td = by_code(p.at(1));
      if (!td) return out;
      return classify_body(td, p, 2, NodePath());
    }
    // infinitely branching root
    if (p.at(0) == 0) {
      if (p.size() == 1) {
        out.kind = Place::Kind::DomSplit;
        return out;
      }
      if (p.at(1) == 0) {
        out.kind = p.size() == 2 ? Place::Kind::IdentityLeaf : Place::Kind::Absent;
        return out;
      }
      if (p.at(1) != 1) return out;
      if (p.size() == 2) {
        out.kind = Place::Kind::Dispatch;
        return out;
      }
      const TripleData* td = by_code(p.at(2));
      if (td && p.size() == 3) {
        out.kind = Place::Kind::NoLedgerLeaf;
        out.td = td;
      }
      return out;
    }
    if (p.at(0) != 1) return out;
    if (p.size() == 1) {
      out.kind = Place::Kind::RootOutcome;
      return out;
    }
    auto [code, n] = unpair_code(p.at(1));
    const TripleData* td = by_code(code);
    if (!td) return out;
    NodePath start({static_cast<Nat>(n)});
    if (!td->base_tree.contains(start)) return out;
    return classify_body(td, p, 2, start);
  }

  Place classify_body(const TripleData* td, const NodePath& p, std::size_t from,
                      NodePath ve) const {
    Place out;
    out.td = td;
    for (std::size_t i = from; i <= p.size(); ++i) {
      bool at = at_node(*td, ve);
      if (!at && !subtree_has_at(*td, ve)) return Place{};  // comb never forms
      if (i == p.size()) {
        out.ve = ve;
        out.kind = at ? Place::Kind::AtQuestion : Place::Kind::Body;
        return out;
      }
      if (at) {
        if (i + 1 != p.size()) return Place{};
        out.ve = ve;
        out.sn_code = p.at(i);
        out.kind = Place::Kind::Decoder;
        return out;
      }
      ve = ve.child(p.at(i));
      if (!td->base_tree.contains(ve)) return Place{};
    }
    return Place{};
  }

  // --- questions ------------------------------------------------------------

  bool no_rho_matches(BitSpan x) const {
    for (const auto& td : triples)
      if (is_prefix(td.rho, x)) return false;
    return true;
  }

  /// The (s,n)-question: nothing strictly left of the strategy has been
  /// eligible between s and now, and the total length-of-agreement of its
  /// leaves is still within n.
  bool sn_question(const TripleData& td, const NodePath& ve, std::uint64_t code,
                   BitSpan x) const {
    auto [s, n] = unpair_code(code);
    NodePath xi_tot = ve_to_tot(td, ve);
    {
      std::lock_guard<std::mutex> hold(*td.lock);
      position(td, x);
      const auto& hist = td.thread->history();
      for (Stage t = s + 1; t < x.size() && t < hist.size(); ++t) {
        const NodePath& tp = hist[t];
        for (std::size_t k = 0; k <= tp.size(); ++k)
          if (strictly_left_of(tp.take(k), xi_tot)) return false;
      }
    }
    return agreement_sum(td, ve, x) <= n;
  }

  mutable std::map<std::tuple<std::uint64_t, NodePath, Bits>, Stage> agreement_memo;
  mutable std::mutex agreement_mutex;

  Stage agreement_sum(const TripleData& td, const NodePath& ve, BitSpan x) const {
    Bits input = to_bits(x);
    auto key = std::make_tuple(td.t.code(), ve, input);
    {
      std::lock_guard<std::mutex> hold(agreement_mutex);
      auto it = agreement_memo.find(key);
      if (it != agreement_memo.end()) return it->second;
    }
    auto view =
        const_cast<detail::TripleEngine&>(trace.state->engine_for(td.t)).opponent_view(x.size());
    Stage total = 0;
    for (const auto& lam : leaves_below(td, ve)) {
      const LeafFn* fn = td.base.leaf_fn(lam);
      if (!fn || fn->nowhere_defined) continue;
      Bits out = fn->transform(input, input.size());
      Stage best = 0;
      for (std::size_t len = 0; len <= out.size(); ++len)
        if (view.contains(out.take(len).span())) best = len;
      total += best;
    }
    std::lock_guard<std::mutex> hold(agreement_mutex);
    agreement_memo.emplace(std::move(key), total);
    return total;
  }

  /// Move the cached thread onto this input prefix.
  void position(const TripleData& td, BitSpan x) const {
    TpThread& th = *td.thread;
    std::size_t common = 0;
    while (common < th.sigma().size() && common < x.size() &&
           th.sigma().at(common) == x.at(common))
      ++common;
    while (th.sigma().size() > common) td.thread->pop_bit();
    for (std::size_t i = common; i < x.size(); ++i) td.thread->push_bit(x.at(i));
  }

  // --- decoders ---------------------------------------------------------------

  /// Walk the replayed gamma of a given stage greedily along y; the unique
  /// branch whose image stays a prefix of y.
  std::optional<Bits> alpha_of_length(const std::map<Bits, Bits>& patch, BitSpan y,
                                      std::size_t len) const {
    Bits alpha;
    while (alpha.size() < len) {
      bool moved = false;
      for (int bit : {0, 1}) {
        Bits next = alpha.append(bit);
        if (!trace.config().S.member(next)) continue;
        Bits img = ConstructionTrace::complete(patch, next);
        if (img.size() <= y.size() && is_prefix(img, y)) {
          alpha = std::move(next);
          moved = true;
          break;
        }
      }
      if (!moved) return std::nullopt;
    }
    return alpha;
  }

  /// v(λ,u): the witnessed output maxima of receipts before stage u.
  Stage witnessed_sum(const TripleData& td, const NodePath& xi_tot, Stage u) const {
    std::map<NodePath, Stage> vmax;
    for (const auto& ev : trace.state->events()) {
      if (!(ev.triple == td.t) || ev.kind != TraceEvent::Kind::Attention) continue;
      if (ev.stage >= u || ev.xi != xi_tot) continue;
      vmax[ev.lambda] = std::max<Stage>(vmax[ev.lambda], ev.flen);
    }
    Stage total = 0;
    for (const auto& [lam, v] : vmax) total += v;
    return total;
  }

  Bits decode(const TripleData& td, const NodePath& ve, std::uint64_t sn_code,
              const Bits& y, std::uint64_t budget) const {
    auto [s, n] = unpair_code(sn_code);
    NodePath xi_tot = ve_to_tot(td, ve);
    if (y.size() < s) return Bits();

    Nat p;
    {
      std::lock_guard<std::mutex> hold(*td.lock);
      position(td, y.take(s).span());
      p = td.thread->prior(xi_tot);
    }

    // wait for the ledger and the live agreement to meet at n
    std::optional<Stage> s0;
    for (Stage u = s; u <= std::min<Stage>(y.size(), opt.decoder_budget); ++u) {
      if (witnessed_sum(td, xi_tot, u) == n && agreement_sum(td, ve, y.span(u)) == n) {
        s0 = u;
        break;
      }
    }
    if (!s0) return Bits();

    Bits alpha;
    std::size_t want = std::min<std::size_t>(budget, y.size());
    for (std::size_t L = std::max<std::size_t>(p, 1); alpha.size() < want; ++L) {
      std::optional<Stage> settle;
      {
        std::lock_guard<std::mutex> hold(*td.lock);
        position(td, y.span());
        // the L-th eligibility stage of the strategy along y
        Nat seen = 0;
        const auto& hist = td.thread->history();
        for (Stage t = 1; t < hist.size(); ++t) {
          if (is_prefix(xi_tot, hist[t])) {
            ++seen;
            if (seen == L) {
              settle = t;
              break;
            }
          }
        }
      }
      if (!settle) break;
      Stage sl = std::max(*settle, *s0);
      auto patch = trace.gamma_at(td.t, sl);
      auto a = alpha_of_length(patch, y.span(), L);
      if (!a) break;
      alpha = *a;
      if (L >= want) break;
    }
    return alpha.take(want);
  }

  Bits decode_no_ledger(const TripleData& td, const Bits& y, std::uint64_t budget) const {
    // believes nothing ever acts along y: the final patches are already true
    std::map<Bits, Bits> patch = trace.state->engine_for(td.t).patches();
    Bits alpha;
    std::size_t want = std::min<std::size_t>(budget, y.size());
    while (alpha.size() < want) {
      auto a = alpha_of_length(patch, y.span(), alpha.size() + 1);
      if (!a) break;
      alpha = *a;
    }
    return alpha;
  }
};

}  // namespace detail

/// The verifier flowchart: a flow whose true path sorts an input of the
/// constructed tree into its source-side or one of the comb copies, and
/// whose leaves decode the gamma preimage from the recorded run.
inline Flow build_verifier(const ConstructionTrace& trace, VerifierOptions opt = {}) {
  auto core = std::make_shared<detail::VerifierCore>();
  core->trace = trace;
  core->opt = opt;
  const Vein& vein = trace.config().vein;
  if (vein.root().mark == Mark::Leaf)
    throw std::invalid_argument("verifier needs a non-leaf base vein");
  core->inf_root = vein.root().mark == Mark::Inf;
  core->root_rank = vein.root().rank;
  for (const auto& t : trace.config().triples) {
    detail::VerifierCore::TripleData td;
    td.t = t;
    td.rho = trace.state->engine_for(t).rho();
    td.base = registry_flow(trace.config().registry, vein, t.e, trace.config().oracle_d);
    td.base.outcome_bound = trace.state->engine_for(t).tot_flow().outcome_bound;
    td.base_tree = td.base.tree(kSemanticStage);
    td.tot = &trace.state->engine_for(t).tot_flow();
    td.thread = std::make_unique<TpThread>(*td.tot);
    td.lock = std::make_unique<std::mutex>();
    core->triples.push_back(std::move(td));
  }

  using Place = detail::VerifierCore::Place;

  Flow f;
  f.name = "verifier";
  f.vein = prime_literal(vein);
  f.outcome_bound = opt.outcome_bound;
  f.oracle = trace.config().oracle_d;
  f.weakly_total = false;

  f.tree_at = [core](Stage) {
    return LabeledTree([core](const NodePath& p) -> std::optional<TreeNodeInfo> {
      Place pl = core->classify(p);
      TreeNodeInfo info;
      info.copy_source = NodePath();
      switch (pl.kind) {
        case Place::Kind::Root:
          info.rank = core->inf_root ? core->root_rank + 1 : 1;
          info.width = 2;
          info.genuine_leaf = false;
          return info;
        case Place::Kind::IdentityLeaf:
        case Place::Kind::NoLedgerLeaf:
        case Place::Kind::Decoder:
          info.rank = 0;
          info.width = 0;
          info.genuine_leaf = true;
          return info;
        case Place::Kind::DomSplit:
          info.rank = 1;
          info.width = 2;
          info.genuine_leaf = false;
          return info;
        case Place::Kind::Dispatch:
          info.rank = 0;
          info.width = std::nullopt;
          info.genuine_leaf = false;
          return info;
        case Place::Kind::RootOutcome:
          info.rank = 1;
          info.width = std::nullopt;
          info.genuine_leaf = false;
          return info;
        case Place::Kind::AtQuestion:
          info.rank = 1;
          info.width = std::nullopt;
          info.genuine_leaf = false;
          return info;
        case Place::Kind::Body: {
          auto base = pl.td->base_tree.info(pl.ve);
          if (!base) return std::nullopt;
          return *base;
        }
        case Place::Kind::Absent:
          return std::nullopt;
      }
      return std::nullopt;
    });
  };

  f.p = MatrixPred("verifier-p", [core](const NodePath& node, Nat outcome, BitSpan x,
                                        BitSpan z) {
    Place pl = core->classify(node);
    if (pl.kind == Place::Kind::Root) {
      // infinitely branching root, rank ≥ 2: outcome 0 watches for "no comb
      // copy admits the input"
      if (outcome == 1) return true;
      if (outcome != 0) return false;
      for (const auto& td : core->triples) {
        if (!is_prefix(td.rho, x)) continue;
        for (std::uint64_t n = 0; n < td.base.outcome_bound; ++n) {
          if (core->root_rank == 1 && td.base.q.eval(NodePath(), static_cast<Nat>(n), x, z))
            return false;
          if (core->root_rank == 0) {
            auto label = td.base.eta.at(NodePath(), static_cast<Nat>(n), x.size());
            if (label && is_prefix(*label, x)) return false;
          }
        }
      }
      return true;
    }
    if (pl.kind == Place::Kind::Body) return pl.td->base.p.eval(pl.ve, outcome, x, z);
    return false;
  });

  f.q = MatrixPred("verifier-q", [core](const NodePath& node, Nat outcome, BitSpan x,
                                        BitSpan z) {
    Place pl = core->classify(node);
    switch (pl.kind) {
      case Place::Kind::Root:  // fin case: rank-1 two-way split
      case Place::Kind::DomSplit:
        if (outcome == 0) return core->no_rho_matches(x);
        return outcome == 1;
      case Place::Kind::RootOutcome: {
        // outcome codes (triple, n): the input extends the triple's rho and
        // n is the least still-alive outcome of the plain root
        auto [code, n] = unpair_code(outcome);
        const auto* td = core->by_code(code);
        if (!td) return false;
        if (!comparable(td->rho, x)) return false;
        auto alive = [&](std::uint64_t m) {
          for (std::size_t j = 0; j <= x.size(); ++j)
            if (!td->base.q.eval(NodePath(), static_cast<Nat>(m),
                                 BitSpan(x.data(), std::min<std::size_t>(j, x.size())),
                                 BitSpan(z.data(), std::min<std::size_t>(j, z.size()))))
              return false;
          return true;
        };
        if (core->root_rank != 1) return false;
        if (!alive(n)) return false;
        for (std::uint64_t m = 0; m < n; ++m)
          if (alive(m)) return false;
        return true;
      }
      case Place::Kind::AtQuestion:
        return core->sn_question(*pl.td, pl.ve, outcome, x);
      case Place::Kind::Body:
        return pl.td->base.q.eval(pl.ve, outcome, x, z);
      default:
        return false;
    }
  });

  f.eta = ClopenFn(
      "verifier-eta",
      [core](const NodePath& node, Nat outcome, Stage s) -> std::optional<Bits> {
        Place pl = core->classify(node);
        if (pl.kind == Place::Kind::Dispatch) {
          const auto* td = core->by_code(outcome);
          if (!td) return std::nullopt;
          return td->rho;
        }
        if (pl.kind == Place::Kind::Body) return pl.td->base.eta.at(pl.ve, outcome, s);
        return std::nullopt;
      },
      [core](const NodePath& node, Nat outcome) -> std::optional<Stage> {
        Place pl = core->classify(node);
        if (pl.kind == Place::Kind::Dispatch)
          return core->by_code(outcome) ? std::optional<Stage>(0) : std::nullopt;
        if (pl.kind == Place::Kind::Body)
          return pl.td->base.eta.converges_at(pl.ve, outcome);
        return std::nullopt;
      });

  f.leaf_fn = [core](const NodePath& node) -> const LeafFn* {
    Place pl = core->classify(node);
    static const LeafFn identity = lib::leaf_identity();
    switch (pl.kind) {
      case Place::Kind::IdentityLeaf:
        return &identity;
      case Place::Kind::Decoder: {
        std::lock_guard<std::mutex> hold(core->leaf_cache_mutex);
        auto it = core->leaf_cache.find(node);
        if (it == core->leaf_cache.end()) {
          auto td = pl.td;
          auto ve = pl.ve;
          auto code = pl.sn_code;
          auto fn = std::make_unique<LeafFn>();
          fn->name = "decode";
          fn->transform = [core, td, ve, code](const Bits& in, std::uint64_t budget) {
            return core->decode(*td, ve, code, in, budget);
          };
          it = core->leaf_cache.emplace(node, std::move(fn)).first;
        }
        return it->second.get();
      }
      case Place::Kind::NoLedgerLeaf: {
        std::lock_guard<std::mutex> hold(core->leaf_cache_mutex);
        auto it = core->leaf_cache.find(node);
        if (it == core->leaf_cache.end()) {
          auto td = pl.td;
          auto fn = std::make_unique<LeafFn>();
          fn->name = "decode0";
          fn->transform = [core, td](const Bits& in, std::uint64_t budget) {
            return core->decode_no_ledger(*td, in, budget);
          };
          it = core->leaf_cache.emplace(node, std::move(fn)).first;
        }
        return it->second.get();
      }
      default:
        return nullptr;
    }
  };

  return f;
}

/// Structural check: every explored node of the tree sits at a compatible
/// slot of a branching of the vein (questions may be simpler than the slot
/// allows, subtrees may be truncated).
inline bool embeds_into_branching(const LabeledTree& tree, const Vein& vein,
                                  std::size_t depth, std::uint64_t width_cap) {
  struct Walk {
    const LabeledTree* tree;
    std::size_t depth;
    std::uint64_t cap;
    bool check(const NodePath& p, const Vein::Node& slot) {
      auto info = tree->info(p);
      if (!info) return true;
      if (!info->genuine_leaf && !info->waiting()) {
        if (info->rank > slot.rank) return false;
        if (slot.mark == Mark::Leaf) return false;
        if (slot.mark == Mark::Fin && info->infinite()) return false;
      }
      if (p.size() >= depth || slot.mark == Mark::Leaf) return true;
      std::uint64_t limit = info->bounded_width(cap);
      for (std::uint64_t n = 0; n < limit; ++n)
        if (!check(p.child(static_cast<Nat>(n)), slot.kids[0])) return false;
      return true;
    }
  };
  return Walk{&tree, depth, width_cap}.check(NodePath(), vein.root());
}

}  // namespace veinlab
