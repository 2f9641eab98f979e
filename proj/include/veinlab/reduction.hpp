#pragma once

#include "veinlab/approx.hpp"
#include "veinlab/totalize.hpp"

namespace veinlab {

struct EvalOutcome {
  Bits out;
  bool complete = false;
  bool exhausted = false;  // ran out of budget before deciding
};

/// A budgeted stream evaluator: the common shape of flows, leaf machines,
/// and composed pipelines when the checkers drive them.
struct Evaluator {
  std::string name;
  std::function<EvalOutcome(const StagePoint&, std::size_t bits, Stage budget)> run;
};

inline Evaluator evaluator_identity() {
  return Evaluator{"id", [](const StagePoint& x, std::size_t bits, Stage) {
                     return EvalOutcome{x.prefix(bits), true, false};
                   }};
}

inline Evaluator evaluator_from_leaf(LeafFn fn) {
  auto f = std::make_shared<LeafFn>(std::move(fn));
  return Evaluator{f->name, [f](const StagePoint& x, std::size_t bits, Stage budget) {
                     EvalOutcome r;
                     for (Stage m = 1; m <= budget; ++m) {
                       r.out = f->transform(x.prefix(m), m);
                       if (r.out.size() >= bits) {
                         r.out = r.out.take(bits);
                         r.complete = true;
                         return r;
                       }
                     }
                     r.exhausted = true;
                     return r;
                   }};
}

inline Evaluator evaluator_from_flow(Flow flow) {
  auto f = std::make_shared<Flow>(std::move(flow));
  return Evaluator{f->name, [f](const StagePoint& x, std::size_t bits, Stage budget) {
                     EvalOutcome r;
                     auto e = eval_flow(*f, x, bits, budget);
                     r.out = e.output;
                     r.complete = e.status == EvalStatus::Complete;
                     r.exhausted = e.status == EvalStatus::BudgetExhausted ||
                                   e.status == EvalStatus::Shortfall;
                     return r;
                   }};
}

// ---------------------------------------------------------------------------
// Reduction-witness checking.  A verdict of refuted is certain (the family
// laws make absence at matched knowledge permanent); consistent is evidence
// at the stated precision; timeouts are never blamed on the witness.

enum class Verdict { Consistent, Refuted, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Consistent: return "consistent";
    case Verdict::Refuted: return "refuted";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct SampleVerdict {
  Verdict verdict = Verdict::Inconclusive;
  std::size_t refuted_at = 0;  // first bad bit when refuted
  bool sample_invalid = false; // the sample itself failed its certificate
};

struct ReductionSample {
  StagePoint x;
  StagePoint y;
};

namespace detail {

inline SampleVerdict check_output_against(const ApproxMultifunction& F, const StagePoint& x,
                                          const EvalOutcome& out, std::size_t precision,
                                          Stage budget) {
  SampleVerdict v;
  Bits knowledge = x.prefix(std::max<std::size_t>(budget, precision));
  for (std::size_t k = 0; k <= out.out.size(); ++k) {
    if (!F.contains(out.out.take(k).span(), knowledge.span())) {
      v.verdict = Verdict::Refuted;
      v.refuted_at = k;
      return v;
    }
  }
  if (!out.complete || out.out.size() < precision) {
    v.verdict = Verdict::Inconclusive;
    return v;
  }
  v.verdict = Verdict::Consistent;
  return v;
}

}  // namespace detail

/// y ∈ G(x) certified; does θ(y) stay inside F(x) to the stated precision?
inline std::vector<SampleVerdict> check_cowadge(const ApproxMultifunction& F,
                                                const ApproxMultifunction& G,
                                                const Evaluator& theta,
                                                const std::vector<ReductionSample>& samples,
                                                std::size_t precision, Stage budget) {
  std::vector<SampleVerdict> out;
  for (const auto& s : samples) {
    SampleVerdict v;
    Bits ypfx = s.y.prefix(precision);
    if (!G.contains(ypfx.span(), s.x.prefix(std::max<std::size_t>(budget, precision)).span())) {
      v.sample_invalid = true;
      v.verdict = Verdict::Inconclusive;
      out.push_back(v);
      continue;
    }
    EvalOutcome r = theta.run(s.y, precision, budget);
    out.push_back(detail::check_output_against(F, s.x, r, precision, budget));
  }
  return out;
}

/// The two-map variant: y ∈ G(h(x)) certified, k(x,y) must land in F(x).
inline std::vector<SampleVerdict> check_weihrauch(
    const ApproxMultifunction& F, const ApproxMultifunction& G, const Evaluator& h,
    const std::function<EvalOutcome(const StagePoint& x, const StagePoint& y,
                                    std::size_t bits, Stage budget)>& k,
    const std::vector<ReductionSample>& samples, std::size_t precision, Stage budget) {
  std::vector<SampleVerdict> out;
  for (const auto& s : samples) {
    SampleVerdict v;
    EvalOutcome hx = h.run(s.x, precision, budget);
    if (hx.out.empty() && !hx.complete) {
      v.verdict = Verdict::Inconclusive;
      out.push_back(v);
      continue;
    }
    Bits ypfx = s.y.prefix(std::min<std::size_t>(precision, hx.out.size()));
    if (!G.contains(ypfx.span(), hx.out.span())) {
      v.sample_invalid = true;
      v.verdict = Verdict::Inconclusive;
      out.push_back(v);
      continue;
    }
    EvalOutcome r = k(s.x, s.y, precision, budget);
    out.push_back(detail::check_output_against(F, s.x, r, precision, budget));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundles.

/// Points of a product space presented as interleaved streams.
inline StagePoint join_points(const StagePoint& x, const StagePoint& y) {
  auto xp = std::make_shared<StagePoint>(x);
  auto yp = std::make_shared<StagePoint>(y);
  return StagePoint::from_bit_fn([xp, yp](std::uint64_t n) {
    return n % 2 == 0 ? xp->bit_at(n / 2) : yp->bit_at(n / 2);
  });
}

inline StagePoint even_part(const StagePoint& p) {
  auto pp = std::make_shared<StagePoint>(p);
  return StagePoint::from_bit_fn([pp](std::uint64_t n) { return pp->bit_at(2 * n); });
}

inline StagePoint odd_part(const StagePoint& p) {
  auto pp = std::make_shared<StagePoint>(p);
  return StagePoint::from_bit_fn([pp](std::uint64_t n) { return pp->bit_at(2 * n + 1); });
}

/// A bundle at finite precision: the projection evaluator together with a
/// membership probe for the total space.
struct BundleEvaluator {
  std::string name;
  Evaluator projection;
  std::function<std::optional<bool>(const StagePoint& pt, std::size_t precision,
                                    Stage budget)> member;
};

/// The trivial bundle of a multifunction: total space is the graph, the
/// projection forgets the fiber coordinate.
inline BundleEvaluator trivial_bundle(const ApproxMultifunction& F) {
  auto fam = std::make_shared<ApproxMultifunction>(F);
  BundleEvaluator b;
  b.name = "pi[" + F.name() + "]";
  b.projection = Evaluator{"pi", [](const StagePoint& pt, std::size_t bits, Stage) {
                             return EvalOutcome{even_part(pt).prefix(bits), true, false};
                           }};
  b.member = [fam](const StagePoint& pt, std::size_t precision, Stage budget) {
    Bits x = even_part(pt).prefix(std::max<std::size_t>(precision, budget));
    Bits y = odd_part(pt).prefix(precision);
    return std::optional<bool>(fam->contains(y.span(), x.span()));
  };
  return b;
}

/// The pullback of a bundle along a map: pairs whose h-image and projection
/// agree, tested prefixwise.
inline BundleEvaluator pullback(const Evaluator& h, const BundleEvaluator& pi) {
  auto hp = std::make_shared<Evaluator>(h);
  auto pp = std::make_shared<BundleEvaluator>(pi);
  BundleEvaluator b;
  b.name = "pullback[" + h.name + "," + pi.name + "]";
  b.projection = Evaluator{"pi*", [](const StagePoint& pt, std::size_t bits, Stage) {
                             return EvalOutcome{even_part(pt).prefix(bits), true, false};
                           }};
  b.member = [hp, pp](const StagePoint& pt, std::size_t precision,
                      Stage budget) -> std::optional<bool> {
    StagePoint x = even_part(pt);
    StagePoint y = odd_part(pt);
    auto inner = pp->member(y, precision, budget);
    if (!inner.has_value()) return std::nullopt;
    if (!*inner) return false;
    EvalOutcome hx = hp->run(x, precision, budget);
    EvalOutcome py = pp->projection.run(y, precision, budget);
    std::size_t n = std::min(hx.out.size(), py.out.size());
    for (std::size_t i = 0; i < n; ++i)
      if (hx.out.at(i) != py.out.at(i)) return false;  // excluded from bit i on
    if (n < precision && !(hx.complete && py.complete)) return std::nullopt;
    return true;
  };
  return b;
}

// ---------------------------------------------------------------------------
// Composition with true-path computations.

/// k(x, ρ): turns the reported path into output bits.
using PathCombiner =
    std::function<Bits(const Bits& x_prefix, const NodePath& rho, std::size_t bits)>;

inline PathCombiner combine_identity() {
  return [](const Bits& x, const NodePath&, std::size_t bits) { return x.take(bits); };
}

/// Emits the first path entry as a constant answer stream.
inline PathCombiner combine_path_tag() {
  return [](const Bits&, const NodePath& rho, std::size_t bits) {
    Bits out;
    int tag = rho.empty() ? 0 : static_cast<int>(rho.at(0) % 2);
    for (std::size_t i = 0; i < bits; ++i) out.push_back(tag);
    return out;
  };
}

/// x ↦ k(x, TP_Λ(h(x))) at finite budget.
inline Evaluator compose_tp(Flow flow, LeafFn h, PathCombiner k) {
  auto fp = std::make_shared<Flow>(std::move(flow));
  auto hp = std::make_shared<LeafFn>(std::move(h));
  auto kp = std::make_shared<PathCombiner>(std::move(k));
  return Evaluator{
      "tp[" + fp->name + "]",
      [fp, hp, kp](const StagePoint& x, std::size_t bits, Stage budget) {
        EvalOutcome r;
        Bits ypfx = hp->transform(x.prefix(budget), budget);
        if (ypfx.empty()) {
          r.exhausted = true;
          return r;
        }
        auto yb = std::make_shared<Bits>(ypfx);
        StagePoint y = StagePoint::from_bit_fn([yb](std::uint64_t n) {
          if (n >= yb->size()) throw std::out_of_range("beyond evaluated prefix");
          return yb->at(n);
        });
        auto tp = true_path(*fp, y, std::min<Stage>(budget, ypfx.size()));
        if (!tp.certified()) {
          r.exhausted = true;
          return r;
        }
        r.out = (*kp)(x.prefix(budget), tp.path, bits);
        r.complete = r.out.size() >= bits;
        return r;
      }};
}

/// The two-stage pipeline: pick the leftmost member of G(h1(x)) at the
/// working precision, run the true-path computation on it, then combine.
inline Evaluator compose_tp_star(Flow flow, ApproxMultifunction G, LeafFn h1,
                                 PathCombiner k) {
  auto fp = std::make_shared<Flow>(std::move(flow));
  auto gp = std::make_shared<ApproxMultifunction>(std::move(G));
  auto hp = std::make_shared<LeafFn>(std::move(h1));
  auto kp = std::make_shared<PathCombiner>(std::move(k));
  return Evaluator{
      "tp*[" + fp->name + "]",
      [fp, gp, hp, kp](const StagePoint& x, std::size_t bits, Stage budget) {
        EvalOutcome r;
        Bits base = hp->transform(x.prefix(budget), budget);
        Bits w;
        while (w.size() < base.size()) {
          bool moved = false;
          for (int bit : {0, 1}) {
            Bits cand = w.append(bit);
            if (gp->contains(cand.span(), base.span(cand.size()))) {
              w = std::move(cand);
              moved = true;
              break;
            }
          }
          if (!moved) break;
        }
        if (w.empty()) {
          r.exhausted = true;
          return r;
        }
        auto wb = std::make_shared<Bits>(w);
        StagePoint wp = StagePoint::from_bit_fn([wb](std::uint64_t n) {
          if (n >= wb->size()) throw std::out_of_range("beyond selected member");
          return wb->at(n);
        });
        auto tp = true_path(*fp, wp, std::min<Stage>(budget, w.size()));
        if (!tp.certified()) {
          r.exhausted = true;
          return r;
        }
        r.out = (*kp)(x.prefix(budget), tp.path, bits);
        r.complete = r.out.size() >= bits;
        return r;
      }};
}

}  // namespace veinlab
