#pragma once

#include <random>

#include "veinlab/construction.hpp"
#include "veinlab/reduction.hpp"
#include "veinlab/verifier.hpp"

namespace veinlab {
namespace presets {

/// The Dirichlet analog on Cantor space: rank-2 split on "infinitely many
/// ones", constant answer streams on the leaves.
inline Flow dir_flow() {
  Vein v = Vein::basic(2, Mark::Fin);
  BranchingFunction b;
  b.assign[NodePath()] = 2;
  LeafTable leaves;
  leaves.set(NodePath({0}), lib::leaf_zeros());
  leaves.set(NodePath({1}), lib::leaf_ones());
  return make_static_flow("dir", v, b, lib::dir(), lib::p_const(true), lib::eta_none(),
                          leaves);
}

/// Choice over the naturals: the least position holding a zero.
inline Flow choice_flow(std::uint64_t bound = 4096) {
  LeafTable leaves;
  leaves.set_default(lib::leaf_identity());
  Flow f = make_static_flow("choice", Vein::basic(1, Mark::Inf), BranchingFunction{},
                            lib::p_const(true), lib::bit_at(0), lib::eta_none(), leaves);
  f.outcome_bound = bound;
  return f;
}

inline Flow single_leaf_flow(LeafFn fn, const char* name = "leaf") {
  LeafTable leaves;
  leaves.set(NodePath(), std::move(fn));
  return make_static_flow(name, Vein::leaf(), BranchingFunction{}, lib::p_const(true),
                          lib::p_const(true), lib::eta_none(), leaves);
}

/// A rank-2 split whose left branch opens into an infinite rank-1 choice:
/// the smallest flow with a doubled node after weak-totalization.
inline Flow split_choice_flow() {
  Vein v = concat(Vein::basic(2, Mark::Fin), Vein::basic(1, Mark::Inf));
  BranchingFunction b;
  b.assign[NodePath()] = 2;
  LeafTable leaves;
  leaves.set_default(lib::leaf_identity());
  Flow f = make_static_flow("split-choice", v, b, lib::dir(), lib::bit_at(0),
                            lib::eta_none(), leaves);
  f.outcome_bound = 2048;
  return f;
}

/// Rank-0 dispatch over two cylinders, each answering with a different
/// machine.
inline Flow dispatch_flow() {
  Vein v = Vein::basic(0, Mark::Inf);
  LeafTable leaves;
  leaves.set(NodePath({0}), lib::leaf_flip());
  leaves.set(NodePath({1}), lib::leaf_identity());
  leaves.set_default(lib::leaf_zeros());
  return make_static_flow("dispatch", v, BranchingFunction{}, lib::p_const(true),
                          lib::p_const(true),
                          lib::eta_list({Bits::from_string("1"), Bits::from_string("0")}),
                          leaves);
}

/// A partial flow: the rank-0 dispatch converges only on one branch, so the
/// staged walk halts forever on inputs outside it.
inline Flow partial_dispatch_flow() {
  Vein v = Vein::basic(0, Mark::Inf);
  LeafTable leaves;
  leaves.set(NodePath({0}), lib::leaf_ones());
  return make_static_flow("partial-dispatch", v, BranchingFunction{}, lib::p_const(true),
                          lib::p_const(true), lib::eta_list({Bits::from_string("00")}),
                          leaves);
}

/// Parametric family used to grow the liminf corpus: a rank-2 watcher for a
/// pattern over a rank-1 choice on one side.
inline Flow pattern_flow(const Bits& pattern, int flavor) {
  Vein v = concat(Vein::basic(2, Mark::Fin), Vein::basic(1, Mark::Inf));
  BranchingFunction b;
  b.assign[NodePath()] = 2;
  LeafTable leaves;
  switch (flavor % 3) {
    case 0: leaves.set_default(lib::leaf_identity()); break;
    case 1: leaves.set_default(lib::leaf_flip()); break;
    default: leaves.set_default(lib::leaf_delay(2)); break;
  }
  Flow f = make_static_flow("pattern:" + pattern.str() + ":" + std::to_string(flavor), v,
                            b, lib::ends_with({pattern}),
                            flavor % 2 ? lib::bit_at(0) : lib::bit_at(1), lib::eta_none(),
                            leaves);
  f.outcome_bound = 2048;
  return f;
}

/// The flow corpus for the liminf and totalization batteries.  All members
/// carry exact deciders; the last entries are partial.
inline std::vector<Flow> liminf_corpus() {
  std::vector<Flow> out;
  out.push_back(dir_flow());
  out.push_back(choice_flow(30000));
  out.push_back(single_leaf_flow(lib::leaf_identity(), "id-leaf"));
  out.push_back(single_leaf_flow(lib::leaf_flip(), "flip-leaf"));
  out.push_back(split_choice_flow());
  out.push_back(dispatch_flow());
  out.push_back(partial_dispatch_flow());
  out.push_back(weak_totalize(choice_flow(30000)));
  out.push_back(weak_totalize(split_choice_flow()));
  std::vector<Bits> pats = {Bits::from_string("1"),   Bits::from_string("0"),
                            Bits::from_string("11"),  Bits::from_string("10"),
                            Bits::from_string("01"),  Bits::from_string("101"),
                            Bits::from_string("000"), Bits::from_string("110")};
  for (std::size_t i = 0; i < pats.size(); ++i) {
    out.push_back(pattern_flow(pats[i], static_cast<int>(i)));
    if (out.size() >= 21) break;
  }
  while (out.size() < 22) out.push_back(pattern_flow(Bits::from_string("0110"), 1));
  return out;
}

/// Deterministic battery of eventually periodic probes.
inline std::vector<StagePoint> probe_points(std::size_t count, std::uint32_t seed,
                                            std::size_t max_prefix = 5,
                                            std::size_t max_period = 4) {
  std::mt19937 rng(seed);
  std::vector<StagePoint> out;
  while (out.size() < count) {
    std::size_t plen = rng() % (max_prefix + 1);
    std::size_t qlen = 1 + rng() % max_period;
    Bits pre, per;
    for (std::size_t k = 0; k < plen; ++k) pre.push_back(rng() % 2);
    for (std::size_t k = 0; k < qlen; ++k) per.push_back(rng() % 2);
    out.push_back(StagePoint::eventually_periodic(pre, per));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded construction scenarios (the finite-opponent and adversarial
// regimes, across several base veins).

struct Scenario {
  std::string name;
  ConstructionConfig config;
  bool adversarial = false;   // expects unbounded image growth
  Triple monitored;           // the triple whose gamma the regime talks about
};

/// Registry shared by the scenarios: entry 0/1 are flows under
/// diagonalization, 2/3 the identity machine pair, 4/5 broken machines.
inline FlowRegistry scenario_registry() {
  FlowRegistry reg;
  reg.add(RegistryEntry{"half-flow", lib::width_const(1), lib::p_const(true),
                        lib::p_const(true), lib::eta_none(), lib::leaf_half()});
  reg.add(RegistryEntry{"choice-half", lib::width_const(1, 2), lib::p_const(true),
                        lib::bit_at(0), lib::eta_none(), lib::leaf_half()});
  reg.add(RegistryEntry{"identity", lib::width_const(1), lib::p_const(true),
                        lib::p_const(true), lib::eta_none(), lib::leaf_identity()});
  reg.add(RegistryEntry{"interleave0", lib::width_const(1), lib::p_const(true),
                        lib::p_const(true), lib::eta_none(), lib::leaf_interleave_zero()});
  reg.add(RegistryEntry{"ones", lib::width_const(1), lib::p_const(true),
                        lib::p_const(true), lib::eta_none(), lib::leaf_ones()});
  reg.add(RegistryEntry{"never", lib::width_never(), lib::p_const(true),
                        lib::p_const(true), lib::eta_none(), lib::leaf_identity()});
  return reg;
}

/// Finite opponent: everything up to a fixed depth.  Outputs escape by
/// length, never sideways, so the attention ledger tracks the
/// length-of-agreement exactly.
inline ApproxMultifunction finite_opponent(std::size_t depth) {
  return ApproxMultifunction(
      "full-depth:" + std::to_string(depth),
      [depth](BitSpan sigma, BitSpan) { return sigma.size() <= depth; });
}

inline std::vector<Scenario> construction_scenarios(Stage stages = 5000,
                                                    std::size_t depth = 64) {
  std::vector<Scenario> out;
  auto base = [&](const char* name, Vein vein, Triple t) {
    Scenario sc;
    sc.name = name;
    sc.config.S = BitTreePredicate::no11();
    sc.config.U = ApproxMultifunction::full();
    sc.config.registry = scenario_registry();
    sc.config.vein = std::move(vein);
    sc.config.triples = {t};
    sc.config.stages = stages;
    sc.config.depth = depth;
    sc.monitored = t;
    return sc;
  };

  // adversarial regime: the opponent accepts everything
  {
    Scenario sc = base("adv-v21-half", Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
    sc.adversarial = true;
    out.push_back(sc);
  }
  {
    Scenario sc = base("adv-v1w-choice", Vein::basic(1, Mark::Inf), Triple{1, 2, 3});
    sc.adversarial = true;
    out.push_back(sc);
  }
  {
    Scenario sc = base("adv-full-s", Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
    sc.config.S = BitTreePredicate::no_ones_run(3);
    sc.adversarial = true;
    out.push_back(sc);
  }

  // finite-opponent regime: attention dries up, everything stabilizes
  for (std::size_t d : {10, 12, 16}) {
    Scenario sc = base(("fin-v21-d" + std::to_string(d)).c_str(),
                       Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
    sc.config.U = finite_opponent(d);
    out.push_back(sc);
  }
  {
    Scenario sc = base("fin-v1w-d12", Vein::basic(1, Mark::Inf), Triple{1, 2, 3});
    sc.config.U = finite_opponent(12);
    out.push_back(sc);
  }
  {
    Scenario sc = base("fin-no11-u", Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
    sc.config.U = ApproxMultifunction::constant(
        BitTreePredicate::finite(BitTreePredicate::no11().materialize(5)));
    out.push_back(sc);
  }

  // wrong machine pairs: the opponent view never grows at all
  {
    Scenario sc = base("empty-ones", Vein::basic(2, Mark::Fin), Triple{0, 2, 4});
    out.push_back(sc);
  }
  {
    // the flow under diagonalization never opens its branching: the staged
    // walk waits at the root forever and nothing can require attention
    Scenario sc = base("waiting-flow", Vein::basic(2, Mark::Fin), Triple{5, 2, 3});
    sc.config.U = finite_opponent(12);
    out.push_back(sc);
  }

  // two triples sharing one construction
  {
    Scenario sc = base("two-triples", Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
    sc.config.U = finite_opponent(14);
    sc.config.triples = {Triple{0, 2, 3}, Triple{1, 2, 4}};
    out.push_back(sc);
  }
  return out;
}

/// Sample source-side points that lie in the no-11 tree.
inline std::vector<StagePoint> s_side_points() {
  return {StagePoint::zeros(), StagePoint::parse("/01"), StagePoint::parse("00/10"),
          StagePoint::parse("010/0"), StagePoint::parse("/001")};
}

}  // namespace presets
}  // namespace veinlab
