#include <gtest/gtest.h>
#include <random>

#include "veinlab/totalize.hpp"

using namespace veinlab;

namespace {

NodePath P(std::initializer_list<Nat> e) { return NodePath(e); }
Bits B(const char* s) { return Bits::from_string(s); }

RegistryEntry entry_with(WidthEvaluator w, ClopenFn eta = lib::eta_none()) {
  return RegistryEntry{"test", std::move(w), lib::p_const(true), lib::bit_at(0),
                       std::move(eta), lib::leaf_identity()};
}

TEST(StageBranching, NeverConvergingWidthKeepsRootOnly) {
  FlowRegistry reg;
  std::size_t e = reg.add(entry_with(lib::width_never()));
  Vein v = Vein::basic(2, Mark::Fin);
  for (Stage s : {0u, 3u, 50u}) {
    LabeledTree t = stage_branching(reg, v, e, s);
    EXPECT_EQ(t.explore(4, 4).size(), 1u);
    EXPECT_TRUE(t.at(NodePath()).waiting());
  }
}

TEST(StageBranching, WidthGateOpensAtItsStage) {
  FlowRegistry reg;
  std::size_t e = reg.add(entry_with(lib::width_const(2, 5)));
  Vein v = Vein::basic(2, Mark::Fin);
  EXPECT_EQ(stage_branching(reg, v, e, 4).explore(4, 4).size(), 1u);
  LabeledTree t5 = stage_branching(reg, v, e, 5);
  EXPECT_EQ(t5.explore(4, 4).size(), 3u);
  EXPECT_TRUE(t5.at(P({0})).genuine_leaf);
  EXPECT_TRUE(t5.at(P({1})).genuine_leaf);
}

TEST(StageBranching, RankZeroChildrenFollowLabelSchedule) {
  FlowRegistry reg;
  std::size_t e = reg.add(entry_with(lib::width_const(1), lib::eta_binary()));
  Vein v = Vein::basic(0, Mark::Inf);
  for (Stage s : {0u, 3u, 7u}) {
    LabeledTree t = stage_branching(reg, v, e, s);
    for (Nat n = 0; n <= s + 2; ++n)
      EXPECT_EQ(t.contains(P({n})), n <= s) << "s=" << s << " n=" << n;
  }
}

TEST(StageBranching, MonotoneAndLeafMarked) {
  FlowRegistry reg;
  std::size_t e = reg.add(entry_with(lib::width_const(2, 3), lib::eta_binary()));
  Vein v = concat(Vein::basic(2, Mark::Fin), Vein::basic(1, Mark::Inf));
  FiniteTree prev;
  for (Stage s = 0; s < 8; ++s) {
    FiniteTree cur = stage_branching(reg, v, e, s).explore(4, 4);
    for (const auto& n : prev.nodes()) EXPECT_TRUE(cur.contains(n));
    prev = cur;
  }
  LabeledTree t = stage_branching(reg, v, e, 9);
  // a childless fin node is not a leaf of the vein
  EXPECT_FALSE(t.at(NodePath()).genuine_leaf);
  EXPECT_TRUE(t.at(P({0, 4})).genuine_leaf);
}

/// Partial flow on V_{2,1} ^ V_{1,omega}: one rank-2 branch over a rank-1
/// infinite choice; the identity sits on all leaves.
Flow vstar_flow() {
  FlowRegistry reg;
  std::size_t e = reg.add(RegistryEntry{"vstar", lib::width_const(1), lib::p_const(true),
                                        lib::bit_at(0), lib::eta_none(),
                                        lib::leaf_identity()});
  Vein v = concat(Vein::basic(2, Mark::Fin), Vein::basic(1, Mark::Inf));
  Flow f = registry_flow(reg, v, e);
  f.outcome_bound = 128;
  return f;
}

TEST(WeakTotalize, DoublesStarBranches) {
  Flow tot = weak_totalize(vstar_flow());
  EXPECT_TRUE(tot.weakly_total);
  LabeledTree t = tot.tree(10);
  auto root = t.at(NodePath());
  EXPECT_EQ(root.rank, 2);
  EXPECT_EQ(root.width, 2u);  // doubled from width 1
  auto star = t.at(P({0}));
  EXPECT_TRUE(star.genuine_leaf);
  const LeafFn* fn = tot.leaf_fn(P({0}));
  ASSERT_NE(fn, nullptr);
  EXPECT_TRUE(fn->nowhere_defined);
  auto right = t.at(P({1}));
  EXPECT_EQ(right.rank, 1);
  EXPECT_TRUE(right.infinite());
}

TEST(WeakTotalize, InfRootGainsTwoBranchRoot) {
  LeafTable leaves;
  leaves.set_default(lib::leaf_identity());
  Flow base = make_static_flow("choice", Vein::basic(1, Mark::Inf), BranchingFunction{},
                               lib::p_const(true), lib::bit_at(0), lib::eta_none(),
                               leaves);
  base.outcome_bound = 64;
  Flow tot = weak_totalize(base);
  EXPECT_EQ(tot.vein, increment_fin(base.vein, 2));
  LabeledTree t = tot.tree(5);
  auto root = t.at(NodePath());
  EXPECT_EQ(root.rank, 2);
  EXPECT_EQ(root.width, 2u);
  EXPECT_TRUE(t.at(P({0})).genuine_leaf);
  EXPECT_TRUE(tot.leaf_fn(P({0}))->nowhere_defined);
  EXPECT_EQ(t.at(P({1})).rank, 1);

  // star leaf reached: the all-ones point misses every branch
  auto r = eval_flow(tot, StagePoint::ones(), 4, 300);
  EXPECT_EQ(r.status, EvalStatus::Shortfall);
  EXPECT_TRUE(r.nowhere_defined_leaf);

  // generated function unchanged where defined
  for (const char* pt : {"0/0", "110/0", "11/01", "1110/10"}) {
    StagePoint x = StagePoint::parse(pt);
    auto a = eval_flow(base, x, 8, 400);
    auto b = eval_flow(tot, x, 8, 400);
    ASSERT_EQ(a.status, EvalStatus::Complete) << pt;
    ASSERT_EQ(b.status, EvalStatus::Complete) << pt;
    EXPECT_EQ(a.output, b.output) << pt;
  }
}

TEST(WeakTotalize, PreservesGeneratedFunction) {
  Flow base = vstar_flow();
  Flow tot = weak_totalize(base);
  for (const char* pt : {"0/0", "10/10", "011/01", "1101/0", "/100"}) {
    StagePoint x = StagePoint::parse(pt);
    auto a = eval_flow(base, x, 8, 600);
    auto b = eval_flow(tot, x, 8, 600);
    ASSERT_EQ(a.status, EvalStatus::Complete) << pt;
    ASSERT_EQ(b.status, EvalStatus::Complete) << pt;
    EXPECT_EQ(a.output, b.output) << pt;
  }
}

TEST(WeakTotalize, SemanticOracleAgreesOnTotalizedFlow) {
  Flow tot = weak_totalize(vstar_flow());
  for (const char* pt : {"0/0", "10/10", "011/01", "/1"}) {
    StagePoint x = StagePoint::parse(pt);
    auto staged = true_path(tot, x, 600);
    auto sem = semantic_true_path(tot, x);
    ASSERT_TRUE(staged.certified()) << pt;
    EXPECT_EQ(staged.path, sem.path) << pt;
  }
}

TEST(NormalizeFlow, ClopenSplitBecomesDispatchingLeaf) {
  Vein v01 = Vein::basic(0, Mark::Fin);
  BranchingFunction b;
  b.assign[NodePath()] = 2;
  LeafTable leaves;
  leaves.set(P({0}), lib::leaf_zeros());
  leaves.set(P({1}), lib::leaf_ones());
  Flow base = make_static_flow("split", v01, b, lib::p_const(true), lib::p_const(true),
                               lib::eta_list({B("0"), Bits()}), leaves);
  Vein vn = normalize(v01);
  EXPECT_EQ(vn, Vein::leaf());
  Flow merged = normalize_flow(base, vn);
  EXPECT_TRUE(merged.tree(0).at(NodePath()).genuine_leaf);

  for (const char* pt : {"0/0", "1/1", "01/10", "10/0"}) {
    StagePoint x = StagePoint::parse(pt);
    auto a = eval_flow(base, x, 8, 100);
    auto b2 = eval_flow(merged, x, 8, 100);
    ASSERT_EQ(a.status, EvalStatus::Complete) << pt;
    ASSERT_EQ(b2.status, EvalStatus::Complete) << pt;
    EXPECT_EQ(a.output, b2.output) << pt;
  }
}

TEST(NormalizeFlow, NormalVeinUntouched) {
  LeafTable leaves;
  leaves.set_default(lib::leaf_identity());
  Flow base = make_static_flow("choice", Vein::basic(1, Mark::Inf), BranchingFunction{},
                               lib::p_const(true), lib::bit_at(0), lib::eta_none(),
                               leaves);
  Flow same = normalize_flow(base, base.vein);
  EXPECT_EQ(same.name, base.name);
}

TEST(NormalizeFlow, AgreesOnProbeBattery) {
  // rank-0 dispatch over two different downstream questions
  Vein v = concat(Vein::basic(0, Mark::Fin), Vein::basic(2, Mark::Fin));
  BranchingFunction b;
  b.assign[NodePath()] = 2;
  b.assign[P({0})] = 2;
  LeafTable leaves;
  leaves.set(P({0, 0}), lib::leaf_flip());
  leaves.set(P({0, 1}), lib::leaf_zeros());
  leaves.set(P({1, 0}), lib::leaf_identity());
  leaves.set(P({1, 1}), lib::leaf_ones());
  Flow base = make_static_flow("dispatch", v, b, lib::dir(), lib::p_const(true),
                               lib::eta_list({B("1"), Bits()}), leaves);
  Flow merged = normalize_flow(base, normalize(v));

  std::mt19937 rng(0x5eed);
  for (int i = 0; i < 32; ++i) {
    std::size_t plen = rng() % 4, qlen = 1 + rng() % 3;
    Bits pre, per;
    for (std::size_t k = 0; k < plen; ++k) pre.push_back(rng() % 2);
    for (std::size_t k = 0; k < qlen; ++k) per.push_back(rng() % 2);
    StagePoint x = StagePoint::eventually_periodic(pre, per);
    auto a = eval_flow(base, x, 16, 400);
    auto b2 = eval_flow(merged, x, 16, 400);
    ASSERT_EQ(a.status, b2.status) << x.str();
    if (a.status == EvalStatus::Complete) EXPECT_EQ(a.output, b2.output) << x.str();
  }
}

TEST(Pairing, RoundTrip) {
  for (std::uint64_t a = 0; a < 12; ++a)
    for (std::uint64_t b = 0; b < 12; ++b) {
      auto [x, y] = unpair_code(pair_code(a, b));
      EXPECT_EQ(x, a);
      EXPECT_EQ(y, b);
    }
}

}  // namespace
