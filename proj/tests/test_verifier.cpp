#include <gtest/gtest.h>

#include "veinlab/presets.hpp"

using namespace veinlab;

namespace {

Bits B(const char* s) { return Bits::from_string(s); }

ConstructionTrace finite_trace(Vein vein, Triple t, Stage stages = 400) {
  ConstructionConfig cfg;
  cfg.S = BitTreePredicate::no11();
  cfg.U = presets::finite_opponent(12);
  cfg.registry = presets::scenario_registry();
  cfg.vein = std::move(vein);
  cfg.triples = {t};
  cfg.stages = stages;
  cfg.depth = 64;
  return run_construction(std::move(cfg));
}

TEST(Verifier, SourceSideIsIdentity) {
  auto trace = finite_trace(Vein::basic(2, Mark::Fin), Triple{0, 2, 3});
  Flow vf = build_verifier(trace);
  for (const auto& y : presets::s_side_points()) {
    auto r = eval_flow(vf, y, 12, 200);
    ASSERT_EQ(r.status, EvalStatus::Complete) << y.str();
    EXPECT_EQ(r.output, y.prefix(12)) << y.str();
    EXPECT_EQ(r.tp.path, NodePath({0}));
  }
}

TEST(Verifier, DecodesGammaImages) {
  Triple t{0, 2, 3};
  auto trace = finite_trace(Vein::basic(2, Mark::Fin), t);
  Flow vf = build_verifier(trace);
  for (const char* pt : {"0/0", "/01", "00/10"}) {
    StagePoint x = StagePoint::parse(pt);
    StagePoint y = trace.gamma_point(t, x);
    auto r = eval_flow(vf, y, 8, 320);
    ASSERT_EQ(r.status, EvalStatus::Complete) << pt;
    EXPECT_EQ(r.output, x.prefix(8)) << pt;
    // the claimed inverse agrees with the engine's own
    auto inv = trace.state->engine_for(t).gamma_inverse(y.prefix(40).span());
    ASSERT_TRUE(inv.has_value());
    EXPECT_TRUE(is_prefix(inv->take(8), x.prefix(8)));
  }
}

TEST(Verifier, DecoderNeverEmitsWrongBits) {
  Triple t{0, 2, 3};
  auto trace = finite_trace(Vein::basic(2, Mark::Fin), t);
  Flow vf = build_verifier(trace);
  StagePoint x = StagePoint::zeros();
  StagePoint y = trace.gamma_point(t, x);
  LabeledTree tree = vf.tree(0);
  NodePath at = NodePath({1, static_cast<Nat>(t.code())});
  ASSERT_TRUE(tree.contains(at));
  EXPECT_EQ(tree.at(at).rank, 1);
  // a decoder with an absurd (s, n) guess stalls instead of lying
  NodePath wrong = at.child(static_cast<Nat>(pair_code(0, 999)));
  const LeafFn* fn = vf.leaf_fn(wrong);
  ASSERT_NE(fn, nullptr);
  Bits out = fn->transform(y.prefix(120), 120);
  EXPECT_TRUE(is_prefix(out, x.prefix(out.size())));
  EXPECT_TRUE(out.empty());
}

TEST(Verifier, TreeEmbedsIntoPrimeBranching) {
  Triple t{0, 2, 3};
  auto trace = finite_trace(Vein::basic(2, Mark::Fin), t);
  Flow vf = build_verifier(trace);
  EXPECT_TRUE(embeds_into_branching(vf.tree(kSemanticStage),
                                    prime_literal(trace.config().vein), 5, 12));
}

TEST(Verifier, InfRootCase) {
  Triple t{1, 2, 3};
  auto trace = finite_trace(Vein::basic(1, Mark::Inf), t);
  Flow vf = build_verifier(trace);
  LabeledTree tree = vf.tree(0);
  EXPECT_EQ(tree.at(NodePath()).rank, 2);
  EXPECT_EQ(tree.at(NodePath({0})).rank, 1);
  EXPECT_TRUE(tree.at(NodePath({0, 0})).genuine_leaf);
  EXPECT_EQ(tree.at(NodePath({0, 1})).rank, 0);
  EXPECT_TRUE(tree.at(NodePath({1})).infinite());
  EXPECT_TRUE(embeds_into_branching(vf.tree(kSemanticStage),
                                    prime_literal(trace.config().vein), 5, 12));

  for (const auto& y : presets::s_side_points()) {
    auto r = eval_flow(vf, y, 10, 260);
    ASSERT_EQ(r.status, EvalStatus::Complete) << y.str();
    EXPECT_EQ(r.output, y.prefix(10)) << y.str();
  }

  StagePoint x = StagePoint::parse("/01");
  StagePoint y = trace.gamma_point(t, x);
  auto r = eval_flow(vf, y, 6, 320);
  ASSERT_EQ(r.status, EvalStatus::Complete);
  EXPECT_EQ(r.output, x.prefix(6));
}

TEST(Verifier, RoundTripAcrossScenarioPoints) {
  Triple t{0, 2, 3};
  auto trace = finite_trace(Vein::basic(2, Mark::Fin), t);
  Flow vf = build_verifier(trace);
  for (const auto& x : presets::s_side_points()) {
    StagePoint y = trace.gamma_point(t, x);
    auto r = eval_flow(vf, y, 8, 320);
    ASSERT_EQ(r.status, EvalStatus::Complete) << x.str();
    EXPECT_EQ(r.output, x.prefix(8)) << x.str();
  }
}

}  // namespace
