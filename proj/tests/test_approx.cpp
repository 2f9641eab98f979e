#include <gtest/gtest.h>

#include "veinlab/approx.hpp"

using namespace veinlab;

namespace {

Bits B(const char* s) { return Bits::from_string(s); }

TEST(ApproxMultifunction, ThreeLaws) {
  auto fam = ApproxMultifunction::flipped_diagonal();
  StagePoint z = StagePoint::parse("10/10");
  Bits t4 = z.prefix(4), t6 = z.prefix(6);
  BitsTree u4 = fam.at_prefix(t4), u6 = fam.at_prefix(t6);
  // height bounded by the knowledge prefix
  EXPECT_LE(u4.height(), 4u);
  // additions are longer than the old knowledge
  for (const auto& n : u6.nodes())
    if (!u4.contains(n)) EXPECT_GT(n.size(), 4u);
  // fiber = union along the point
  EXPECT_TRUE(fam.fiber_contains(B("0101"), z));
  EXPECT_FALSE(fam.fiber_contains(B("1"), z));
}

TEST(ApproxMultifunction, ConstantFamilyFibers) {
  auto fam = ApproxMultifunction::constant(BitTreePredicate::no11());
  EXPECT_TRUE(fam.fiber_contains(B("0101"), StagePoint::zeros()));
  EXPECT_FALSE(fam.fiber_contains(B("011"), StagePoint::zeros()));
  BitsTree t = fam.at_prefix(B("000"));
  EXPECT_TRUE(t.contains(B("010")));
  EXPECT_FALSE(t.contains(B("110")));
  EXPECT_LE(t.height(), 3u);
}

TEST(BitTreePredicates, Materialize) {
  BitsTree t = BitTreePredicate::no11().materialize(3);
  EXPECT_TRUE(t.contains(B("101")));
  EXPECT_FALSE(t.contains(B("11")));
  BitsTree w = BitTreePredicate::without_cone(B("1")).materialize(2);
  EXPECT_TRUE(w.contains(B("00")));
  EXPECT_FALSE(w.contains(B("1")));
  EXPECT_FALSE(w.contains(B("10")));
}

}  // namespace
