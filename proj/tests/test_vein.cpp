#include <gtest/gtest.h>

#include "veinlab/vein.hpp"

using namespace veinlab;

namespace {

Vein V21() { return Vein::basic(2, Mark::Fin); }
Vein V11() { return Vein::basic(1, Mark::Fin); }
Vein V01() { return Vein::basic(0, Mark::Fin); }
Vein V1w() { return Vein::basic(1, Mark::Inf); }
Vein V0w() { return Vein::basic(0, Mark::Inf); }

Vein chain(std::initializer_list<Vein> parts) {
  auto it = parts.begin();
  Vein out = *it++;
  for (; it != parts.end(); ++it) out = concat(out, *it);
  return out;
}

TEST(VeinText, ParsePrintRoundTrip) {
  EXPECT_EQ(V21().print(), "(r2 fin (r0 leaf))");
  EXPECT_EQ(V1w().print(), "(r1 inf (r0 leaf))");
  for (const auto& v : {V21(), V1w(), chain({V21(), V1w(), V21()}),
                        preset_chain(ChainKind::XY, 2)}) {
    EXPECT_EQ(Vein::parse(v.print()), v);
  }
}

TEST(VeinText, ParseErrorsCarryPosition) {
  try {
    Vein::parse("(r2 fin\n  (r0 leaf (r0 leaf)))");
    FAIL() << "expected parse error";
  } catch (const VeinParseError& e) {
    EXPECT_EQ(e.line, 2);
  }
  EXPECT_THROW(Vein::parse("(r3 leaf)"), VeinParseError);
  EXPECT_THROW(Vein::parse("(r2 inf (r0 leaf))"), VeinParseError);  // inf rank cap
  EXPECT_THROW(Vein::parse("(r1 fin)"), VeinParseError);
}

TEST(Concat, PaperIncrementIdentity) {
  // (V_{1,omega})^{+1} = V_{1,1} ^ V_{1,omega}
  Vein got = concat(V11(), V1w());
  EXPECT_EQ(got, increment_fin(V1w(), 1));
  EXPECT_EQ(got.print(), "(r1 fin (r1 inf (r0 leaf)))");
}

TEST(Concat, LeafIsRightIdentity) {
  for (const auto& v : {V21(), V1w(), chain({V1w(), V21()})})
    EXPECT_EQ(concat(v, Vein::leaf()), v);
}

TEST(Concat, AssociativeOnSample) {
  Vein a = V1w(), b = V21(), c = V1w();
  EXPECT_EQ(concat(concat(a, b), c), concat(a, concat(b, c)));
}

TEST(TransitiveClosure, Examples) {
  EXPECT_EQ(transitive_closure(V11(), 1), V11());
  EXPECT_EQ(transitive_closure(V11(), 2), concat(V11(), V11()));
  EXPECT_EQ(transitive_closure(V11(), 2).node_count(), 3u);
  EXPECT_THROW(transitive_closure(V11(), 0), std::invalid_argument);
}

TEST(TransitiveClosure, NodeCountRecurrence) {
  // two-leaf-ish vein: with schematic storage each concat substitutes the
  // single stored leaf, so counts follow n(k+1) = n(k) + (n(1) - 1)
  Vein v = chain({V21(), V1w()});
  std::size_t base = v.node_count();
  std::size_t expect = base;
  for (Nat k = 2; k <= 4; ++k) {
    expect += base - 1;
    EXPECT_EQ(transitive_closure(v, k).node_count(), expect);
  }
}

TEST(Closure, Examples) {
  EXPECT_EQ(closure(V1w()), V1w());
  EXPECT_EQ(closure(chain({V21(), V1w()})), chain({V0w(), V21(), V1w()}));
  EXPECT_EQ(closure(Vein::leaf()), Vein::leaf());
}

TEST(Normality, Examples) {
  EXPECT_TRUE(is_normal(V1w()));
  EXPECT_TRUE(is_strongly_normal(V1w()));
  EXPECT_FALSE(is_normal(V01()));
  EXPECT_TRUE(is_strongly_normal(chain({V21(), V1w()})));
  // rank repeats with fin-to-inf widening: normal but not strongly normal
  EXPECT_TRUE(is_normal(concat(V11(), V1w())));
  EXPECT_FALSE(is_strongly_normal(concat(V11(), V1w())));
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize(chain({V01(), V1w()})), V1w());
  for (const auto& v : {V1w(), chain({V21(), V1w()}), preset_chain(ChainKind::YX, 1)})
    EXPECT_EQ(normalize(v), v) << v.print();
  EXPECT_EQ(normalize(chain({V11(), V11()})), V11());
}

TEST(Normalize, IdempotentAndNormal) {
  std::vector<Vein> samples = {
      V21(), V1w(), V01(), chain({V01(), V1w()}), chain({V11(), V11()}),
      chain({V1w(), V1w()}), chain({V21(), V21(), V1w()}),
      concat(V11(), V1w()), preset_chain(ChainKind::XY, 2)};
  for (const auto& v : samples) {
    Vein n = normalize(v);
    EXPECT_TRUE(is_normal(n)) << v.print() << " -> " << n.print();
    EXPECT_EQ(normalize(n), n);
  }
}

TEST(Increments, Examples) {
  EXPECT_EQ(increment_fin(V1w(), 2), chain({V21(), V1w()}));
  EXPECT_EQ(increment_inf(V11(), 0), chain({V0w(), V11()}));
  EXPECT_EQ(increment_fin(V1w(), 1).node_count(), V1w().node_count() + 1);
  EXPECT_THROW(increment_inf(V11(), 2), std::invalid_argument);
}

TEST(Replacement, Examples) {
  EXPECT_EQ(replacement(V21(), 1), V1w());
  EXPECT_EQ(replacement(chain({V21(), V1w(), V21()}), 1), chain({V21(), V1w()}));
  EXPECT_EQ(replacement(V1w(), 1), V1w());
}

TEST(Prime, RootCases) {
  // fin root: one-replacement, then infinite 0-increment, then finite 1-increment
  Vein p = prime(V21());
  EXPECT_EQ(p, chain({V11(), V0w(), V1w()}));
  // inf root of rank 1: one-replacement then finite 2-increment
  EXPECT_EQ(prime(V1w()), chain({V21(), V1w()}));
  EXPECT_THROW(prime(concat(V11(), V1w())), std::invalid_argument);
  EXPECT_THROW(prime(Vein::leaf()), std::invalid_argument);
}

TEST(DoublePrime, PaperIdentities) {
  EXPECT_EQ(normalize(double_prime(V21())), V1w());
  EXPECT_EQ(normalize(double_prime(chain({V1w(), V21()}))), chain({V21(), V1w()}));
  EXPECT_EQ(normalize(double_prime(chain({V21(), V1w(), V21()}))),
            chain({V11(), V0w(), V21(), V1w()}));
}

TEST(DoublePrime, ChainPatterns) {
  for (Nat n = 0; n <= 3; ++n) {
    EXPECT_EQ(normalize(double_prime(preset_chain(ChainKind::XY, n))),
              preset_chain(ChainKind::YX, n))
        << "n=" << n;
    // Y0 X0 ... Yn Xn Y(n+1)  ->  V11 V0w Y0 X0 ... Yn Xn
    Vein lhs = concat(preset_chain(ChainKind::YX, n), Vein::basic(2, Mark::Fin));
    Vein rhs = chain({V11(), V0w()});
    rhs = concat(rhs, preset_chain(ChainKind::YX, n));
    EXPECT_EQ(normalize(double_prime(lhs)), rhs) << "n=" << n;
  }
}

TEST(PresetChain, Examples) {
  EXPECT_EQ(preset_chain(ChainKind::XY, 0), chain({V1w(), V21()}));
  EXPECT_EQ(preset_chain(ChainKind::YX, 0), chain({V21(), V1w()}));
  // node count by the substitution recurrence
  std::size_t expect = preset_chain(ChainKind::XY, 0).node_count();
  for (Nat n = 1; n <= 3; ++n) {
    expect += chain({V1w(), V21()}).node_count() - 1;
    EXPECT_EQ(preset_chain(ChainKind::XY, n).node_count(), expect);
  }
}

}  // namespace
