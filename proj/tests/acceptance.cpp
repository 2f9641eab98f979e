// Acceptance suite: one test per criterion, each printing a PASS/FAIL line
// with its measured runtime.

#include <gtest/gtest.h>

#include <chrono>

#include "veinlab/formats.hpp"
#include "veinlab/presets.hpp"

using namespace veinlab;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, bool pass, double seconds, const std::string& detail) {
  printf("[CRITERION %d] %s (%.2fs) %s\n", criterion, pass ? "PASS" : "FAIL", seconds,
         detail.c_str());
  fflush(stdout);
}

Vein chain(std::initializer_list<Vein> parts) {
  auto it = parts.begin();
  Vein out = *it++;
  for (; it != parts.end(); ++it) out = concat(out, *it);
  return out;
}

/// Eventually periodic probes whose period contains a zero, so that every
/// infinite bit-search in the corpus terminates.
std::vector<StagePoint> grounded_probes(std::size_t count, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<StagePoint> out;
  while (out.size() < count) {
    std::size_t plen = rng() % 5, qlen = 1 + rng() % 4;
    Bits pre, per;
    for (std::size_t k = 0; k < plen; ++k) pre.push_back(rng() % 2);
    bool zero = false;
    for (std::size_t k = 0; k < qlen; ++k) {
      int b = rng() % 2;
      if (k + 1 == qlen && !zero && b == 1) b = 0;
      if (b == 0) zero = true;
      per.push_back(b);
    }
    out.push_back(StagePoint::eventually_periodic(pre, per));
  }
  return out;
}

TEST(Acceptance, Criterion1_VeinIdentities) {
  Stopwatch sw;
  Vein V21 = Vein::basic(2, Mark::Fin), V1w = Vein::basic(1, Mark::Inf);
  Vein V11 = Vein::basic(1, Mark::Fin), V0w = Vein::basic(0, Mark::Inf);
  bool ok = true;
  ok &= normalize(double_prime(V21)) == V1w;
  ok &= normalize(double_prime(chain({V1w, V21}))) == chain({V21, V1w});
  ok &= normalize(double_prime(chain({V21, V1w, V21}))) == chain({V11, V0w, V21, V1w});
  for (Nat n = 0; n <= 3 && ok; ++n) {
    ok &= normalize(double_prime(preset_chain(ChainKind::XY, n))) ==
          preset_chain(ChainKind::YX, n);
    Vein lhs = concat(preset_chain(ChainKind::YX, n), V21);
    Vein rhs = concat(chain({V11, V0w}), preset_chain(ChainKind::YX, n));
    ok &= normalize(double_prime(lhs)) == rhs;
  }
  double t = sw.seconds();
  report(1, ok && t < 1.0, t, "five identities plus chain patterns, structural equality");
  EXPECT_TRUE(ok);
  EXPECT_LT(t, 1.0);
}

TEST(Acceptance, Criterion2_LiminfLaw) {
  Stopwatch sw;
  auto corpus = presets::liminf_corpus();
  ASSERT_GE(corpus.size(), 20u);
  auto probes = grounded_probes(50, 0x11FF);
  const Stage budget = 10000;
  std::size_t total = 0, certified = 0, matched = 0;
  std::string first_bad;
  for (const auto& flow : corpus) {
    for (const auto& x : probes) {
      ++total;
      auto staged = true_path(flow, x, budget);
      if (!staged.certified()) continue;
      ++certified;
      auto sem = semantic_true_path(flow, x);
      if (staged.path == sem.path) {
        ++matched;
      } else if (first_bad.empty()) {
        first_bad = flow.name + " on " + x.str() + ": staged " + staged.path.str() +
                    " vs semantic " + sem.path.str();
      }
    }
  }
  double rate = static_cast<double>(certified) / static_cast<double>(total);
  bool ok = matched == certified && rate >= 0.95;
  double t = sw.seconds();
  report(2, ok && t < 30.0, t,
         std::to_string(corpus.size()) + " flows x " + std::to_string(probes.size()) +
             " probes; certified " + std::to_string(certified) + "/" +
             std::to_string(total) + ", all matches" +
             (first_bad.empty() ? "" : "; first mismatch: " + first_bad));
  EXPECT_EQ(matched, certified) << first_bad;
  EXPECT_GE(rate, 0.95);
  EXPECT_LT(t, 30.0);
}

TEST(Acceptance, Criterion3_WeakTotalizationEquivalence) {
  Stopwatch sw;
  std::vector<Flow> flows = {presets::dir_flow(), presets::choice_flow(30000),
                             presets::split_choice_flow(), presets::dispatch_flow(),
                             presets::partial_dispatch_flow(),
                             presets::pattern_flow(Bits::from_string("1"), 0),
                             presets::pattern_flow(Bits::from_string("01"), 1)};
  auto probes = grounded_probes(80, 0x7071);
  std::size_t checked = 0, equal = 0;
  std::string first_bad;
  std::mt19937 pick(0x5151);
  while (checked < 200) {
    const Flow& base = flows[pick() % flows.size()];
    const StagePoint& x = probes[pick() % probes.size()];
    Flow tot = weak_totalize(base);
    auto a = eval_flow(base, x, 16, 700);
    auto b = eval_flow(tot, x, 16, 700);
    if (a.status != EvalStatus::Complete || b.status != EvalStatus::Complete) continue;
    ++checked;
    if (a.output == b.output) {
      ++equal;
    } else if (first_bad.empty()) {
      first_bad = base.name + " on " + x.str();
    }
  }
  bool ok = equal == checked;
  double t = sw.seconds();
  report(3, ok && t < 30.0, t,
         "200 probes with both sides defined, 16 bits each" +
             (first_bad.empty() ? std::string() : "; first mismatch: " + first_bad));
  EXPECT_EQ(equal, checked) << first_bad;
  EXPECT_LT(t, 30.0);
}

// Shared scenario runs: criterion 4 checks the invariants, criteria 5-7 look
// at the regimes, the verifier, and the checkers on the same traces.
struct ScenarioRun {
  presets::Scenario scenario;
  ConstructionTrace trace;
  bool stabilized = false;  // the opponent view stopped feeding the ledger
};

std::vector<ScenarioRun>& scenario_runs() {
  static std::vector<ScenarioRun> runs = [] {
    std::vector<ScenarioRun> out;
    for (auto& sc : presets::construction_scenarios(5000, 64)) {
      ScenarioRun run{sc, run_construction(sc.config), false};
      Stage last_event = 0;
      for (const auto& ev : run.trace.state->events())
        last_event = std::max(last_event, ev.stage);
      // adversarial runs only quiesce because the window is exhausted; their
      // images are not limit-stable
      run.stabilized =
          !sc.adversarial && !run.trace.state->events().empty() && last_event < 2500;
      out.push_back(std::move(run));
    }
    return out;
  }();
  return runs;
}

TEST(Acceptance, Criterion4_ConstructionInvariants) {
  Stopwatch sw;
  auto& runs = scenario_runs();
  ASSERT_GE(runs.size(), 10u);
  std::size_t violations = 0;
  std::string detail;

  for (auto& run : runs) {
    const auto& trace = run.trace;
    BitsTree s_tree = trace.config().S.materialize(5);
    for (std::size_t k = 0; k < trace.state->triple_count(); ++k) {
      const auto& eng = trace.state->engine(k);
      // monomorphism at the final stage
      for (const auto& a : s_tree.nodes()) {
        for (const auto& b : s_tree.nodes()) {
          Bits ga = eng.gamma(a), gb = eng.gamma(b);
          if (is_prefix(a, b) != is_prefix(ga, gb)) ++violations;
          if (!comparable(a, b) && comparable(ga, gb)) ++violations;
        }
        if (!is_prefix(eng.rho(), eng.gamma(a))) ++violations;
      }
    }
    // rho images of distinct triples are incomparable
    for (std::size_t k = 0; k < trace.state->triple_count(); ++k)
      for (std::size_t l = k + 1; l < trace.state->triple_count(); ++l)
        if (comparable(trace.state->engine(k).rho(), trace.state->engine(l).rho()))
          ++violations;

    // stagewise checks at every event stage plus a sparse grid
    std::set<Stage> stages{0, 1, trace.stages / 2, trace.stages - 1};
    for (const auto& ev : trace.state->events()) {
      stages.insert(ev.stage);
      stages.insert(ev.stage + 1);
    }
    for (std::size_t k = 0; k < trace.state->triple_count(); ++k) {
      const Triple t = trace.state->engine(k).triple();
      Bits prev_base;
      bool have_prev = false;
      for (Stage s : stages) {
        if (s >= trace.stages) continue;
        auto patch = trace.gamma_at(t, s);
        const Bits& base = patch.at(Bits());
        if (have_prev && !is_prefix(prev_base, base)) ++violations;  // T shrinks only
        prev_base = base;
        have_prev = true;
        // non-injury monotonicity into the next stage
        auto next = trace.gamma_at(t, s + 1);
        Bits acted;
        bool any = false;
        for (const auto& ev : trace.state->events())
          if (ev.stage == s && ev.triple == t && ev.kind == TraceEvent::Kind::Attention) {
            acted = ev.alpha;
            any = true;
          }
        for (const auto& b : s_tree.nodes()) {
          if (any && is_proper_prefix(acted, b)) continue;
          if (!is_prefix(ConstructionTrace::complete(patch, b),
                         ConstructionTrace::complete(next, b)))
            ++violations;
        }
      }
    }
    // S ⊆ T and comb closure on the final state
    for (const auto& n : s_tree.nodes())
      if (!trace.state->in_T(n)) ++violations;
    for (std::size_t k = 0; k < trace.state->triple_count(); ++k) {
      const Bits& base = trace.state->engine(k).patches().at(Bits());
      for (const char* tail : {"", "0", "10", "111", "0101"})
        if (!trace.state->in_T(base.concat(Bits::from_string(tail)).take(
                base.size() + std::string(tail).size())))
          ++violations;
    }
  }

  // bit-identical reproducibility
  for (auto& run : runs) {
    auto rerun = run_construction(run.scenario.config);
    const auto& e1 = run.trace.state->events();
    const auto& e2 = rerun.state->events();
    if (e1.size() != e2.size()) {
      ++violations;
      continue;
    }
    for (std::size_t i = 0; i < e1.size(); ++i) {
      if (!(e1[i].stage == e2[i].stage && e1[i].kind == e2[i].kind &&
            e1[i].sigma == e2[i].sigma && e1[i].alpha == e2[i].alpha &&
            e1[i].xi == e2[i].xi && e1[i].flen == e2[i].flen))
        ++violations;
    }
    for (std::size_t k = 0; k < run.trace.state->triple_count(); ++k)
      if (!(run.trace.state->engine(k).patches() == rerun.state->engine(k).patches()))
        ++violations;
  }

  bool ok = violations == 0;
  double t = sw.seconds();
  report(4, ok && t < 120.0, t,
         std::to_string(runs.size()) + " scenarios, 5000 stages at depth 64, " +
             std::to_string(violations) + " violations");
  EXPECT_EQ(violations, 0u);
  EXPECT_LT(t, 120.0);
}

TEST(Acceptance, Criterion5_RequirementRegimes) {
  Stopwatch sw;
  auto& runs = scenario_runs();
  bool ok = true;
  std::string detail;

  int finite_checked = 0, adversarial_checked = 0;
  for (auto& run : runs) {
    if (run.scenario.adversarial) {
      const auto& eng = run.trace.state->engine_for(run.scenario.monitored);
      std::size_t len = eng.patches().at(Bits()).size();
      if (len <= 50) {
        ok = false;
        detail += run.scenario.name + ": image length " + std::to_string(len) + "; ";
      }
      ++adversarial_checked;
      continue;
    }
    // finite regime: attention counts stabilize (no events in the closing half)
    Stage last_event = 0;
    for (const auto& ev : run.trace.state->events())
      last_event = std::max(last_event, ev.stage);
    if (last_event >= 2500) {
      ok = false;
      detail += run.scenario.name + ": events as late as " + std::to_string(last_event) + "; ";
    }
    ++finite_checked;
    // escaped verdicts on stabilized samples
    for (const auto& x : presets::s_side_points()) {
      if (!run.trace.config().S.member(x.prefix(8))) continue;
      auto v = check_requirement_N(run.trace, run.scenario.monitored, x, 24, 800);
      if (v != RequirementVerdict::Escaped) {
        ok = false;
        detail += run.scenario.name + " on " + x.str() + ": " + verdict_name(v) + "; ";
      }
    }
  }
  double t = sw.seconds();
  report(5, ok && t < 60.0, t,
         std::to_string(finite_checked) + " finite-regime and " +
             std::to_string(adversarial_checked) + " adversarial scenarios; " +
             (detail.empty() ? "both regimes as stated" : detail));
  EXPECT_TRUE(ok) << detail;
  EXPECT_LT(t, 60.0);
}

TEST(Acceptance, Criterion6_VerifierRoundTrip) {
  Stopwatch sw;
  auto& runs = scenario_runs();
  bool ok = true;
  std::string detail;
  int images_checked = 0, source_checked = 0, embeds = 0;

  for (auto& run : runs) {
    Flow vf = build_verifier(run.trace);
    if (!embeds_into_branching(vf.tree(kSemanticStage),
                               prime_literal(run.trace.config().vein), 5, 10)) {
      ok = false;
      detail += run.scenario.name + ": embed failed; ";
    } else {
      ++embeds;
    }
    Stage budget = 1200;
    for (const auto& x : presets::s_side_points()) {
      if (!run.trace.config().S.member(x.prefix(16))) continue;
      auto rs = eval_flow(vf, x, 16, budget);
      ++source_checked;
      if (rs.status != EvalStatus::Complete || rs.output != x.prefix(16)) {
        ok = false;
        detail += run.scenario.name + " source " + x.str() + "; ";
      }
      if (!run.stabilized) continue;
      for (const auto& tr : run.trace.config().triples) {
        if (run.trace.last_change(tr, x.prefix(16)) >= 2500) continue;
        StagePoint y = run.trace.gamma_point(tr, x);
        auto r = eval_flow(vf, y, 16, budget);
        ++images_checked;
        bool good = r.status == EvalStatus::Complete && r.output == x.prefix(16);
        if (good) {
          auto inv = run.trace.state->engine_for(tr).gamma_inverse(y.prefix(64).span());
          good = inv.has_value() && inv->take(16) == r.output.take(inv->size());
          good = good && is_prefix(r.output.take(std::min<std::size_t>(16, inv->size())),
                                   *inv);
        }
        if (!good) {
          ok = false;
          detail += run.scenario.name + " image " + x.str() + "; ";
        }
      }
    }
  }
  double t = sw.seconds();
  report(6, ok && t < 60.0, t,
         std::to_string(images_checked) + " image round-trips, " +
             std::to_string(source_checked) + " source identities, " +
             std::to_string(embeds) + " embeddings" +
             (detail.empty() ? "" : "; " + detail));
  EXPECT_TRUE(ok) << detail;
  EXPECT_GT(images_checked, 0);
  EXPECT_LT(t, 60.0);
}

TEST(Acceptance, Criterion7_ReductionCheckers) {
  Stopwatch sw;
  auto& runs = scenario_runs();
  bool ok = true;
  std::string detail;

  // (1) identity witnesses T-to-S on the source side of a finished scenario
  const ScenarioRun* fin = nullptr;
  for (auto& run : runs)
    if (run.stabilized && run.trace.state->triple_count() == 1) {
      fin = &run;
      break;
    }
  ASSERT_NE(fin, nullptr);
  auto state = fin->trace.state;
  ApproxMultifunction T_family("T",
                               [state](BitSpan s, BitSpan) { return state->in_T(s); });
  auto S_family = ApproxMultifunction::constant(fin->trace.config().S);
  std::vector<ReductionSample> samples;
  for (const auto& y : presets::s_side_points())
    samples.push_back({StagePoint::zeros(), y});
  for (const auto& v :
       check_cowadge(T_family, S_family, evaluator_identity(), samples, 16, 64)) {
    if (v.verdict != Verdict::Consistent) {
      ok = false;
      detail += "identity witness not consistent; ";
    }
  }

  // (2) the verifier flow transports T-solutions back into S
  {
    Flow vf = build_verifier(fin->trace);
    Evaluator theta = evaluator_from_flow(vf);
    std::vector<ReductionSample> vsamples;
    for (const auto& x : presets::s_side_points()) {
      vsamples.push_back({x, x});
      for (const auto& tr : fin->trace.config().triples)
        vsamples.push_back({x, fin->trace.gamma_point(tr, x)});
    }
    for (const auto& v :
         check_cowadge(S_family, T_family, theta, vsamples, 12, 1200)) {
      if (v.verdict != Verdict::Consistent) {
        ok = false;
        detail += "verifier pipeline not consistent; ";
      }
    }
  }

  // (3) seeded refutation and timeout soundness
  {
    Evaluator bad = evaluator_from_leaf(lib::leaf_ones());
    auto verdicts = check_cowadge(ApproxMultifunction::constant(BitTreePredicate::no11()),
                                  ApproxMultifunction::full(), bad,
                                  {{StagePoint::zeros(), StagePoint::zeros()}}, 8, 64);
    if (verdicts[0].verdict != Verdict::Refuted || verdicts[0].refuted_at != 2) {
      ok = false;
      detail += "seeded refutation misclassified; ";
    }
    Evaluator slow{"slow", [](const StagePoint&, std::size_t, Stage) {
                     return EvalOutcome{Bits(), false, true};
                   }};
    auto timeouts = check_cowadge(ApproxMultifunction::constant(BitTreePredicate::no11()),
                                  ApproxMultifunction::full(), slow,
                                  {{StagePoint::zeros(), StagePoint::zeros()}}, 8, 2);
    if (timeouts[0].verdict != Verdict::Inconclusive) {
      ok = false;
      detail += "timeout blamed as refutation; ";
    }
  }

  double t = sw.seconds();
  report(7, ok && t < 30.0, t,
         detail.empty() ? "identity witness, verifier pipeline, seeded refutations"
                        : detail);
  EXPECT_TRUE(ok) << detail;
  EXPECT_LT(t, 30.0);
}

TEST(Acceptance, Criterion8_BruteForceOracle) {
  Stopwatch sw;
  std::vector<Flow> corpus;
  {
    // small finite-width flows, every question menu ends in a catch-all
    Vein v21 = Vein::basic(2, Mark::Fin);
    Vein v11 = Vein::basic(1, Mark::Fin);
    for (Nat w : {2, 3, 4}) {
      BranchingFunction b;
      b.assign[NodePath()] = w;
      LeafTable leaves;
      for (Nat i = 0; i < w; ++i)
        leaves.set(NodePath({i}), i % 2 ? lib::leaf_ones() : lib::leaf_zeros());
      corpus.push_back(make_static_flow(
          "small-dir" + std::to_string(w), v21, b,
          lib::ends_with({Bits::from_string("1"), Bits::from_string("0")}),
          lib::p_const(true), lib::eta_none(), leaves));
    }
    for (Nat w : {2, 3}) {
      Vein v = concat(v21, v11);
      BranchingFunction b;
      b.assign[NodePath()] = 2;
      b.assign[NodePath({0})] = w;
      LeafTable leaves;
      leaves.set_default(lib::leaf_identity());
      corpus.push_back(make_static_flow(
          "small-two" + std::to_string(w), v, b, lib::dir(),
          lib::cyl_list({Bits::from_string("0"), Bits::from_string("1"), Bits()}),
          lib::eta_none(), leaves));
    }
    {
      Vein v = concat(v11, v21);
      BranchingFunction b;
      b.assign[NodePath()] = 2;
      b.assign[NodePath({0})] = 3;  // room for the catch-all outcome
      LeafTable leaves;
      leaves.set_default(lib::leaf_flip());
      corpus.push_back(make_static_flow(
          "small-par", v, b,
          lib::ends_with({Bits::from_string("11"), Bits::from_string("00"), Bits()}),
          lib::cyl_list({Bits::from_string("1"), Bits()}), lib::eta_none(), leaves));
    }
    for (int k = 0; k < 4; ++k) {
      BranchingFunction b;
      b.assign[NodePath()] = 2;
      LeafTable leaves;
      leaves.set_default(lib::leaf_identity());
      corpus.push_back(make_static_flow(
          "small-pat" + std::to_string(k), v21, b,
          lib::ends_with({lib::nth_bit_string(3 + k), Bits()}), lib::p_const(true),
          lib::eta_none(), leaves));
    }
  }
  auto probes = presets::probe_points(50, 0x8A8A, 4, 4);
  std::size_t total = 0, good = 0;
  std::string first_bad;
  for (const auto& flow : corpus) {
    for (const auto& x : probes) {
      if (total >= 500) break;
      ++total;
      auto staged = true_path(flow, x, 2000);
      auto oracle = exhaustive_true_path(flow, x);
      if (staged.certified() && oracle.has_value() && staged.path == *oracle) {
        ++good;
      } else if (first_bad.empty()) {
        first_bad = flow.name + " on " + x.str();
      }
    }
  }
  while (total < 500) {
    // recycle the corpus against fresh probe batches until 500 probes ran
    auto more = presets::probe_points(50, 0x8A8B + static_cast<std::uint32_t>(total), 4, 4);
    for (const auto& x : more) {
      if (total >= 500) break;
      const Flow& flow = corpus[total % corpus.size()];
      ++total;
      auto staged = true_path(flow, x, 2000);
      auto oracle = exhaustive_true_path(flow, x);
      if (staged.certified() && oracle.has_value() && staged.path == *oracle) ++good;
      else if (first_bad.empty()) first_bad = flow.name + " on " + x.str();
    }
  }
  bool ok = good == total && total >= 500;
  double t = sw.seconds();
  report(8, ok && t < 30.0, t,
         std::to_string(good) + "/" + std::to_string(total) +
             " probes agree with the exhaustive oracle" +
             (first_bad.empty() ? "" : "; first mismatch: " + first_bad));
  EXPECT_EQ(good, total) << first_bad;
  EXPECT_LT(t, 30.0);
}

}  // namespace
