// veinlab — vein calculus, staged flowchart evaluation, and the priority
// construction behind it, on the command line.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "veinlab/formats.hpp"
#include "veinlab/presets.hpp"

using namespace veinlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitRefuted = 2;
constexpr int kExitBudget = 3;

Stage default_budget() {
  if (const char* env = std::getenv("VEINLAB_BUDGET_DEFAULT")) {
    try {
      return std::stoull(env);
    } catch (...) {
    }
  }
  return 2000;
}

Vein load_vein_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vein file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Vein::parse(ss.str());
}

Vein apply_op_chain(Vein v, const std::string& chain, const std::optional<Vein>& rhs) {
  for (auto& raw : detail::split(chain, ';')) {
    std::string op = detail::trim(raw);
    if (op.empty()) continue;
    std::string arg;
    auto colon = op.find(':');
    if (colon != std::string::npos) {
      arg = op.substr(colon + 1);
      op = op.substr(0, colon);
    }
    if (op == "normalize") v = normalize(v);
    else if (op == "closure") v = closure(v);
    else if (op == "prime") v = prime(v);
    else if (op == "double-prime") v = double_prime(v);
    else if (op == "inc-fin") v = increment_fin(v, std::stoi(arg));
    else if (op == "inc-inf") v = increment_inf(v, std::stoi(arg));
    else if (op == "replace") v = replacement(v, std::stoi(arg));
    else if (op == "tc") v = transitive_closure(v, static_cast<Nat>(std::stoul(arg)));
    else if (op == "concat") {
      if (!rhs) throw std::runtime_error("concat needs --rhs");
      v = concat(v, *rhs);
    } else {
      throw std::runtime_error("unknown vein op \"" + op + "\"");
    }
  }
  return v;
}

std::vector<Triple> parse_triples(const std::string& spec) {
  std::vector<Triple> out;
  for (auto& part : detail::split(spec, ';')) {
    auto nums = detail::split(detail::trim(part), ',');
    if (nums.size() != 3) throw std::runtime_error("triples look like e,i,j;e,i,j");
    out.push_back(Triple{std::stoul(detail::trim(nums[0])),
                         std::stoul(detail::trim(nums[1])),
                         std::stoul(detail::trim(nums[2]))});
  }
  return out;
}

int run_tp_trace(const Flow& flow, const StagePoint& x, Stage stages) {
  TpThread t(flow);
  for (Stage s = 0; s <= stages; ++s) {
    if (s > 0) t.push_bit(x.bit_at(s - 1));
    nlohmann::json j;
    j["stage"] = s;
    j["sigma_len"] = t.sigma().size();
    j["tp"] = t.current().str();
    nlohmann::json eligible = nlohmann::json::array();
    for (std::size_t n = 0; n <= t.current().size(); ++n)
      eligible.push_back(t.current().take(n).str());
    j["eligible"] = eligible;
    nlohmann::json timers = nlohmann::json::object();
    nlohmann::json priors = nlohmann::json::object();
    for (const auto& [node, value] : t.timers()) {
      timers[node.str()] = value;
      priors[node.str()] = t.prior(node);
    }
    j["timers"] = timers;
    j["priors"] = priors;
    std::cout << j.dump() << "\n";
  }
  return t.hit_outcome_bound() ? kExitBudget : kExitOk;
}

ConstructionConfig build_construct_config(const std::string& s_tree,
                                          const std::string& u_family,
                                          const std::string& registry,
                                          const std::string& vein_text,
                                          const std::string& triples, Stage stages,
                                          std::size_t depth) {
  ConstructionConfig cfg;
  if (s_tree.rfind("builtin:", 0) == 0) {
    std::istringstream in("!" + s_tree.substr(8) + "\n");
    cfg.S = load_tree_predicate(in);
  } else {
    cfg.S = load_tree_predicate_file(s_tree);
  }
  cfg.U = load_family(u_family);
  cfg.registry = load_registry_file(registry);
  cfg.vein = vein_text.empty() ? Vein::basic(2, Mark::Fin) : Vein::parse(vein_text);
  cfg.triples = parse_triples(triples);
  cfg.stages = stages;
  cfg.depth = depth;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vein calculus and staged flowchart laboratory"};
  app.require_subcommand(1);

  // ---- vein ----------------------------------------------------------------
  auto* vein_cmd = app.add_subcommand("vein", "parse, print, and transform veins");
  vein_cmd->require_subcommand(1);
  std::string vein_in, vein_rhs, vein_chain, preset_kind = "XY";
  Nat preset_n = 0;
  std::size_t tree_depth = 4, tree_width = 4;

  auto* vein_print = vein_cmd->add_subcommand("print", "parse a vein file and reprint it");
  vein_print->add_option("--in", vein_in, "vein file")->required();

  auto* vein_norm = vein_cmd->add_subcommand("normalize", "normalize a vein");
  vein_norm->add_option("--in", vein_in, "vein file")->required();

  auto* vein_op = vein_cmd->add_subcommand("op", "apply a semicolon-separated op chain");
  vein_op->add_option("chain", vein_chain,
                      "ops: normalize, closure, prime, double-prime, inc-fin:R, "
                      "inc-inf:R, replace:R, tc:N, concat")
      ->required();
  vein_op->add_option("--in", vein_in, "vein file")->required();
  vein_op->add_option("--rhs", vein_rhs, "right-hand vein file for concat");

  auto* vein_preset = vein_cmd->add_subcommand("preset", "alternating preset chains");
  vein_preset->add_option("--kind", preset_kind, "XY or YX");
  vein_preset->add_option("--n", preset_n, "chain index");

  auto* vein_tree = vein_cmd->add_subcommand("tree-of", "explore T(V)");
  vein_tree->add_option("--in", vein_in, "vein file")->required();
  vein_tree->add_option("--depth", tree_depth, "exploration depth");
  vein_tree->add_option("--width", tree_width, "width cap for infinite nodes");

  // ---- flow ----------------------------------------------------------------
  auto* flow_cmd = app.add_subcommand("flow", "evaluate and transform flows");
  flow_cmd->require_subcommand(1);
  std::string flow_file, flow_point = "0/0", flow_out;
  std::size_t flow_bits = 8;
  Stage flow_stages = 0;

  auto* flow_eval_cmd = flow_cmd->add_subcommand("eval", "evaluate f_Lambda on a point");
  flow_eval_cmd->add_option("--flow", flow_file, "flow file")->required();
  flow_eval_cmd->add_option("--point", flow_point, "prefix/period bits");
  flow_eval_cmd->add_option("--bits", flow_bits, "output bits");
  flow_eval_cmd->add_option("--stages", flow_stages, "stage budget");

  auto* flow_trace_cmd = flow_cmd->add_subcommand("tp-trace", "staged true-path trace");
  flow_trace_cmd->add_option("--flow", flow_file, "flow file")->required();
  flow_trace_cmd->add_option("--point", flow_point, "prefix/period bits");
  flow_trace_cmd->add_option("--stages", flow_stages, "stage budget");

  auto* flow_tot_cmd = flow_cmd->add_subcommand("totalize", "weak-totalization");
  flow_tot_cmd->add_option("--in", flow_file, "flow file")->required();
  flow_tot_cmd->add_option("--out", flow_out, "output flow file")->required();

  // ---- construct -----------------------------------------------------------
  auto* con_cmd = app.add_subcommand("construct", "run the priority construction");
  std::string con_s, con_u = "builtin:full", con_reg, con_triples, con_trace,
              con_vein = "(r2 fin (r0 leaf))";
  Stage con_stages = 100;
  std::size_t con_depth = 64;
  con_cmd->add_option("--s-tree", con_s, "source tree file or builtin:NAME")->required();
  con_cmd->add_option("--u-family", con_u, "opponent family file or builtin:NAME");
  con_cmd->add_option("--registry", con_reg, "registry manifest")->required();
  con_cmd->add_option("--vein", con_vein, "base vein text");
  con_cmd->add_option("--triples", con_triples, "e,i,j;e,i,j;...")->required();
  con_cmd->add_option("--stages", con_stages, "stages to run");
  con_cmd->add_option("--depth", con_depth, "exploration depth");
  con_cmd->add_option("--trace", con_trace, "trace output file (jsonl)");

  // ---- verify ----------------------------------------------------------------
  auto* ver_cmd = app.add_subcommand("verify", "build the verifier and check round-trips");
  std::string ver_s, ver_u = "builtin:full", ver_reg, ver_triples, ver_samples,
              ver_vein = "(r2 fin (r0 leaf))";
  Stage ver_stages = 400;
  std::size_t ver_depth = 64, ver_bits = 8;
  ver_cmd->add_option("--s-tree", ver_s, "source tree file or builtin:NAME")->required();
  ver_cmd->add_option("--u-family", ver_u, "opponent family file or builtin:NAME");
  ver_cmd->add_option("--registry", ver_reg, "registry manifest")->required();
  ver_cmd->add_option("--vein", ver_vein, "base vein text");
  ver_cmd->add_option("--triples", ver_triples, "e,i,j;...")->required();
  ver_cmd->add_option("--stages", ver_stages, "stages to run");
  ver_cmd->add_option("--depth", ver_depth, "exploration depth");
  ver_cmd->add_option("--samples", ver_samples, "source points, e.g. \"0/0;/01\"");
  ver_cmd->add_option("--bits", ver_bits, "round-trip precision");

  // ---- check-reduction --------------------------------------------------------
  auto* chk_cmd = app.add_subcommand("check-reduction", "reduction-witness checking");
  std::string chk_kind = "cowadge", chk_f = "builtin:full", chk_g = "builtin:full",
              chk_theta = "id", chk_samples;
  std::size_t chk_precision = 8;
  Stage chk_budget = 0;
  chk_cmd->add_option("--kind", chk_kind, "cowadge or weihrauch");
  chk_cmd->add_option("--f", chk_f, "target family (file or builtin:NAME)");
  chk_cmd->add_option("--g", chk_g, "source family (file or builtin:NAME)");
  chk_cmd->add_option("--theta", chk_theta, "id, flow:FILE, or leaf:ATOM");
  chk_cmd->add_option("--samples", chk_samples, "x:y;x:y point pairs")->required();
  chk_cmd->add_option("--precision", chk_precision, "checked bits");
  chk_cmd->add_option("--budget", chk_budget, "stage budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (vein_print->parsed()) {
      std::cout << load_vein_file(vein_in).print() << "\n";
      return kExitOk;
    }
    if (vein_norm->parsed()) {
      std::cout << normalize(load_vein_file(vein_in)).print() << "\n";
      return kExitOk;
    }
    if (vein_op->parsed()) {
      std::optional<Vein> rhs;
      if (!vein_rhs.empty()) rhs = load_vein_file(vein_rhs);
      std::cout << apply_op_chain(load_vein_file(vein_in), vein_chain, rhs).print()
                << "\n";
      return kExitOk;
    }
    if (vein_preset->parsed()) {
      ChainKind kind = preset_kind == "YX" ? ChainKind::YX : ChainKind::XY;
      std::cout << preset_chain(kind, preset_n).print() << "\n";
      return kExitOk;
    }
    if (vein_tree->parsed()) {
      LabeledTree t = tree_of(load_vein_file(vein_in));
      FiniteTree explored = t.explore(tree_depth, tree_width);
      for (const auto& n : explored.nodes()) {
        auto info = t.at(n);
        std::cout << n.str() << " r" << info.rank << " "
                  << (info.genuine_leaf ? "leaf" : (info.infinite() ? "inf" : "fin"))
                  << "\n";
      }
      return kExitOk;
    }

    if (flow_eval_cmd->parsed() || flow_trace_cmd->parsed()) {
      Flow f = build_flow(load_flow_spec(flow_file));
      StagePoint x = StagePoint::parse(flow_point);
      Stage stages = flow_stages ? flow_stages : default_budget();
      if (flow_trace_cmd->parsed()) return run_tp_trace(f, x, stages);
      auto r = eval_flow(f, x, flow_bits, stages);
      switch (r.status) {
        case EvalStatus::Complete:
          std::cout << r.output.str() << "\n";
          return kExitOk;
        case EvalStatus::Shortfall:
          std::cout << r.output.str() << " (shortfall"
                    << (r.nowhere_defined_leaf ? ", nowhere-defined leaf" : "") << ")\n";
          return kExitBudget;
        case EvalStatus::UndefinedInterior:
          std::cout << "undefined (true path is not a leaf: " << r.tp.path.str() << ")\n";
          return kExitOk;
        case EvalStatus::BudgetExhausted:
          std::cout << "budget exhausted (no stabilization certificate)\n";
          return kExitBudget;
      }
    }
    if (flow_tot_cmd->parsed()) {
      FlowSpec spec = load_flow_spec(flow_file);
      spec.totalized = true;
      std::ofstream out(flow_out);
      if (!out) throw std::runtime_error("cannot write " + flow_out);
      out << spec.print();
      return kExitOk;
    }

    if (con_cmd->parsed()) {
      auto cfg = build_construct_config(con_s, con_u, con_reg, con_vein, con_triples,
                                        con_stages, con_depth);
      auto trace = run_construction(std::move(cfg));
      if (!con_trace.empty()) {
        std::ofstream out(con_trace);
        if (!out) throw std::runtime_error("cannot write " + con_trace);
        write_trace_jsonl(trace, out);
      } else {
        write_trace_jsonl(trace, std::cout);
      }
      for (std::size_t k = 0; k < trace.state->triple_count(); ++k) {
        const auto& eng = trace.state->engine(k);
        Nat total = 0;
        for (const auto& [xi, c] : eng.attention_counts()) total += c;
        std::cerr << "triple " << eng.triple().str() << ": rho=" << eng.rho().str()
                  << " image(<>)=" << eng.patches().at(Bits()).str()
                  << " receipts=" << total << "\n";
      }
      return kExitOk;
    }

    if (ver_cmd->parsed()) {
      auto cfg = build_construct_config(ver_s, ver_u, ver_reg, ver_vein, ver_triples,
                                        ver_stages, ver_depth);
      auto trace = run_construction(std::move(cfg));
      Flow vf = build_verifier(trace);
      bool ok = true;
      std::vector<StagePoint> samples;
      if (ver_samples.empty()) {
        samples = presets::s_side_points();
      } else {
        for (auto& part : detail::split(ver_samples, ';'))
          samples.push_back(StagePoint::parse(detail::trim(part)));
      }
      Stage budget = 40 * (ver_bits + 1) + 2 * ver_stages;
      for (const auto& x : samples) {
        if (!trace.config().S.member(x.prefix(ver_bits))) continue;
        auto rs = eval_flow(vf, x, ver_bits, budget);
        bool good_s = rs.status == EvalStatus::Complete && rs.output == x.prefix(ver_bits);
        std::cout << "source " << x.str() << ": " << (good_s ? "identity ok" : "MISMATCH")
                  << "\n";
        ok = ok && good_s;
        for (const auto& t : trace.config().triples) {
          StagePoint y = trace.gamma_point(t, x);
          auto r = eval_flow(vf, y, ver_bits, budget);
          bool good = r.status == EvalStatus::Complete && r.output == x.prefix(ver_bits);
          std::cout << "triple " << t.str() << " sample " << x.str() << ": "
                    << (good ? "round-trip ok" : "MISMATCH") << "\n";
          ok = ok && good;
        }
      }
      bool embedded = embeds_into_branching(vf.tree(kSemanticStage),
                                            prime_literal(trace.config().vein), 5, 10);
      std::cout << "tree embeds into prime branching: " << (embedded ? "yes" : "NO")
                << "\n";
      ok = ok && embedded;
      return ok ? kExitOk : kExitRefuted;
    }

    if (chk_cmd->parsed()) {
      auto F = load_family(chk_f);
      auto G = load_family(chk_g);
      Evaluator theta = evaluator_identity();
      if (chk_theta.rfind("flow:", 0) == 0)
        theta = evaluator_from_flow(build_flow(load_flow_spec(chk_theta.substr(5))));
      else if (chk_theta.rfind("leaf:", 0) == 0)
        theta = evaluator_from_leaf(parse_leaf_atom(chk_theta.substr(5)));
      else if (chk_theta != "id")
        throw std::runtime_error("theta must be id, flow:FILE, or leaf:ATOM");
      std::vector<ReductionSample> samples;
      for (auto& part : detail::split(chk_samples, ';')) {
        auto xy = detail::split(detail::trim(part), ':');
        if (xy.size() != 2) throw std::runtime_error("samples look like x:y;x:y");
        samples.push_back({StagePoint::parse(detail::trim(xy[0])),
                           StagePoint::parse(detail::trim(xy[1]))});
      }
      Stage budget = chk_budget ? chk_budget : default_budget();
      std::vector<SampleVerdict> verdicts;
      if (chk_kind == "cowadge") {
        verdicts = check_cowadge(F, G, theta, samples, chk_precision, budget);
      } else if (chk_kind == "weihrauch") {
        auto k = [&theta](const StagePoint&, const StagePoint& y, std::size_t bits,
                          Stage b) { return theta.run(y, bits, b); };
        verdicts =
            check_weihrauch(F, G, evaluator_identity(), k, samples, chk_precision, budget);
      } else {
        throw std::runtime_error("kind must be cowadge or weihrauch");
      }
      bool refuted = false, inconclusive = false;
      for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto& v = verdicts[i];
        std::cout << "sample " << i << ": " << verdict_name(v.verdict);
        if (v.verdict == Verdict::Refuted) std::cout << " at bit " << v.refuted_at;
        if (v.sample_invalid) std::cout << " (sample failed its certificate)";
        std::cout << "\n";
        refuted = refuted || v.verdict == Verdict::Refuted;
        inconclusive = inconclusive || v.verdict == Verdict::Inconclusive;
      }
      if (refuted) return kExitRefuted;
      if (inconclusive) return kExitBudget;
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
