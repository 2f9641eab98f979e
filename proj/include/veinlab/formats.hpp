#pragma once

#include <fstream>
#include <sstream>

#include "veinlab/construction.hpp"

#include <json.hpp>

namespace veinlab {

struct FormatError : std::runtime_error {
  int line;
  FormatError(const std::string& what, int line_)
      : std::runtime_error(what + " at line " + std::to_string(line_)), line(line_) {}
};

namespace detail {

inline std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  std::size_t a = 0, b = s.size();
  while (a < b && issp(s[a])) ++a;
  while (b > a && issp(s[b - 1])) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<Bits> parse_bits_list(const std::string& s, int line) {
  std::vector<Bits> out;
  for (const auto& w : split(s, ',')) {
    try {
      out.push_back(Bits::from_string(trim(w)));
    } catch (const std::exception& e) {
      throw FormatError(e.what(), line);
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tree files: one node per line in the path text form, # comments.  A line
// of the form !name selects a built-in infinite tree instead.

inline BitTreePredicate load_tree_predicate(std::istream& in) {
  BitsTree tree;
  std::string line;
  int lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line[0] == '!') {
      std::string name = line.substr(1);
      if (name == "full") return BitTreePredicate::full();
      if (name == "no11") return BitTreePredicate::no11();
      if (name.rfind("full-depth:", 0) == 0)
        return BitTreePredicate(
            name, [d = std::stoul(name.substr(11))](BitSpan s) { return s.size() <= d; });
      if (name.rfind("without:", 0) == 0)
        return BitTreePredicate::without_cone(Bits::from_string(name.substr(8)));
      throw FormatError("unknown builtin tree \"" + name + "\"", lineno);
    }
    auto path = NodePath::parse(line);
    if (!path) throw FormatError("bad node path \"" + line + "\"", lineno);
    try {
      tree.insert_with_prefixes(Bits::from_path(*path));
    } catch (const std::exception& e) {
      throw FormatError(e.what(), lineno);
    }
    any = true;
  }
  if (!any) throw FormatError("tree file has no nodes", lineno);
  return BitTreePredicate::finite(std::move(tree));
}

inline BitTreePredicate load_tree_predicate_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file " + path);
  return load_tree_predicate(in);
}

inline ApproxMultifunction load_family(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) {
    std::string name = spec.substr(8);
    if (name == "full") return ApproxMultifunction::full();
    if (name == "flip-diag") return ApproxMultifunction::flipped_diagonal();
    if (name.rfind("full-depth:", 0) == 0) {
      std::size_t d = std::stoul(name.substr(11));
      return ApproxMultifunction(name,
                                 [d](BitSpan s, BitSpan) { return s.size() <= d; });
    }
    if (name.rfind("cone:", 0) == 0)
      return ApproxMultifunction::cone_of_prefix(std::stoul(name.substr(5)));
    if (name == "no11")
      return ApproxMultifunction::constant(BitTreePredicate::no11());
    if (name.rfind("without:", 0) == 0)
      return ApproxMultifunction::constant(
          BitTreePredicate::without_cone(Bits::from_string(name.substr(8))));
    throw std::runtime_error("unknown builtin family \"" + name + "\"");
  }
  return ApproxMultifunction::constant(load_tree_predicate_file(spec));
}

// ---------------------------------------------------------------------------
// Question, label, and machine atoms.

inline MatrixPred parse_question_atom(const std::string& spec, int line = 0) {
  if (spec == "true") return lib::p_const(true);
  if (spec == "false") return lib::p_const(false);
  if (spec == "dir") return lib::dir();
  if (spec == "least_zero") return lib::bit_at(0);
  if (spec == "least_one") return lib::bit_at(1);
  if (spec == "parity_even") return lib::parity_even();
  if (spec.rfind("ends:", 0) == 0)
    return lib::ends_with(detail::parse_bits_list(spec.substr(5), line));
  if (spec.rfind("cyl:", 0) == 0)
    return lib::cyl_list(detail::parse_bits_list(spec.substr(4), line));
  throw FormatError("unknown question \"" + spec + "\"", line);
}

inline ClopenFn parse_eta_atom(const std::string& spec, int line = 0) {
  if (spec == "none") return lib::eta_none();
  std::string body = spec;
  Stage delay = 0;
  auto at = body.find('@');
  if (at != std::string::npos) {
    delay = std::stoul(body.substr(at + 1));
    body = body.substr(0, at);
  }
  if (body == "binary") return lib::eta_binary(delay);
  if (body.rfind("list:", 0) == 0)
    return lib::eta_list(detail::parse_bits_list(body.substr(5), line), delay);
  throw FormatError("unknown label family \"" + spec + "\"", line);
}

inline LeafFn parse_leaf_atom(const std::string& spec, int line = 0) {
  if (spec == "id") return lib::leaf_identity();
  if (spec == "zeros") return lib::leaf_zeros();
  if (spec == "ones") return lib::leaf_ones();
  if (spec == "flip") return lib::leaf_flip();
  if (spec == "half") return lib::leaf_half();
  if (spec == "nowhere") return lib::leaf_nowhere();
  if (spec == "interleave0") return lib::leaf_interleave_zero();
  if (spec.rfind("const:", 0) == 0)
    return lib::leaf_const_stream(Bits::from_string(spec.substr(6)));
  if (spec.rfind("delay:", 0) == 0) return lib::leaf_delay(std::stoul(spec.substr(6)));
  throw FormatError("unknown leaf function \"" + spec + "\"", line);
}

inline WidthEvaluator parse_width_atom(const std::string& spec, int line = 0) {
  if (spec == "never") return lib::width_never();
  std::string body = spec;
  Stage delay = 0;
  auto at = body.find('@');
  if (at != std::string::npos) {
    delay = std::stoul(body.substr(at + 1));
    body = body.substr(0, at);
  }
  if (body.rfind("const:", 0) == 0)
    return lib::width_const(static_cast<Nat>(std::stoul(body.substr(6))), delay);
  throw FormatError("unknown width evaluator \"" + spec + "\"", line);
}

// ---------------------------------------------------------------------------
// Flow files.

struct FlowSpec {
  Vein vein;
  std::map<NodePath, Nat> widths;                // fin addresses of the vein
  std::map<NodePath, std::string> questions;     // tree node -> question atom
  std::map<NodePath, std::string> leaves;        // tree node -> leaf atom
  std::string default_leaf;
  std::string oracle = "0/0";
  std::uint64_t outcome_bound = 64;
  bool totalized = false;

  std::string print() const {
    std::ostringstream out;
    out << "[tree]\n";
    out << "vein = " << vein.print() << "\n";
    for (const auto& [addr, w] : widths) out << "width " << addr.str() << " = " << w << "\n";
    out << "[questions]\n";
    for (const auto& [node, q] : questions) out << node.str() << " = " << q << "\n";
    out << "[leaves]\n";
    if (!default_leaf.empty()) out << "default = " << default_leaf << "\n";
    for (const auto& [node, l] : leaves) out << node.str() << " = " << l << "\n";
    out << "[oracle]\n";
    out << "point = " << oracle << "\n";
    out << "[limits]\n";
    out << "outcome_bound = " << outcome_bound << "\n";
    if (totalized) out << "totalized = true\n";
    return out.str();
  }
};

inline FlowSpec parse_flow_spec(std::istream& in) {
  FlowSpec spec;
  bool have_vein = false;
  std::string section, line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key = value", lineno);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (section == "tree") {
      if (key == "vein") {
        try {
          spec.vein = Vein::parse(value);
        } catch (const VeinParseError& e) {
          throw FormatError(e.what(), lineno);
        }
        have_vein = true;
      } else if (key.rfind("width ", 0) == 0) {
        auto addr = NodePath::parse(detail::trim(key.substr(6)));
        if (!addr) throw FormatError("bad vein address in \"" + key + "\"", lineno);
        spec.widths[*addr] = static_cast<Nat>(std::stoul(value));
      } else {
        throw FormatError("unknown tree key \"" + key + "\"", lineno);
      }
    } else if (section == "questions") {
      auto node = NodePath::parse(key);
      if (!node) throw FormatError("bad node path \"" + key + "\"", lineno);
      if (value == "none" || value.rfind("binary", 0) == 0 || value.rfind("list:", 0) == 0)
        parse_eta_atom(value, lineno);  // validate early
      else
        parse_question_atom(value, lineno);
      spec.questions[*node] = value;
    } else if (section == "leaves") {
      if (key == "default") {
        parse_leaf_atom(value, lineno);
        spec.default_leaf = value;
      } else {
        auto node = NodePath::parse(key);
        if (!node) throw FormatError("bad node path \"" + key + "\"", lineno);
        parse_leaf_atom(value, lineno);
        spec.leaves[*node] = value;
      }
    } else if (section == "oracle") {
      if (key != "point") throw FormatError("unknown oracle key", lineno);
      spec.oracle = value;
    } else if (section == "limits") {
      if (key == "outcome_bound") {
        spec.outcome_bound = std::stoull(value);
      } else if (key == "totalized") {
        spec.totalized = value == "true" || value == "1";
      } else {
        throw FormatError("unknown limits key \"" + key + "\"", lineno);
      }
    } else {
      throw FormatError("content outside any section", lineno);
    }
  }
  if (!have_vein) throw FormatError("flow file has no vein", lineno);
  return spec;
}

inline FlowSpec load_flow_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open flow file " + path);
  return parse_flow_spec(in);
}

/// Instantiate the flow a spec describes.  Rank-0 questions live in the
/// label slot; everything else dispatches per node through one matrix.
inline Flow build_flow(const FlowSpec& spec) {
  BranchingFunction b;
  for (const auto& [addr, w] : spec.widths) b.assign[addr] = w;

  auto questions =
      std::make_shared<std::map<NodePath, MatrixPred>>();
  auto etas = std::make_shared<std::map<NodePath, ClopenFn>>();
  for (const auto& [node, atom] : spec.questions) {
    if (atom == "none" || atom.rfind("binary", 0) == 0 || atom.rfind("list:", 0) == 0)
      etas->emplace(node, parse_eta_atom(atom));
    else
      questions->emplace(node, parse_question_atom(atom));
  }

  MatrixPred dispatch(
      "file",
      [questions](const NodePath& node, Nat outcome, BitSpan x, BitSpan z) {
        auto it = questions->find(node);
        return it != questions->end() && it->second.eval(node, outcome, x, z);
      },
      [questions](const NodePath& node, Nat outcome, const StagePoint& x,
                  const StagePoint& z) -> std::optional<std::pair<Stage, Stage>> {
        auto it = questions->find(node);
        if (it == questions->end()) return std::make_pair<Stage, Stage>(0, 1);
        return it->second.trace_period(node, outcome, x, z);
      });

  ClopenFn eta(
      "file",
      [etas](const NodePath& node, Nat outcome, Stage s) -> std::optional<Bits> {
        auto it = etas->find(node);
        if (it == etas->end()) return std::nullopt;
        return it->second.at(node, outcome, s);
      },
      [etas](const NodePath& node, Nat outcome) -> std::optional<Stage> {
        auto it = etas->find(node);
        if (it == etas->end()) return std::nullopt;
        return it->second.converges_at(node, outcome);
      },
      [etas](const NodePath& node, const StagePoint& x)
          -> std::optional<std::pair<Stage, Stage>> {
        auto it = etas->find(node);
        if (it == etas->end()) return std::make_pair<Stage, Stage>(0, 1);
        return it->second.complement_period(node, x);
      });

  LeafTable leaves;
  for (const auto& [node, atom] : spec.leaves) leaves.set(node, parse_leaf_atom(atom));
  if (!spec.default_leaf.empty()) leaves.set_default(parse_leaf_atom(spec.default_leaf));

  Flow f = make_static_flow("file-flow", spec.vein, b, dispatch, dispatch, eta, leaves,
                            StagePoint::parse(spec.oracle));
  f.outcome_bound = spec.outcome_bound;
  if (spec.totalized) f = weak_totalize(f);
  return f;
}

// ---------------------------------------------------------------------------
// Registry manifest.

inline FlowRegistry load_registry(std::istream& in) {
  FlowRegistry reg;
  std::map<std::size_t, RegistryEntry> entries;
  std::size_t current = 0;
  bool in_entry = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      std::string name = line.substr(1, line.size() - 2);
      if (name.rfind("entry.", 0) != 0)
        throw FormatError("expected [entry.N] section", lineno);
      current = std::stoul(name.substr(6));
      auto& e = entries[current];
      e.width = lib::width_const(1);
      e.p = lib::p_const(true);
      e.q = lib::p_const(true);
      e.eta = lib::eta_none();
      e.leaf = lib::leaf_identity();
      in_entry = true;
      continue;
    }
    if (!in_entry) throw FormatError("content outside any entry", lineno);
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key = value", lineno);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    RegistryEntry& e = entries[current];
    if (key == "name") e.name = value;
    else if (key == "width") e.width = parse_width_atom(value, lineno);
    else if (key == "p") e.p = parse_question_atom(value, lineno);
    else if (key == "q") e.q = parse_question_atom(value, lineno);
    else if (key == "eta") e.eta = parse_eta_atom(value, lineno);
    else if (key == "leaf") e.leaf = parse_leaf_atom(value, lineno);
    else throw FormatError("unknown entry key \"" + key + "\"", lineno);
  }
  if (entries.empty()) throw FormatError("registry has no entries", lineno);
  std::size_t next = 0;
  for (const auto& [idx, e] : entries) {
    if (idx != next)
      throw FormatError("registry entries must be numbered consecutively from 0", 0);
    reg.add(e);
    ++next;
  }
  return reg;
}

inline FlowRegistry load_registry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open registry file " + path);
  return load_registry(in);
}

// ---------------------------------------------------------------------------
// Trace records.

inline nlohmann::json trace_event_json(const TraceEvent& ev) {
  nlohmann::json j;
  j["stage"] = ev.stage;
  j["triple"] = ev.triple.str();
  switch (ev.kind) {
    case TraceEvent::Kind::Attention:
      j["event"] = "attention";
      j["substage"] = ev.substage;
      j["xi"] = ev.xi.str();
      j["lambda"] = ev.lambda.str();
      j["alpha"] = ev.alpha.str();
      j["sigma"] = ev.sigma.str();
      j["flen"] = ev.flen;
      break;
    case TraceEvent::Kind::Gamma:
      j["event"] = "gamma";
      j["alpha"] = ev.alpha.str();
      j["image"] = ev.sigma.str();
      break;
    case TraceEvent::Kind::Freeze:
      j["event"] = "freeze";
      j["alpha"] = ev.alpha.str();
      j["image"] = ev.sigma.str();
      break;
  }
  return j;
}

inline void write_trace_jsonl(const ConstructionTrace& trace, std::ostream& out) {
  for (const auto& ev : trace.state->events()) out << trace_event_json(ev).dump() << "\n";
  // closing summary records: final images and stabilization stages
  for (std::size_t k = 0; k < trace.state->triple_count(); ++k) {
    const auto& eng = trace.state->engine(k);
    for (const auto& [alpha, image] : eng.patches()) {
      nlohmann::json j;
      j["event"] = "final";
      j["triple"] = eng.triple().str();
      j["alpha"] = alpha.str();
      j["image"] = image.str();
      auto it = eng.last_change().find(alpha);
      j["last_change"] = it == eng.last_change().end() ? 0 : it->second;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace veinlab
