#pragma once

#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "veinlab/strings.hpp"

namespace veinlab {

enum class Mark { Leaf, Fin, Inf };

inline const char* mark_name(Mark m) {
  switch (m) {
    case Mark::Leaf: return "leaf";
    case Mark::Fin: return "fin";
    case Mark::Inf: return "inf";
  }
  return "?";
}

// Branching order used by normality: leaf < fin < inf.
inline int mark_order(Mark m) {
  switch (m) {
    case Mark::Leaf: return 0;
    case Mark::Fin: return 1;
    case Mark::Inf: return 2;
  }
  return 0;
}

struct VeinParseError : std::runtime_error {
  int line, column;
  VeinParseError(const std::string& what, int line_, int col_)
      : std::runtime_error(what + " at line " + std::to_string(line_) +
                           ", column " + std::to_string(col_)),
        line(line_), column(col_) {}
};

/// A vein: a schema of labeled well-founded trees.  Nodes carry a Borel rank
/// in {0,1,2} and a branch mark.  A fin node has exactly one child (the
/// successor schema, instantiated to any finite width by a branching
/// function); an inf node stores one schematic child standing for all of its
/// countably many identical successors.
class Vein {
public:
  struct Node {
    int rank = 0;
    Mark mark = Mark::Leaf;
    std::vector<Node> kids;

    friend bool operator==(const Node& a, const Node& b) {
      return a.rank == b.rank && a.mark == b.mark && a.kids == b.kids;
    }
  };

  Vein() = default;
  explicit Vein(Node root) : root_(std::move(root)) { validate(root_, NodePath()); }

  static Vein leaf(int rank = 0) { return Vein(Node{rank, Mark::Leaf, {}}); }

  /// The height-2 vein with a rank-xi root; k picks fin (width schema 1) or
  /// inf.
  static Vein basic(int rank, Mark mark) {
    if (mark == Mark::Leaf) return leaf(rank);
    Node root{rank, mark, {Node{0, Mark::Leaf, {}}}};
    return Vein(std::move(root));
  }

  const Node& root() const { return root_; }

  /// Schematic addresses: every interior node has exactly one stored child,
  /// so an address is a path of zeroes; we reuse NodePath for convenience.
  const Node& at(const NodePath& addr) const {
    const Node* cur = &root_;
    for (std::size_t i = 0; i < addr.size(); ++i) {
      if (addr.at(i) >= cur->kids.size())
        throw std::out_of_range("vein address " + addr.str() + " not present");
      cur = &cur->kids[addr.at(i)];
    }
    return *cur;
  }

  bool has(const NodePath& addr) const {
    const Node* cur = &root_;
    for (std::size_t i = 0; i < addr.size(); ++i) {
      if (addr.at(i) >= cur->kids.size()) return false;
      cur = &cur->kids[addr.at(i)];
    }
    return true;
  }

  std::size_t node_count() const { return count(root_); }

  std::vector<NodePath> addresses() const {
    std::vector<NodePath> out;
    collect(root_, NodePath(), out);
    return out;
  }

  friend bool operator==(const Vein& a, const Vein& b) { return a.root_ == b.root_; }
  friend bool operator!=(const Vein& a, const Vein& b) { return !(a == b); }

  std::string print() const {
    std::string out;
    print_node(root_, out);
    return out;
  }

  static Vein parse(std::string_view text) {
    Parser p{text, 0, 1, 1};
    Node root = p.node();
    p.skip_ws();
    if (!p.done()) p.fail("trailing input after vein");
    return Vein(std::move(root));
  }

private:
  Node root_;

  static void validate(const Node& n, const NodePath& addr) {
    if (n.rank < 0 || n.rank > 2)
      throw std::invalid_argument("vein rank out of range at " + addr.str());
    switch (n.mark) {
      case Mark::Leaf:
        if (!n.kids.empty())
          throw std::invalid_argument("leaf with children at " + addr.str());
        break;
      case Mark::Fin:
        if (n.kids.size() != 1)
          throw std::invalid_argument("fin node needs exactly one child at " + addr.str());
        break;
      case Mark::Inf:
        if (n.kids.size() != 1)
          throw std::invalid_argument("inf node needs exactly one schematic child at " + addr.str());
        if (n.rank > 1)
          throw std::invalid_argument("inf node rank above 1 at " + addr.str());
        break;
    }
    for (std::size_t i = 0; i < n.kids.size(); ++i)
      validate(n.kids[i], addr.child(static_cast<Nat>(i)));
  }

  static std::size_t count(const Node& n) {
    std::size_t c = 1;
    for (const auto& k : n.kids) c += count(k);
    return c;
  }

  static void collect(const Node& n, NodePath addr, std::vector<NodePath>& out) {
    out.push_back(addr);
    for (std::size_t i = 0; i < n.kids.size(); ++i)
      collect(n.kids[i], addr.child(static_cast<Nat>(i)), out);
  }

  static void print_node(const Node& n, std::string& out) {
    out += "(r";
    out += std::to_string(n.rank);
    out += ' ';
    out += mark_name(n.mark);
    for (const auto& k : n.kids) {
      out += ' ';
      print_node(k, out);
    }
    out += ')';
  }

  struct Parser {
    std::string_view text;
    std::size_t i;
    int line, col;

    [[noreturn]] void fail(const std::string& msg) { throw VeinParseError(msg, line, col); }

    bool done() const { return i >= text.size(); }

    void advance() {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }

    void skip_ws() {
      while (!done()) {
        char c = text[i];
        if (c == '#') {
          while (!done() && text[i] != '\n') advance();
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
          advance();
        } else {
          break;
        }
      }
    }

    void expect(char c) {
      if (done() || text[i] != c) fail(std::string("expected '") + c + "'");
      advance();
    }

    std::string word() {
      std::string w;
      while (!done() && isalpha(static_cast<unsigned char>(text[i]))) {
        w += text[i];
        advance();
      }
      return w;
    }

    Node node() {
      skip_ws();
      expect('(');
      skip_ws();
      expect('r');
      if (done() || !isdigit(static_cast<unsigned char>(text[i]))) fail("expected rank digit");
      int rank = text[i] - '0';
      if (rank > 2) fail("rank out of range (0..2)");
      advance();
      skip_ws();
      std::string m = word();
      Mark mark;
      if (m == "leaf") mark = Mark::Leaf;
      else if (m == "fin") mark = Mark::Fin;
      else if (m == "inf") mark = Mark::Inf;
      else fail("unknown mark \"" + m + "\"");
      Node n{rank, mark, {}};
      skip_ws();
      while (!done() && text[i] == '(') {
        n.kids.push_back(node());
        skip_ws();
      }
      expect(')');
      if (mark == Mark::Leaf && !n.kids.empty()) fail("leaf node with children");
      if (mark != Mark::Leaf && n.kids.size() != 1)
        fail(std::string(mark_name(mark)) + " node needs exactly one child");
      if (mark == Mark::Inf && rank > 1) fail("inf node rank above 1");
      return n;
    }
  };
};

// ---------------------------------------------------------------------------
// Operations of the vein calculus.

namespace detail {

inline Vein::Node concat_node(const Vein::Node& n, const Vein::Node& tail_root) {
  if (n.mark == Mark::Leaf) return tail_root;
  Vein::Node out{n.rank, n.mark, {}};
  for (const auto& k : n.kids) out.kids.push_back(concat_node(k, tail_root));
  return out;
}

}  // namespace detail

/// Concatenation: substitute v1 for every leaf of v0.  Ranks on the old
/// leaves come from v1's root.
inline Vein concat(const Vein& v0, const Vein& v1) {
  return Vein(detail::concat_node(v0.root(), v1.root()));
}

inline Vein transitive_closure(const Vein& v, Nat n) {
  if (n == 0) throw std::invalid_argument("transitive_closure needs n >= 1");
  Vein out = v;
  for (Nat k = 1; k < n; ++k) out = concat(out, v);
  return out;
}

namespace detail {

inline Vein::Node closure_node(const Vein::Node& n) {
  if (n.mark == Mark::Fin) {
    Vein::Node copy{n.rank, Mark::Fin, {closure_node(n.kids[0])}};
    // dispatch node whose children are identical copies of the fin node
    return Vein::Node{0, Mark::Inf, {std::move(copy)}};
  }
  Vein::Node out{n.rank, n.mark, {}};
  for (const auto& k : n.kids) out.kids.push_back(closure_node(k));
  return out;
}

}  // namespace detail

/// Insert a rank-0 infinitely-branching dispatch node above every fin node.
inline Vein closure(const Vein& v) { return Vein(detail::closure_node(v.root())); }

inline bool is_normal(const Vein& v) {
  struct Walk {
    static bool ok(const Vein::Node& n, const Vein::Node* parent) {
      if (n.mark != Mark::Leaf) {
        if (n.rank == 0 && n.mark != Mark::Inf) return false;
        if (parent && parent->rank >= n.rank &&
            !(parent->mark == Mark::Fin && n.mark == Mark::Inf))
          return false;
      }
      for (const auto& k : n.kids)
        if (!ok(k, &n)) return false;
      return true;
    }
  };
  return Walk::ok(v.root(), nullptr);
}

inline bool is_strongly_normal(const Vein& v) {
  if (!is_normal(v)) return false;
  struct Walk {
    static bool ok(const Vein::Node& n, const Vein::Node* parent) {
      if (n.mark != Mark::Leaf && parent) {
        bool c1 = n.rank < parent->rank && mark_order(n.mark) > mark_order(parent->mark);
        bool c2 = n.rank > parent->rank && mark_order(n.mark) < mark_order(parent->mark);
        if (!c1 && !c2) return false;
      }
      for (const auto& k : n.kids)
        if (!ok(k, &n)) return false;
      return true;
    }
  };
  return Walk::ok(v.root(), nullptr);
}

namespace detail {

// One rewrite pass.  Removable nodes:
//  (a) non-terminal rank-0 fin nodes;
//  (b) a non-terminal child whose rank and branching are both bounded by its
//      parent's (the child folds into the parent's question);
//  (c) a fin parent whose rank is bounded by a non-terminal child's (the
//      parent folds into the child).
// Each removal splices the node out; iterate to a fixpoint.
inline bool normalize_step(Vein::Node& n, bool is_root) {
  if (n.mark == Mark::Fin && n.rank == 0) {
    Vein::Node child = n.kids[0];
    n = std::move(child);
    return true;
  }
  if (n.mark != Mark::Leaf) {
    Vein::Node& child = n.kids[0];
    if (child.mark != Mark::Leaf) {
      if (child.rank <= n.rank && mark_order(child.mark) <= mark_order(n.mark)) {
        Vein::Node grand = child.kids[0];
        child = std::move(grand);
        return true;
      }
      if (n.mark == Mark::Fin && n.rank <= child.rank) {
        Vein::Node promoted = child;
        n = std::move(promoted);
        return true;
      }
    }
  }
  (void)is_root;
  for (auto& k : n.kids)
    if (normalize_step(k, false)) return true;
  return false;
}

}  // namespace detail

/// Rewrite to a fixpoint of the question-folding rules; the result is normal
/// and reproduces the paper-level identities structurally.
inline Vein normalize(const Vein& v) {
  Vein::Node root = v.root();
  while (detail::normalize_step(root, true)) {
  }
  return Vein(std::move(root));
}

inline Vein increment_fin(const Vein& v, int rank) {
  if (rank < 0 || rank > 2) throw std::invalid_argument("increment rank out of range");
  return Vein(Vein::Node{rank, Mark::Fin, {v.root()}});
}

inline Vein increment_inf(const Vein& v, int rank) {
  if (rank < 0 || rank > 1)
    throw std::invalid_argument("infinite increment rank must be 0 or 1");
  return Vein(Vein::Node{rank, Mark::Inf, {v.root()}});
}

namespace detail {

inline bool subtree_all_finite(const Vein::Node& n) {
  if (n.mark == Mark::Inf) return false;
  for (const auto& k : n.kids)
    if (!subtree_all_finite(k)) return false;
  return true;
}

// Almost-terminal: has finitely many extensions, while its parent does not
// (or it is the root).
inline Vein::Node replace_node(const Vein::Node& n, int rank) {
  if (subtree_all_finite(n))
    return Vein::Node{rank, Mark::Inf, {Vein::Node{0, Mark::Leaf, {}}}};
  Vein::Node out{n.rank, n.mark, {}};
  for (const auto& k : n.kids) out.kids.push_back(replace_node(k, rank));
  return out;
}

}  // namespace detail

/// ξ-replacement: each almost-terminal node becomes a rank-ξ infinitely
/// branching node over leaves.  The literal construction can stack identical
/// infinite branchings, so the result is normalized, matching the identities
/// the calculus is used for.
inline Vein replacement(const Vein& v, int rank) {
  if (rank < 0 || rank > 1) throw std::invalid_argument("replacement rank must be 0 or 1");
  if (!is_normal(v)) throw std::invalid_argument("replacement needs a normal vein");
  return normalize(Vein(detail::replace_node(v.root(), rank)));
}

/// The raw replacement, before folding stacked infinite branchings; the
/// verifier's tree lives on the branching of this form.
inline Vein replacement_literal(const Vein& v, int rank) {
  if (rank < 0 || rank > 1) throw std::invalid_argument("replacement rank must be 0 or 1");
  return Vein(detail::replace_node(v.root(), rank));
}

inline void require_primable(const Vein& v, const char* op) {
  if (!is_strongly_normal(v))
    throw std::invalid_argument(std::string(op) + " needs a strongly normal vein");
  if (v.root().mark == Mark::Leaf)
    throw std::invalid_argument(std::string(op) + " is undefined on a single-leaf vein");
}

inline Vein prime(const Vein& v) {
  require_primable(v, "prime");
  Vein rep = replacement(v, 1);
  if (v.root().mark == Mark::Inf)
    return increment_fin(rep, v.root().rank + 1);
  return increment_fin(increment_inf(rep, 0), 1);
}

inline Vein prime_literal(const Vein& v) {
  require_primable(v, "prime");
  Vein rep = replacement_literal(v, 1);
  if (v.root().mark == Mark::Inf)
    return increment_fin(rep, v.root().rank + 1);
  return increment_fin(increment_inf(rep, 0), 1);
}

inline Vein double_prime(const Vein& v) {
  require_primable(v, "double_prime");
  Vein rep = closure(replacement(v, 1));
  if (v.root().mark == Mark::Inf)
    return increment_fin(rep, v.root().rank + 1);
  return increment_fin(rep, 1);
}

enum class ChainKind { XY, YX };

/// The alternating chains built from X = basic(1, inf) and Y = basic(2, fin):
/// XY gives X0 Y0 ... Xn Yn, YX the mirrored order.
inline Vein preset_chain(ChainKind kind, Nat n) {
  Vein x = Vein::basic(1, Mark::Inf);
  Vein y = Vein::basic(2, Mark::Fin);
  Vein first = kind == ChainKind::XY ? x : y;
  Vein second = kind == ChainKind::XY ? y : x;
  Vein out = concat(first, second);
  for (Nat k = 0; k < n; ++k) out = concat(out, concat(first, second));
  return out;
}

}  // namespace veinlab
