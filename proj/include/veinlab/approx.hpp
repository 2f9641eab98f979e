#pragma once

#include <functional>
#include <memory>

#include "veinlab/registry.hpp"

namespace veinlab {

/// A decidable prefix-closed tree of binary strings (the S and E inputs of
/// the construction).
class BitTreePredicate {
public:
  using Member = std::function<bool(BitSpan)>;

  BitTreePredicate() : BitTreePredicate("full", [](BitSpan) { return true; }) {}
  BitTreePredicate(std::string name, Member member)
      : name_(std::move(name)), member_(std::move(member)) {}

  const std::string& name() const { return name_; }
  bool member(BitSpan s) const { return member_(s); }
  bool member(const Bits& s) const { return member_(s.span()); }

  static BitTreePredicate full() { return BitTreePredicate(); }

  /// Strings with no two adjacent ones.
  static BitTreePredicate no11() { return no_ones_run(2); }

  /// Strings with no run of k consecutive ones.
  static BitTreePredicate no_ones_run(std::size_t k) {
    return BitTreePredicate(k == 2 ? "no11" : "no1x" + std::to_string(k), [k](BitSpan s) {
      std::size_t run = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        run = s.at(i) == 1 ? run + 1 : 0;
        if (run >= k) return false;
      }
      return true;
    });
  }

  /// Everything except the given string and its extensions.
  static BitTreePredicate without_cone(Bits root) {
    auto r = std::make_shared<Bits>(std::move(root));
    return BitTreePredicate("without:" + r->str(), [r](BitSpan s) {
      return !is_prefix(*r, s);
    });
  }

  /// Finite tree given explicitly.
  static BitTreePredicate finite(BitsTree t) {
    auto tp = std::make_shared<BitsTree>(std::move(t));
    return BitTreePredicate("finite", [tp](BitSpan s) {
      Bits b;
      for (std::size_t i = 0; i < s.size(); ++i) b.push_back(s.at(i));
      return tp->contains(b);
    });
  }

  BitsTree materialize(std::size_t depth) const {
    BitsTree out;
    std::vector<Bits> frontier;
    if (member(Bits())) {
      out.insert_with_prefixes(Bits());
      frontier.push_back(Bits());
    }
    for (std::size_t d = 0; d < depth; ++d) {
      std::vector<Bits> next;
      for (const auto& b : frontier)
        for (int bit : {0, 1}) {
          Bits c = b.append(bit);
          if (member(c)) {
            out.insert_with_prefixes(c);
            next.push_back(c);
          }
        }
      frontier = std::move(next);
    }
    return out;
  }

private:
  std::string name_;
  Member member_;
};

/// A stagewise tree family U(τ): membership of σ may consult only σ and
/// τ↾|σ|, which forces the three approximation laws — height bounded by
/// |τ|, additions beyond |τ| only, and fibers as unions along the point.
class ApproxMultifunction {
public:
  /// judge(σ, τ↾|σ|); must be downward closed in σ for fixed knowledge.
  using Judge = std::function<bool(BitSpan sigma, BitSpan tau_clipped)>;

  ApproxMultifunction() : ApproxMultifunction("full", [](BitSpan, BitSpan) { return true; }) {}
  ApproxMultifunction(std::string name, Judge judge)
      : name_(std::move(name)), judge_(std::move(judge)) {}

  const std::string& name() const { return name_; }

  bool contains(BitSpan sigma, BitSpan tau) const {
    if (sigma.size() > tau.size()) return false;
    return judge_(sigma, BitSpan(tau.data(), sigma.size()));
  }
  bool contains(const Bits& sigma, const Bits& tau) const {
    return contains(sigma.span(), tau.span());
  }

  /// Semantic fiber membership along a point.
  bool fiber_contains(const Bits& sigma, const StagePoint& z) const {
    Bits tau = z.prefix(sigma.size());
    return contains(sigma.span(), tau.span());
  }

  BitsTree at_prefix(const Bits& tau) const {
    BitsTree out;
    std::vector<Bits> frontier;
    if (contains(Bits(), tau)) {
      out.insert_with_prefixes(Bits());
      frontier.push_back(Bits());
    }
    for (std::size_t d = 0; d < tau.size(); ++d) {
      std::vector<Bits> next;
      for (const auto& b : frontier)
        for (int bit : {0, 1}) {
          Bits c = b.append(bit);
          if (contains(c, tau)) {
            out.insert_with_prefixes(c);
            next.push_back(c);
          }
        }
      frontier = std::move(next);
    }
    return out;
  }

  static ApproxMultifunction full() { return ApproxMultifunction(); }

  /// Constant family from a tree predicate: every fiber is the same tree.
  static ApproxMultifunction constant(BitTreePredicate t) {
    auto tp = std::make_shared<BitTreePredicate>(std::move(t));
    return ApproxMultifunction("const:" + tp->name(),
                               [tp](BitSpan s, BitSpan) { return tp->member(s); });
  }

  /// F(z) = the single point obtained by flipping z bitwise.
  static ApproxMultifunction flipped_diagonal() {
    return ApproxMultifunction("flip-diag", [](BitSpan s, BitSpan tau) {
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s.at(i) != 1 - tau.at(i)) return false;
      return true;
    });
  }

  /// F(z) = the cone above z↾k.
  static ApproxMultifunction cone_of_prefix(std::size_t k) {
    return ApproxMultifunction("cone:" + std::to_string(k), [k](BitSpan s, BitSpan tau) {
      for (std::size_t i = 0; i < std::min(s.size(), k); ++i)
        if (s.at(i) != tau.at(i)) return false;
      return true;
    });
  }

private:
  std::string name_;
  Judge judge_;
};

/// First `count` minimal non-members of S in length-lexicographic order;
/// pairwise incomparable by minimality.
struct RhoEnumeration {
  std::vector<Bits> rho;
  bool shortfall = false;  // fewer than requested within the depth bound
};

inline RhoEnumeration rho_enumeration(const BitTreePredicate& S, std::size_t count,
                                      std::size_t depth_bound = 24) {
  RhoEnumeration out;
  if (!S.member(Bits())) {
    // the empty string itself is the unique minimal non-member
    if (count > 0) out.rho.push_back(Bits());
    out.shortfall = out.rho.size() < count;
    return out;
  }
  std::vector<Bits> members{Bits()};
  for (std::size_t len = 1; len <= depth_bound && out.rho.size() < count; ++len) {
    std::vector<Bits> next;
    for (const auto& b : members) {
      for (int bit : {0, 1}) {
        Bits c = b.append(bit);
        if (S.member(c)) {
          next.push_back(c);
        } else if (out.rho.size() < count) {
          out.rho.push_back(c);
        }
      }
    }
    members = std::move(next);
    if (members.empty()) break;
  }
  out.shortfall = out.rho.size() < count;
  return out;
}

/// The indexed approximation U^x_{i,j}[s], built from two registry machines:
/// the i-th maps the point's prefix forward, the j-th must invert it back to
/// x ⊕ d; agreement length and an E-membership gate clip the tree.
struct UIndexedView {
  Bits machine_i_output;  // Φ_i(x↾s) at budget s
  Stage agreement = 0;    // the ℓ of stage s
  const ApproxMultifunction* family = nullptr;

  bool contains(BitSpan sigma) const {
    if (sigma.size() >= agreement) return false;
    return family->contains(sigma, machine_i_output.span(sigma.size()));
  }
  bool contains(const Bits& sigma) const { return contains(sigma.span()); }
};

inline UIndexedView u_indexed_view(const FlowRegistry& reg, const ApproxMultifunction& U,
                                   std::size_t i, std::size_t j, const StagePoint& x,
                                   const StagePoint& d, Stage s,
                                   const BitTreePredicate& E = BitTreePredicate::full()) {
  const LeafFn& phi_i = reg.entry(i).leaf;
  const LeafFn& phi_j = reg.entry(j).leaf;
  Bits y = phi_i.transform(x.prefix(s), s);
  Bits w = phi_j.transform(y, s);

  UIndexedView view;
  view.machine_i_output = y;
  view.family = &U;
  Stage ell = 0;
  std::size_t cap = std::min(w.size(), y.size());
  for (std::size_t l = 1; l <= cap; ++l) {
    bool agree = true;
    for (std::size_t n = 0; n < l; ++n) {
      int expected = (n % 2 == 0) ? x.bit_at(n / 2) : d.bit_at(n / 2);
      if (w.at(n) != expected) {
        agree = false;
        break;
      }
    }
    if (!agree) break;
    Bits ypfx = y.take(l);
    if (!E.member(ypfx)) break;
    ell = l;
  }
  view.agreement = ell;
  return view;
}

/// Materialized form of the indexed approximation.
inline BitsTree u_indexed(const FlowRegistry& reg, const ApproxMultifunction& U,
                          std::size_t i, std::size_t j, const StagePoint& x,
                          const StagePoint& d, Stage s,
                          const BitTreePredicate& E = BitTreePredicate::full()) {
  UIndexedView view = u_indexed_view(reg, U, i, j, x, d, s, E);
  BitsTree out;
  if (view.agreement == 0) return out;
  std::vector<Bits> frontier;
  if (view.contains(Bits())) {
    out.insert_with_prefixes(Bits());
    frontier.push_back(Bits());
  }
  for (Stage depth = 1; depth < view.agreement; ++depth) {
    std::vector<Bits> next;
    for (const auto& b : frontier)
      for (int bit : {0, 1}) {
        Bits c = b.append(bit);
        if (view.contains(c)) {
          out.insert_with_prefixes(c);
          next.push_back(c);
        }
      }
    frontier = std::move(next);
  }
  return out;
}

namespace lib {

/// Machine producing in ⊕ 0^ω; the inverse half of the identity pair when
/// the designated oracle is all zeros.
inline LeafFn leaf_interleave_zero() {
  return LeafFn{"interleave0", false, [](const Bits& in, std::uint64_t budget) {
                  std::uint64_t n = std::min<std::uint64_t>(in.size(), budget);
                  Bits out;
                  for (std::uint64_t i = 0; i < n; ++i) {
                    out.push_back(in.at(i));
                    out.push_back(0);
                  }
                  return out;
                }};
}

}  // namespace lib

inline Stage ell_agreement(const UIndexedView& v) { return v.agreement; }

}  // namespace veinlab
