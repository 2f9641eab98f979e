#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace veinlab {

using Nat = std::uint32_t;
using Stage = std::uint64_t;

/// A finite string over the naturals.  Canonical text form is
/// comma-separated entries in angle brackets, e.g. `<1,0,2>`; `<>` is the
/// root.
class NodePath {
public:
  NodePath() = default;
  explicit NodePath(std::vector<Nat> entries) : entries_(std::move(entries)) {}
  NodePath(std::initializer_list<Nat> entries) : entries_(entries) {}

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Nat at(std::size_t i) const { return entries_.at(i); }
  Nat last() const { return entries_.back(); }
  const std::vector<Nat>& entries() const { return entries_; }

  NodePath parent() const {
    if (empty()) throw std::logic_error("root has no parent");
    return NodePath(std::vector<Nat>(entries_.begin(), entries_.end() - 1));
  }

  NodePath child(Nat n) const {
    std::vector<Nat> e = entries_;
    e.push_back(n);
    return NodePath(std::move(e));
  }

  NodePath take(std::size_t n) const {
    if (n > size()) throw std::out_of_range("take past end");
    return NodePath(std::vector<Nat>(entries_.begin(), entries_.begin() + n));
  }

  NodePath concat(const NodePath& tail) const {
    std::vector<Nat> e = entries_;
    e.insert(e.end(), tail.entries_.begin(), tail.entries_.end());
    return NodePath(std::move(e));
  }

  friend bool operator==(const NodePath& a, const NodePath& b) {
    return a.entries_ == b.entries_;
  }
  friend bool operator!=(const NodePath& a, const NodePath& b) {
    return !(a == b);
  }
  // lexicographic-by-entries, used only for ordered containers
  friend bool operator<(const NodePath& a, const NodePath& b) {
    return a.entries_ < b.entries_;
  }

  std::string str() const {
    std::string s = "<";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(entries_[i]);
    }
    s += '>';
    return s;
  }

  static std::optional<NodePath> parse(std::string_view text) {
    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    };
    skip_ws();
    if (i >= text.size() || text[i] != '<') return std::nullopt;
    ++i;
    std::vector<Nat> entries;
    skip_ws();
    if (i < text.size() && text[i] == '>') {
      ++i;
    } else {
      while (true) {
        skip_ws();
        if (i >= text.size() || !isdigit(static_cast<unsigned char>(text[i])))
          return std::nullopt;
        std::uint64_t v = 0;
        while (i < text.size() && isdigit(static_cast<unsigned char>(text[i]))) {
          v = v * 10 + (text[i] - '0');
          if (v > 0xffffffffull) return std::nullopt;
          ++i;
        }
        entries.push_back(static_cast<Nat>(v));
        skip_ws();
        if (i < text.size() && text[i] == ',') {
          ++i;
          continue;
        }
        if (i < text.size() && text[i] == '>') {
          ++i;
          break;
        }
        return std::nullopt;
      }
    }
    skip_ws();
    if (i != text.size()) return std::nullopt;
    return NodePath(std::move(entries));
  }

private:
  std::vector<Nat> entries_;
};

/// σ = τ↾|σ|.
inline bool is_prefix(const NodePath& s, const NodePath& t) {
  if (s.size() > t.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.at(i) != t.at(i)) return false;
  return true;
}

inline bool is_proper_prefix(const NodePath& s, const NodePath& t) {
  return s.size() < t.size() && is_prefix(s, t);
}

/// The left-of order: σ = τ, or the entries agree up to the first index where
/// σ is smaller.  Proper prefixes are not left of their extensions.
inline bool left_of(const NodePath& s, const NodePath& t) {
  if (s == t) return true;
  std::size_t n = std::min(s.size(), t.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (s.at(i) < t.at(i)) return true;
    if (s.at(i) > t.at(i)) return false;
  }
  return false;  // one is a proper prefix of the other
}

inline bool strictly_left_of(const NodePath& s, const NodePath& t) {
  return s != t && left_of(s, t);
}

/// Non-owning view of a prefix of a Bits value; what the question matrices
/// receive, so that stage loops do not copy prefixes around.
class BitSpan {
public:
  BitSpan() : data_(nullptr), len_(0) {}
  BitSpan(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

  std::size_t size() const { return len_; }
  bool empty() const { return len_ == 0; }
  int at(std::size_t i) const {
    if (i >= len_) throw std::out_of_range("bit span index");
    return data_[i];
  }
  int last() const { return data_[len_ - 1]; }
  const std::uint8_t* data() const { return data_; }

private:
  const std::uint8_t* data_;
  std::size_t len_;
};

/// A finite binary string.  Text form is a run of 0/1 characters; the empty
/// string prints as "-".
class Bits {
public:
  Bits() = default;
  explicit Bits(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("bit out of range");
  }

  static Bits from_string(std::string_view s) {
    if (s == "-") return Bits();
    std::vector<std::uint8_t> v;
    v.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1')
        throw std::invalid_argument("bad bit character in \"" + std::string(s) + "\"");
      v.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return Bits(std::move(v));
  }

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  int at(std::size_t i) const { return bits_.at(i); }
  int last() const { return bits_.back(); }
  const std::uint8_t* data() const { return bits_.data(); }

  BitSpan span() const { return BitSpan(bits_.data(), bits_.size()); }
  BitSpan span(std::size_t len) const {
    return BitSpan(bits_.data(), std::min(len, bits_.size()));
  }

  void push_back(int b) {
    if (b != 0 && b != 1) throw std::invalid_argument("bit out of range");
    bits_.push_back(static_cast<std::uint8_t>(b));
  }
  void pop_back() { bits_.pop_back(); }

  Bits take(std::size_t n) const {
    if (n >= size()) return *this;
    return Bits(std::vector<std::uint8_t>(bits_.begin(), bits_.begin() + n));
  }

  Bits concat(const Bits& tail) const {
    std::vector<std::uint8_t> v = bits_;
    v.insert(v.end(), tail.bits_.begin(), tail.bits_.end());
    return Bits(std::move(v));
  }

  Bits append(int b) const {
    std::vector<std::uint8_t> v = bits_;
    v.push_back(static_cast<std::uint8_t>(b));
    return Bits(std::move(v));
  }

  friend bool operator==(const Bits& a, const Bits& b) { return a.bits_ == b.bits_; }
  friend bool operator!=(const Bits& a, const Bits& b) { return !(a == b); }
  friend bool operator<(const Bits& a, const Bits& b) { return a.bits_ < b.bits_; }

  std::string str() const {
    if (bits_.empty()) return "-";
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s += static_cast<char>('0' + b);
    return s;
  }

  NodePath as_path() const {
    std::vector<Nat> e(bits_.begin(), bits_.end());
    return NodePath(std::move(e));
  }

  static Bits from_path(const NodePath& p) {
    std::vector<std::uint8_t> v;
    v.reserve(p.size());
    for (Nat n : p.entries()) {
      if (n > 1) throw std::invalid_argument("path entry is not a bit");
      v.push_back(static_cast<std::uint8_t>(n));
    }
    return Bits(std::move(v));
  }

private:
  std::vector<std::uint8_t> bits_;
};

inline bool is_prefix(const Bits& s, const Bits& t) {
  if (s.size() > t.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.at(i) != t.at(i)) return false;
  return true;
}

inline bool is_proper_prefix(const Bits& s, const Bits& t) {
  return s.size() < t.size() && is_prefix(s, t);
}

inline bool comparable(const Bits& s, const Bits& t) {
  return is_prefix(s, t) || is_prefix(t, s);
}

inline bool is_prefix(const Bits& s, BitSpan t) {
  if (s.size() > t.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.at(i) != t.at(i)) return false;
  return true;
}

inline bool comparable(const Bits& s, BitSpan t) {
  std::size_t n = std::min(s.size(), t.size());
  for (std::size_t i = 0; i < n; ++i)
    if (s.at(i) != t.at(i)) return false;
  return true;
}

inline Bits to_bits(BitSpan s) {
  return Bits(std::vector<std::uint8_t>(s.data(), s.data() + s.size()));
}

/// A finite prefix-closed set of paths.
class FiniteTree {
public:
  FiniteTree() = default;

  static FiniteTree closure_of(const std::vector<NodePath>& paths) {
    FiniteTree t;
    for (const auto& p : paths) t.insert_with_prefixes(p);
    return t;
  }

  void insert_with_prefixes(const NodePath& p) {
    for (std::size_t n = 0; n <= p.size(); ++n) nodes_.insert(p.take(n));
  }

  bool contains(const NodePath& p) const { return nodes_.count(p) > 0; }
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  const std::set<NodePath>& nodes() const { return nodes_; }

  bool prefix_closed() const {
    for (const auto& p : nodes_)
      if (!p.empty() && !contains(p.parent())) return false;
    return true;
  }

  /// The ⪯-maximal members.
  std::set<NodePath> leaves() const {
    std::set<NodePath> out;
    for (const auto& p : nodes_) {
      bool maximal = true;
      for (const auto& q : nodes_) {
        if (p != q && is_prefix(p, q)) {
          maximal = false;
          break;
        }
      }
      if (maximal) out.insert(p);
    }
    return out;
  }

  friend bool operator==(const FiniteTree& a, const FiniteTree& b) {
    return a.nodes_ == b.nodes_;
  }

private:
  std::set<NodePath> nodes_;
};

/// Prefix-closed finite set of binary strings.
class BitsTree {
public:
  BitsTree() = default;

  void insert_with_prefixes(const Bits& b) {
    for (std::size_t n = 0; n <= b.size(); ++n) nodes_.insert(b.take(n));
  }

  bool contains(const Bits& b) const { return nodes_.count(b) > 0; }
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  const std::set<Bits>& nodes() const { return nodes_; }

  std::size_t height() const {
    std::size_t h = 0;
    for (const auto& b : nodes_) h = std::max(h, b.size());
    return h;
  }

  bool subset_of(const BitsTree& other) const {
    return std::includes(other.nodes_.begin(), other.nodes_.end(),
                         nodes_.begin(), nodes_.end());
  }

  friend bool operator==(const BitsTree& a, const BitsTree& b) {
    return a.nodes_ == b.nodes_;
  }

private:
  std::set<Bits> nodes_;
};

}  // namespace veinlab
