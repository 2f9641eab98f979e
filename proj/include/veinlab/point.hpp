#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "veinlab/strings.hpp"

namespace veinlab {

/// A point of Cantor space presented one bit at a time.  Eventually periodic
/// points carry their (prefix, period) witness, which the semantic deciders
/// rely on.  Text form: "prefix/period", e.g. "10/10" for (10)^ω and "0/0"
/// for the all-zero point; the prefix may be empty ("/01").
class StagePoint {
public:
  StagePoint() { *this = eventually_periodic(Bits(), Bits::from_string("0")); }

  static StagePoint eventually_periodic(Bits prefix, Bits period) {
    if (period.empty()) throw std::invalid_argument("period must be nonempty");
    StagePoint p(raw_tag{});
    p.witness_ = std::make_pair(prefix, period);
    auto pre = std::make_shared<Bits>(std::move(prefix));
    auto per = std::make_shared<Bits>(std::move(period));
    p.bit_ = [pre, per](std::uint64_t i) -> int {
      if (i < pre->size()) return pre->at(i);
      return per->at((i - pre->size()) % per->size());
    };
    return p;
  }

  static StagePoint zeros() { return eventually_periodic(Bits(), Bits::from_string("0")); }
  static StagePoint ones() { return eventually_periodic(Bits(), Bits::from_string("1")); }

  /// A prefix-extender with no periodicity witness.
  static StagePoint from_bit_fn(std::function<int(std::uint64_t)> f) {
    StagePoint p(raw_tag{});
    p.bit_ = std::move(f);
    p.witness_ = std::nullopt;
    return p;
  }

  static StagePoint parse(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos)
      throw std::invalid_argument("point syntax is prefix/period");
    Bits pre =
        slash == 0 ? Bits() : Bits::from_string(text.substr(0, slash));
    Bits per = Bits::from_string(text.substr(slash + 1));
    return eventually_periodic(std::move(pre), std::move(per));
  }

  int bit_at(std::uint64_t i) const { return bit_(i); }

  Bits prefix(std::size_t n) const {
    Bits b;
    for (std::size_t i = 0; i < n; ++i) b.push_back(bit_(i));
    return b;
  }

  const std::optional<std::pair<Bits, Bits>>& periodicity() const { return witness_; }

  std::string str() const {
    if (!witness_) return "<opaque point>";
    return witness_->first.empty()
               ? "/" + witness_->second.str()
               : witness_->first.str() + "/" + witness_->second.str();
  }

private:
  struct raw_tag {};
  explicit StagePoint(raw_tag) {}

  std::function<int(std::uint64_t)> bit_;
  std::optional<std::pair<Bits, Bits>> witness_;
};

}  // namespace veinlab
