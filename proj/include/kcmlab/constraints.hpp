#pragma once

// Constraints c_x compiled against a finite window: each rule X + x becomes a
// list of window indices, with exterior sites folded in as constants.

#include <cstdint>
#include <span>
#include <vector>

#include "kcmlab/family.hpp"

namespace kcmlab {

class ConstraintTable {
 public:
  ConstraintTable(const UpdateFamily& family, const Region& region, const Exterior& exterior)
      : region_(region) {
    const auto n = region.size();
    site_rules_.reserve(n + 1);
    site_rules_.push_back(0);
    rule_begin_.push_back(0);
    std::vector<std::uint32_t> dep_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const Site x = region.site(i);
      for (const auto& rule : family.rules()) {
        const auto mark = refs_.size();
        bool possible = true;
        for (auto s : rule) {
          const Site z = x + s;
          const auto j = region.index_of(z);
          if (j != Region::npos) {
            refs_.push_back(static_cast<std::uint32_t>(j));
          } else if (exterior_value(exterior, z) == 1) {
            possible = false;
            break;
          }
        }
        if (!possible) {
          refs_.resize(mark);
          continue;
        }
        if (refs_.size() == mark) always_.push_back(static_cast<std::uint32_t>(i));
        for (auto k = mark; k < refs_.size(); ++k) ++dep_count[refs_[k]];
        rule_begin_.push_back(static_cast<std::uint32_t>(refs_.size()));
      }
      site_rules_.push_back(static_cast<std::uint32_t>(rule_begin_.size() - 1));
    }

    dep_begin_.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) dep_begin_[j + 1] = dep_begin_[j] + dep_count[j];
    deps_.resize(dep_begin_[n]);
    auto fill = dep_begin_;
    for (std::size_t i = 0; i < n; ++i)
      for (auto r = site_rules_[i]; r < site_rules_[i + 1]; ++r)
        for (auto k = rule_begin_[r]; k < rule_begin_[r + 1]; ++k) deps_[fill[refs_[k]]++] = static_cast<std::uint32_t>(i);
    // A site may read j through several rules; keep each dependent once.
    std::vector<std::uint32_t> compact;
    compact.reserve(deps_.size());
    std::vector<std::uint32_t> begin(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
      auto first = deps_.begin() + dep_begin_[j], last = deps_.begin() + dep_begin_[j + 1];
      std::sort(first, last);
      auto end = std::unique(first, last);
      compact.insert(compact.end(), first, end);
      begin[j + 1] = static_cast<std::uint32_t>(compact.size());
    }
    deps_ = std::move(compact);
    dep_begin_ = std::move(begin);
  }

  const Region& region() const { return region_; }
  std::size_t size() const { return region_.size(); }

  /// c_x for window site i given window values (1 = occupied, 0 = empty).
  bool satisfied(std::size_t i, std::span<const std::uint8_t> values) const {
    for (auto r = site_rules_[i]; r < site_rules_[i + 1]; ++r) {
      bool all_empty = true;
      for (auto k = rule_begin_[r]; k < rule_begin_[r + 1]; ++k)
        if (values[refs_[k]] != 0) {
          all_empty = false;
          break;
        }
      if (all_empty) return true;
    }
    return false;
  }

  /// True if some rule at i is satisfied by the exterior alone.
  bool always_satisfied(std::size_t i) const {
    return std::binary_search(always_.begin(), always_.end(), static_cast<std::uint32_t>(i));
  }

  /// True if no rule at i can ever be satisfied.
  bool never_satisfied(std::size_t i) const { return site_rules_[i] == site_rules_[i + 1]; }

  /// Sites whose constraint reads site j.
  std::span<const std::uint32_t> dependents(std::size_t j) const {
    return {deps_.data() + dep_begin_[j], deps_.data() + dep_begin_[j + 1]};
  }

 private:
  Region region_;
  std::vector<std::uint32_t> site_rules_;  // per site: range into rule_begin_
  std::vector<std::uint32_t> rule_begin_;  // per rule: range into refs_
  std::vector<std::uint32_t> refs_;
  std::vector<std::uint32_t> always_;
  std::vector<std::uint32_t> dep_begin_, deps_;
};

/// c_x evaluated directly from coordinates (no compilation); x must be in the window.
inline bool constraint_satisfied(const Configuration& config, const UpdateFamily& family, Site x) {
  if (!config.region.contains(x)) throw Error("site " + to_string(x) + " outside region");
  for (const auto& rule : family.rules()) {
    bool all_empty = true;
    for (auto s : rule)
      if (config.value_at(x + s) != 0) {
        all_empty = false;
        break;
      }
    if (all_empty) return true;
  }
  return false;
}

}  // namespace kcmlab
