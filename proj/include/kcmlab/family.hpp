#pragma once

// Update families: finite collections of finite rule sets X in Z^2 \ {0}.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmlab/lattice.hpp"

namespace kcmlab {

using Rule = std::vector<Site>;

class UpdateFamily {
 public:
  /// Canonicalizes: sites in each rule sorted and deduplicated, rules sorted
  /// lexicographically and deduplicated. Throws on an empty rule list, an
  /// empty rule, or a rule containing the origin.
  UpdateFamily(std::string name, std::vector<Rule> rules) : name_(std::move(name)) {
    if (rules.empty()) throw Error("update family has no rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      auto& r = rules[i];
      if (r.empty()) throw Error("rule " + std::to_string(i) + " is empty");
      r = make_site_set(std::move(r));
      if (kcmlab::contains(r, kOrigin)) throw Error("origin in rule " + std::to_string(i));
    }
    std::sort(rules.begin(), rules.end());
    rules.erase(std::unique(rules.begin(), rules.end()), rules.end());
    rules_ = std::move(rules);
  }

  const std::string& name() const { return name_; }
  const std::vector<Rule>& rules() const { return rules_; }

  /// Largest |coordinate| over all rule sites.
  std::int64_t range() const {
    std::int64_t r = 0;
    for (auto& rule : rules_)
      for (auto s : rule) r = std::max({r, s.x < 0 ? -s.x : s.x, s.y < 0 ? -s.y : s.y});
    return r;
  }

  friend bool operator==(const UpdateFamily& a, const UpdateFamily& b) { return a.rules_ == b.rules_; }

 private:
  std::string name_;
  std::vector<Rule> rules_;
};

inline UpdateFamily east1d() { return UpdateFamily("east1d", {{{-1, 0}}}); }

inline UpdateFamily east2d() { return UpdateFamily("east2d", {{{-1, 0}}, {{0, -1}}}); }

/// All 2-subsets of the North, South and West neighbours.
inline UpdateFamily duarte() {
  const Site n{0, 1}, s{0, -1}, w{-1, 0};
  return UpdateFamily("duarte", {{n, s}, {n, w}, {s, w}});
}

inline std::vector<std::string> builtin_family_names() { return {"east1d", "east2d", "duarte"}; }

inline bool is_builtin_family(std::string_view name) {
  return name == "east1d" || name == "east2d" || name == "duarte";
}

inline UpdateFamily builtin_family(std::string_view name) {
  if (name == "east1d") return east1d();
  if (name == "east2d") return east2d();
  if (name == "duarte") return duarte();
  throw Error("unknown built-in family '" + std::string(name) + "'");
}

class FamilyParseError : public Error {
 public:
  FamilyParseError(std::string location, const std::string& what)
      : Error(location + ": " + what), location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

namespace detail {

inline std::int64_t parse_coordinate(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) throw FamilyParseError(where, "coordinate must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace detail

/// Parses `{"name": str, "rules": [[[dx,dy],...],...]}`. Duplicate sites
/// and duplicate rules are dropped and reported through `warnings`.
inline UpdateFamily parse_family(std::string_view text, std::vector<std::string>* warnings = nullptr) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FamilyParseError("byte " + std::to_string(e.byte), "syntax error");
  }
  if (!doc.is_object()) throw FamilyParseError("$", "expected an object");
  std::string name = "custom";
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw FamilyParseError("$.name", "must be a string");
    name = doc["name"].get<std::string>();
  }
  if (!doc.contains("rules") || !doc["rules"].is_array()) throw FamilyParseError("$.rules", "missing rule list");
  const auto& jrules = doc["rules"];
  if (jrules.empty()) throw FamilyParseError("$.rules", "empty rule set");

  std::vector<Rule> rules;
  for (std::size_t i = 0; i < jrules.size(); ++i) {
    const std::string where = "$.rules[" + std::to_string(i) + "]";
    if (!jrules[i].is_array()) throw FamilyParseError(where, "rule must be an array of sites");
    if (jrules[i].empty()) throw FamilyParseError(where, "empty rule");
    Rule rule;
    for (std::size_t k = 0; k < jrules[i].size(); ++k) {
      const std::string at = where + "[" + std::to_string(k) + "]";
      const auto& js = jrules[i][k];
      if (!js.is_array() || js.size() != 2) throw FamilyParseError(at, "site must be [dx, dy]");
      Site s{detail::parse_coordinate(js[0], at + "[0]"), detail::parse_coordinate(js[1], at + "[1]")};
      if (s == kOrigin) throw FamilyParseError(at, "origin in rule");
      rule.push_back(s);
    }
    auto canon = make_site_set(rule);
    if (canon.size() != rule.size() && warnings) warnings->push_back(where + ": duplicate sites removed");
    rules.push_back(std::move(canon));
  }
  UpdateFamily family(name, rules);
  if (family.rules().size() != rules.size() && warnings)
    warnings->push_back("$.rules: " + std::to_string(rules.size() - family.rules().size()) +
                        " duplicate rule(s) removed");
  return family;
}

inline nlohmann::json family_to_json(const UpdateFamily& f) {
  nlohmann::json rules = nlohmann::json::array();
  for (auto& r : f.rules()) {
    nlohmann::json jr = nlohmann::json::array();
    for (auto s : r) jr.push_back({s.x, s.y});
    rules.push_back(jr);
  }
  return {{"name", f.name()}, {"rules", rules}};
}

inline std::string serialize_family(const UpdateFamily& f) { return family_to_json(f).dump(); }

}  // namespace kcmlab
