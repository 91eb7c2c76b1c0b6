// Copyright 2026 The AnonProxy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ANONPROXY_GENERALIZER_HPP_
#define ANONPROXY_GENERALIZER_HPP_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anonproxy/model.hpp"
#include "anonproxy/value.hpp"

namespace anonproxy {

// One step of a generalization hierarchy: either an explicit value map
// (with an optional default for unlisted values) or a named builtin
// transform. Map steps treat their own outputs as fixed points so a
// generalized value survives re-generalization unchanged.
struct HierarchyStep {
  std::map<std::string, std::string> mapping;
  std::optional<std::string> fallback;  // default for unmapped values

  // Builtin transform instead of a map.
  std::string transform;  // "ip_zero_octets" | "digit_suppress"
  int transform_arg = 0;  // octets to zero / trailing chars to mask
};

enum class RuleKind { kHierarchy, kMaskSuffix, kTruncateNumber, kReplaceFixed, kPassthrough };

struct GeneralizationRule {
  std::string key_pattern;  // exact key, or prefix match when ending in '*'
  RuleKind kind = RuleKind::kPassthrough;

  std::vector<HierarchyStep> steps;  // kHierarchy; level h applies steps 0..min(level,n)-1

  int keep_prefix = 0;      // kMaskSuffix; output keeps the byte length of the input
  char mask_char = '*';

  // kTruncateNumber. Negative significant_digits selects the default
  // policy: integers below 10000 zero their last two digits, larger ones
  // keep five significant digits. Digit count is always preserved.
  int significant_digits = -1;

  std::string replacement;  // kReplaceFixed

  bool matches(std::string_view key) const;
};

// Ordered rule list; the first matching pattern wins.
class DghRuleSet {
 public:
  DghRuleSet() = default;
  explicit DghRuleSet(std::vector<GeneralizationRule> rules) : rules_(std::move(rules)) {}

  // Rule file: a JSON array of rule records (see data/dgh_rules.json).
  // Throws ConfigError naming the offending record on malformed input.
  static DghRuleSet load(const std::string& path);
  static DghRuleSet parse(std::string_view json_text, const std::string& origin);

  const GeneralizationRule* find(std::string_view key) const;
  std::size_t size() const { return rules_.size(); }

 private:
  std::vector<GeneralizationRule> rules_;
};

// Applies the first matching rule to one attribute value. Hierarchy rules
// apply min(level, n) steps; unmatched keys pass through unchanged.
// Deterministic; callers skip level NONE.
Value generalize_value(std::string_view key, const Value& value, PrivacyLevel level,
                       const DghRuleSet& rules);

// Walks every leaf of the tree (through nested objects and lists; list
// leaves inherit the list's key) without adding, removing or reordering
// anything. A defensive call at NONE returns the tree unchanged.
Value generalize_request(const Value& tree, PrivacyLevel level, const DghRuleSet& rules);

}  // namespace anonproxy

#endif  // ANONPROXY_GENERALIZER_HPP_
