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

#include "anonproxy/generalizer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace anonproxy {

namespace {

// Zeroes the trailing `octets` groups of a dotted-quad address; non-IP
// strings pass through untouched.
std::string ip_zero_octets(const std::string& value, int octets) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t dot = value.find('.', pos);
    if (dot == std::string::npos) {
      parts.push_back(value.substr(pos));
      break;
    }
    parts.push_back(value.substr(pos, dot - pos));
    pos = dot + 1;
  }
  if (parts.size() != 4) return value;
  for (const auto& p : parts) {
    if (p.empty() || !std::all_of(p.begin(), p.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      return value;
    }
  }
  for (int i = 0; i < octets && i < 4; ++i) {
    parts[3 - i] = "0";
  }
  return parts[0] + "." + parts[1] + "." + parts[2] + "." + parts[3];
}

// "16011" -> "160**" for chars = 2. Idempotent: '*' stays '*'.
std::string digit_suppress(const std::string& value, int chars, char mask) {
  std::string out = value;
  const int n = std::min<int>(chars, static_cast<int>(out.size()));
  for (int i = 0; i < n; ++i) {
    out[out.size() - 1 - i] = mask;
  }
  return out;
}

std::string apply_step(const HierarchyStep& step, const std::string& value) {
  if (!step.transform.empty()) {
    if (step.transform == "ip_zero_octets") return ip_zero_octets(value, step.transform_arg);
    if (step.transform == "digit_suppress") return digit_suppress(value, step.transform_arg, '*');
    return value;  // unknown transform names validated at load time
  }
  if (auto it = step.mapping.find(value); it != step.mapping.end()) {
    return it->second;
  }
  // Outputs are fixed points, so re-generalizing stays stable.
  if (step.fallback && value == *step.fallback) return value;
  for (const auto& [from, to] : step.mapping) {
    if (to == value) return value;
  }
  if (step.fallback) return *step.fallback;
  return value;
}

Value apply_hierarchy(const GeneralizationRule& rule, const Value& value, PrivacyLevel level) {
  if (!value.is_string()) return value;  // hierarchies act on categorical text
  const int depth = std::min<int>(static_cast<int>(level), static_cast<int>(rule.steps.size()));
  std::string current = value.as_string();
  for (int i = 0; i < depth; ++i) {
    current = apply_step(rule.steps[i], current);
  }
  return Value(std::move(current));
}

Value apply_mask_suffix(const GeneralizationRule& rule, const Value& value) {
  if (!value.is_string()) return value;
  const std::string& s = value.as_string();
  if (static_cast<int>(s.size()) <= rule.keep_prefix) return value;
  std::string out = s;
  for (std::size_t i = static_cast<std::size_t>(rule.keep_prefix); i < out.size(); ++i) {
    out[i] = rule.mask_char;
  }
  return Value(std::move(out));
}

// Keeps `keep` leading digits of a non-negative decimal magnitude and
// zeroes the rest, never changing the digit count.
uint64_t truncate_magnitude(uint64_t magnitude, int keep) {
  if (magnitude == 0 || keep <= 0) return 0;
  char digits[32];
  auto [end, ec] = std::to_chars(digits, digits + sizeof(digits), magnitude);
  const int len = static_cast<int>(end - digits);
  if (keep >= len) return magnitude;
  uint64_t scale = 1;
  for (int i = 0; i < len - keep; ++i) scale *= 10;
  return magnitude / scale * scale;
}

int default_keep_digits(uint64_t magnitude) {
  // Default policy: small integers zero their last two digits, larger
  // ones keep five significant digits (560 -> 500, 2701 -> 2700,
  // 1609930857411 -> 1609900000000).
  char digits[32];
  auto [end, ec] = std::to_chars(digits, digits + sizeof(digits), magnitude);
  const int len = static_cast<int>(end - digits);
  if (magnitude < 10000) return std::max(0, len - 2);
  return 5;
}

Value apply_truncate(const GeneralizationRule& rule, const Value& value) {
  auto truncate_u64 = [&rule](uint64_t magnitude) {
    const int keep = rule.significant_digits >= 0 ? rule.significant_digits
                                                  : default_keep_digits(magnitude);
    return truncate_magnitude(magnitude, keep);
  };

  switch (value.kind()) {
    case Value::Kind::kInt: {
      int64_t v = value.as_int();
      uint64_t mag = v < 0 ? static_cast<uint64_t>(-(v + 1)) + 1 : static_cast<uint64_t>(v);
      uint64_t truncated = truncate_u64(mag);
      return Value(v < 0 ? -static_cast<int64_t>(truncated) : static_cast<int64_t>(truncated));
    }
    case Value::Kind::kUint:
      return Value(truncate_u64(value.as_uint()));
    case Value::Kind::kDouble: {
      double d = value.as_double();
      double mag = std::floor(std::abs(d));
      if (mag >= 1e18) return value;  // beyond exact integer range, leave as is
      uint64_t truncated = truncate_u64(static_cast<uint64_t>(mag));
      double out = static_cast<double>(truncated);
      return Value(d < 0 ? -out : out);
    }
    case Value::Kind::kString: {
      // Numeric strings are truncated in place; anything else passes.
      const std::string& s = value.as_string();
      if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) {
            return std::isdigit(c);
          })) {
        return value;
      }
      uint64_t mag = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), mag);
      if (ec != std::errc() || p != s.data() + s.size()) return value;
      std::string out = std::to_string(truncate_u64(mag));
      while (out.size() < s.size()) out.insert(out.begin(), '0');  // keep leading zeros
      return Value(std::move(out));
    }
    default:
      return value;
  }
}

RuleKind parse_kind(const std::string& kind, const std::string& origin, std::size_t index) {
  if (kind == "hierarchy") return RuleKind::kHierarchy;
  if (kind == "mask_suffix") return RuleKind::kMaskSuffix;
  if (kind == "truncate_number") return RuleKind::kTruncateNumber;
  if (kind == "replace_fixed") return RuleKind::kReplaceFixed;
  if (kind == "passthrough") return RuleKind::kPassthrough;
  throw ConfigError(origin + ": rule " + std::to_string(index) + ": unknown kind \"" + kind + "\"");
}

}  // namespace

bool GeneralizationRule::matches(std::string_view key) const {
  if (!key_pattern.empty() && key_pattern.back() == '*') {
    std::string_view prefix(key_pattern.data(), key_pattern.size() - 1);
    return key.substr(0, prefix.size()) == prefix;
  }
  return key == key_pattern;
}

DghRuleSet DghRuleSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open DGH rule file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

DghRuleSet DghRuleSet::parse(std::string_view json_text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(origin + ": malformed rule file: " + ex.what());
  }
  if (!doc.is_array()) {
    throw ConfigError(origin + ": rule file must be a JSON array of rule records");
  }

  std::vector<GeneralizationRule> rules;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    auto fail = [&](const std::string& why) -> ConfigError {
      return ConfigError(origin + ": rule " + std::to_string(i) + ": " + why);
    };
    if (!rec.is_object()) throw fail("not an object");
    if (!rec.contains("key_pattern") || !rec["key_pattern"].is_string()) {
      throw fail("missing string \"key_pattern\"");
    }
    if (!rec.contains("kind") || !rec["kind"].is_string()) {
      throw fail("missing string \"kind\"");
    }

    GeneralizationRule rule;
    rule.key_pattern = rec["key_pattern"].get<std::string>();
    rule.kind = parse_kind(rec["kind"].get<std::string>(), origin, i);

    switch (rule.kind) {
      case RuleKind::kHierarchy: {
        if (!rec.contains("levels") || !rec["levels"].is_array() || rec["levels"].empty()) {
          throw fail("hierarchy needs a non-empty \"levels\" array");
        }
        for (const auto& lvl : rec["levels"]) {
          HierarchyStep step;
          if (lvl.contains("transform")) {
            step.transform = lvl["transform"].get<std::string>();
            if (step.transform == "ip_zero_octets") {
              step.transform_arg = lvl.value("octets", 1);
            } else if (step.transform == "digit_suppress") {
              step.transform_arg = lvl.value("chars", 1);
            } else {
              throw fail("unknown transform \"" + step.transform + "\"");
            }
          } else {
            if (lvl.contains("map")) {
              for (const auto& [from, to] : lvl["map"].items()) {
                step.mapping[from] = to.get<std::string>();
              }
            }
            if (lvl.contains("default")) {
              step.fallback = lvl["default"].get<std::string>();
            }
            if (step.mapping.empty() && !step.fallback) {
              throw fail("hierarchy level needs a \"map\", \"default\" or \"transform\"");
            }
          }
          rule.steps.push_back(std::move(step));
        }
        break;
      }
      case RuleKind::kMaskSuffix:
        if (!rec.contains("keep_prefix") || !rec["keep_prefix"].is_number_integer()) {
          throw fail("mask_suffix needs an integer \"keep_prefix\"");
        }
        rule.keep_prefix = rec["keep_prefix"].get<int>();
        if (rule.keep_prefix < 0) throw fail("keep_prefix must be >= 0");
        break;
      case RuleKind::kTruncateNumber:
        rule.significant_digits = rec.value("significant_digits", -1);
        break;
      case RuleKind::kReplaceFixed:
        if (!rec.contains("replacement") || !rec["replacement"].is_string()) {
          throw fail("replace_fixed needs a string \"replacement\"");
        }
        rule.replacement = rec["replacement"].get<std::string>();
        break;
      case RuleKind::kPassthrough:
        break;
    }
    rules.push_back(std::move(rule));
  }
  return DghRuleSet(std::move(rules));
}

const GeneralizationRule* DghRuleSet::find(std::string_view key) const {
  for (const auto& rule : rules_) {
    if (rule.matches(key)) return &rule;
  }
  return nullptr;
}

Value generalize_value(std::string_view key, const Value& value, PrivacyLevel level,
                       const DghRuleSet& rules) {
  if (level == PrivacyLevel::kNone) return value;
  const GeneralizationRule* rule = rules.find(key);
  if (rule == nullptr) return value;

  switch (rule->kind) {
    case RuleKind::kHierarchy:
      return apply_hierarchy(*rule, value, level);
    case RuleKind::kMaskSuffix:
      return apply_mask_suffix(*rule, value);
    case RuleKind::kTruncateNumber:
      return apply_truncate(*rule, value);
    case RuleKind::kReplaceFixed:
      return value.is_scalar() ? Value(rule->replacement) : value;
    case RuleKind::kPassthrough:
      return value;
  }
  return value;
}

namespace {

Value generalize_node(std::string_view key, const Value& node, PrivacyLevel level,
                      const DghRuleSet& rules) {
  if (node.is_object()) {
    Value out = Value::object();
    out.members().reserve(node.members().size());
    for (const auto& [k, v] : node.members()) {
      out.members().emplace_back(k, generalize_node(k, v, level, rules));
    }
    return out;
  }
  if (node.is_array()) {
    Value out = Value::array();
    out.items().reserve(node.items().size());
    for (const auto& item : node.items()) {
      // Leaf list items inherit the list's key.
      out.items().push_back(generalize_node(key, item, level, rules));
    }
    return out;
  }
  return generalize_value(key, node, level, rules);
}

}  // namespace

Value generalize_request(const Value& tree, PrivacyLevel level, const DghRuleSet& rules) {
  if (level == PrivacyLevel::kNone) return tree;
  return generalize_node("", tree, level, rules);
}

}  // namespace anonproxy
