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

#include "anonproxy/detector.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace anonproxy {

namespace {

// Lowercase with '-' and '_' folded to one separator.
std::string normalize_key(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    if (c == '_') {
      out += '-';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::string normalize_host(std::string_view host) {
  std::string out(host);
  // Strip a :port suffix (but not an IPv6 literal's colons).
  if (auto pos = out.rfind(':'); pos != std::string::npos &&
                                 out.find(':') == pos) {
    out.erase(pos);
  }
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool host_matches_pattern(const std::string& host, const std::string& pattern) {
  if (pattern.empty()) return false;
  if (pattern.front() == '.') {
    if (host.size() >= pattern.size() &&
        host.compare(host.size() - pattern.size(), pattern.size(), pattern) == 0) {
      return true;
    }
    return host == pattern.substr(1);  // apex matches too
  }
  return host == pattern;
}

bool any_key_matches(const Value& tree, const KeywordSet& kw) {
  if (!tree.is_object() && !tree.is_array()) return false;
  if (tree.is_array()) {
    return std::any_of(tree.items().begin(), tree.items().end(),
                       [&](const Value& item) { return any_key_matches(item, kw); });
  }
  for (const auto& [key, val] : tree.members()) {
    if (kw.matches_key(key)) return true;
    if (val.is_object() || val.is_array()) {
      if (any_key_matches(val, kw)) return true;
    }
  }
  return false;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + std::min(offset, text.size()), '\n'));
}

}  // namespace

KeywordSet::KeywordSet(const std::vector<std::string>& keywords) {
  for (const auto& kw : keywords) {
    normalized_.insert(normalize_key(kw));
  }
}

bool KeywordSet::matches_key(std::string_view key) const {
  return normalized_.contains(normalize_key(key));
}

const std::vector<std::string>& KeywordSet::default_keywords() {
  static const std::vector<std::string> kDefaults = {
      "device-name", "device-id", "device-info", "event-type",
      "event-info",  "event",     "event-name"};
  return kDefaults;
}

AnalyticsDomainDb::AnalyticsDomainDb(AnalyticsDomainDb&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  entries_ = std::move(other.entries_);
  learned_ = std::move(other.learned_);
}

AnalyticsDomainDb& AnalyticsDomainDb::operator=(AnalyticsDomainDb&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = std::move(other.entries_);
    learned_ = std::move(other.learned_);
  }
  return *this;
}

AnalyticsDomainDb::AnalyticsDomainDb(std::vector<Entry> entries) {
  std::set<std::string> seen;
  for (auto& e : entries) {
    std::string norm = normalize_host(e.host_pattern);
    if (!seen.insert(norm).second) continue;  // first entry wins
    entries_.push_back({std::move(norm), std::move(e.library)});
  }
}

AnalyticsDomainDb AnalyticsDomainDb::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open host list file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return AnalyticsDomainDb{};  // empty file, keyword heuristic still active
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path + ":" + std::to_string(line_of_offset(text, ex.byte)) +
                      ": malformed host list: " + ex.what());
  }
  if (!doc.is_array()) {
    throw ConfigError(path + ":1: host list must be a JSON array of {host, library} records");
  }

  std::vector<Entry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    if (!rec.is_object() || !rec.contains("host") || !rec["host"].is_string()) {
      throw ConfigError(path + ": record " + std::to_string(i) +
                        " lacks a string \"host\" field");
    }
    Entry e;
    e.host_pattern = rec["host"].get<std::string>();
    if (rec.contains("library") && rec["library"].is_string()) {
      e.library = rec["library"].get<std::string>();
    }
    entries.push_back(std::move(e));
  }
  return AnalyticsDomainDb(std::move(entries));
}

std::optional<std::string> AnalyticsDomainDb::match(std::string_view host) const {
  const std::string norm = normalize_host(host);
  for (const auto& entry : entries_) {
    if (host_matches_pattern(norm, entry.host_pattern)) {
      return entry.library.empty() ? entry.host_pattern : entry.library;
    }
  }
  std::lock_guard lock(mutex_);
  if (learned_.contains(norm)) return std::string("(learned)");
  return std::nullopt;
}

void AnalyticsDomainDb::learn(std::string_view host) {
  std::lock_guard lock(mutex_);
  learned_.insert(normalize_host(host));
}

std::set<std::string> AnalyticsDomainDb::learned_hosts() const {
  std::lock_guard lock(mutex_);
  return learned_;
}

void AnalyticsDomainDb::save_learned_hosts(const std::string& path) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& host : learned_hosts()) {
    arr.push_back({{"host", host}, {"library", "(learned)"}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write learned hosts file: " + path);
  out << arr.dump(2) << "\n";
}

Classification classify(const ParsedRequest& request, AnalyticsDomainDb& db,
                        const KeywordSet& keywords) {
  if (auto library = db.match(request.host)) {
    return {true, MatchedBy::kHost, *library};
  }

  bool keyword_hit = false;
  for (const auto& name : query_param_names(request.query)) {
    if (keywords.matches_key(name)) {
      keyword_hit = true;
      break;
    }
  }
  if (!keyword_hit) {
    keyword_hit = any_key_matches(request.body, keywords);
  }
  if (keyword_hit) {
    db.learn(request.host);
    return {true, MatchedBy::kKeyword, ""};
  }
  return Classification::non_analytics();
}

std::vector<std::string> query_param_names(std::string_view query) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos < query.size()) {
    std::size_t amp = query.find('&', pos);
    if (amp == std::string_view::npos) amp = query.size();
    std::string_view token = query.substr(pos, amp - pos);
    std::size_t eq = token.find('=');
    std::string_view name = eq == std::string_view::npos ? token : token.substr(0, eq);
    if (!name.empty()) names.emplace_back(name);
    pos = amp + 1;
  }
  return names;
}

}  // namespace anonproxy
