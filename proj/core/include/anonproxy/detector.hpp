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

#ifndef ANONPROXY_DETECTOR_HPP_
#define ANONPROXY_DETECTOR_HPP_

#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "anonproxy/model.hpp"

namespace anonproxy {

// Keyword heuristic for requests whose host is not on the tracker list.
// Matching is case-insensitive on attribute keys, with '-' and '_'
// treated as the same separator, so "event-type" matches "event_type".
class KeywordSet {
 public:
  KeywordSet() : KeywordSet(default_keywords()) {}
  explicit KeywordSet(const std::vector<std::string>& keywords);

  bool matches_key(std::string_view key) const;

  static const std::vector<std::string>& default_keywords();

 private:
  std::set<std::string> normalized_;
};

// Tracker host list plus the hosts learned at runtime through keyword
// matches. Entries match on exact host or, with a leading dot, on any
// subdomain (".googlesyndication.com" covers pagead2.googlesyndication.com).
class AnalyticsDomainDb {
 public:
  struct Entry {
    std::string host_pattern;
    std::string library;
  };

  AnalyticsDomainDb() = default;
  explicit AnalyticsDomainDb(std::vector<Entry> entries);

  AnalyticsDomainDb(AnalyticsDomainDb&& other) noexcept;
  AnalyticsDomainDb& operator=(AnalyticsDomainDb&& other) noexcept;

  // Parses the host-list file: a JSON array of {"host", "library"} records.
  // Duplicate hosts keep the first entry. Throws ConfigError with the
  // offending line on malformed input.
  static AnalyticsDomainDb load(const std::string& path);

  // Matches against configured entries and learned hosts. Returns the
  // library name ("(learned)" for runtime additions).
  std::optional<std::string> match(std::string_view host) const;

  // Records a host discovered by the keyword heuristic. The learned set
  // only grows; re-learning is a no-op.
  void learn(std::string_view host);

  std::set<std::string> learned_hosts() const;
  std::size_t entry_count() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void save_learned_hosts(const std::string& path) const;

 private:
  std::vector<Entry> entries_;
  std::set<std::string> learned_;
  mutable std::mutex mutex_;  // guards learned_
};

enum class MatchedBy { kNone, kHost, kKeyword };

struct Classification {
  bool analytics = false;
  MatchedBy matched_by = MatchedBy::kNone;
  std::string library;  // set on host matches

  static Classification non_analytics() { return {}; }
};

// Host check first, keyword fallback over query parameter names and body
// attribute keys at every nesting depth. A keyword hit teaches the db the
// host. Undecodable bodies classify by host and query names only; pass an
// empty object body in that case.
Classification classify(const ParsedRequest& request, AnalyticsDomainDb& db,
                        const KeywordSet& keywords);

// Query parameter names from a raw query string ("a=1&b=2" -> {"a","b"}).
std::vector<std::string> query_param_names(std::string_view query);

}  // namespace anonproxy

#endif  // ANONPROXY_DETECTOR_HPP_
