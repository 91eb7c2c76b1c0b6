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

#ifndef ANONPROXY_METRICS_HPP_
#define ANONPROXY_METRICS_HPP_

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "anonproxy/model.hpp"

namespace anonproxy {

using Histogram = std::map<std::string, uint64_t>;

// Kullback-Leibler divergence in nats between two count histograms over
// the union of their keys. `epsilon` is added to every count on both
// sides before normalization so a dropped event type yields a large but
// finite distance. Zero iff the histograms are proportional; throws
// when both are empty.
double kl_divergence(const Histogram& p, const Histogram& q, double epsilon = 1e-9);

// Per-app accounting for one run. Every processed analytics event ends
// in exactly one of passed/replaced/removed; injections add on top:
//   forwarded = passed + replaced + injected,  dropped = removed.
struct AppMetrics {
  PrivacyLevel level = PrivacyLevel::kNone;
  uint64_t analytics_in = 0;
  uint64_t passed = 0;
  uint64_t replaced = 0;
  uint64_t removed = 0;
  uint64_t injected = 0;
  uint64_t forwarded = 0;
  uint64_t opaque_forwarded = 0;  // undecodable analytics, passed unanonymized
  uint64_t non_analytics = 0;
  Histogram original_events;
  Histogram anonymized_events;

  uint64_t total_emitted() const { return passed + replaced + injected; }
  double dkl(double epsilon = 1e-9) const;
};

struct HostStats {
  uint64_t forwarded = 0;
  uint64_t accepted = 0;  // 2xx upstream responses
};

struct RunMetrics {
  std::map<std::string, AppMetrics> per_app;  // keyed by app name
  std::map<std::string, HostStats> per_host;

  std::string to_json() const;
  static RunMetrics from_json(std::string_view text);
};

// Thread-safe accumulator the pipeline and forwarders feed.
class MetricsRegistry {
 public:
  void record_analytics_event(const std::string& app, PrivacyLevel level,
                              const std::string& original_type,
                              const std::vector<std::string>& emitted_types, Action fate,
                              bool injected);
  void record_opaque(const std::string& app, PrivacyLevel level);
  void record_non_analytics(const std::string& app);
  void record_forward(const std::string& app, const std::string& host, int status);

  RunMetrics snapshot() const;

 private:
  mutable std::mutex mutex_;
  RunMetrics metrics_;
};

// One aggregate line of the per-level results table.
struct LevelReportRow {
  PrivacyLevel level = PrivacyLevel::kNone;
  double th = 1.0;
  double mean_injected = 0.0;
  double mean_removed = 0.0;
  double mean_replaced = 0.0;
  double mean_total = 0.0;
  double mean_dkl = 0.0;
  std::size_t samples = 0;
};

// Aggregates per-app metrics of one or more runs into per-level means.
// Rows come out ordered NONE, LOW, MEDIUM, HIGH (only levels present).
std::vector<LevelReportRow> summarize_levels(const std::vector<RunMetrics>& runs,
                                             double epsilon = 1e-9);

std::string report_csv(const std::vector<LevelReportRow>& rows);
std::string report_table(const std::vector<LevelReportRow>& rows);

// Acceptance-rate breakdown: 100 * accepted / forwarded per host plus an
// overall row; hosts with nothing forwarded report "n/a".
struct AcceptanceRow {
  std::string host;  // "(overall)" for the total row
  uint64_t forwarded = 0;
  uint64_t accepted = 0;
  std::optional<double> rate;
};

std::vector<AcceptanceRow> acceptance_rates(const RunMetrics& metrics);
std::string acceptance_csv(const std::vector<AcceptanceRow>& rows);

}  // namespace anonproxy

#endif  // ANONPROXY_METRICS_HPP_
