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

#include "anonproxy/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

namespace anonproxy {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

nlohmann::ordered_json histogram_to_json(const Histogram& h) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [key, count] : h) out[key] = count;
  return out;
}

Histogram histogram_from_json(const nlohmann::json& j) {
  Histogram h;
  for (const auto& [key, count] : j.items()) h[key] = count.get<uint64_t>();
  return h;
}

}  // namespace

double kl_divergence(const Histogram& p, const Histogram& q, double epsilon) {
  if (epsilon <= 0.0) {
    throw ConfigError("kl_divergence smoothing epsilon must be > 0");
  }
  if (p.empty() && q.empty()) {
    throw Error("kl_divergence is undefined for two empty histograms");
  }

  std::set<std::string> support;
  for (const auto& [key, count] : p) support.insert(key);
  for (const auto& [key, count] : q) support.insert(key);

  auto count_of = [](const Histogram& h, const std::string& key) -> double {
    auto it = h.find(key);
    return it == h.end() ? 0.0 : static_cast<double>(it->second);
  };

  double p_total = 0.0;
  double q_total = 0.0;
  for (const auto& key : support) {
    p_total += count_of(p, key) + epsilon;
    q_total += count_of(q, key) + epsilon;
  }

  double sum = 0.0;
  for (const auto& key : support) {
    const double pi = (count_of(p, key) + epsilon) / p_total;
    const double qi = (count_of(q, key) + epsilon) / q_total;
    sum += pi * std::log(pi / qi);
  }
  // Gibbs' inequality puts the exact value at >= 0; clamp the rounding
  // residue of proportional histograms.
  return sum < 0.0 && sum > -1e-12 ? 0.0 : sum;
}

double AppMetrics::dkl(double epsilon) const {
  if (original_events.empty() && anonymized_events.empty()) return 0.0;
  return kl_divergence(original_events, anonymized_events, epsilon);
}

std::string RunMetrics::to_json() const {
  nlohmann::ordered_json doc;
  doc["apps"] = nlohmann::ordered_json::object();
  for (const auto& [app, m] : per_app) {
    nlohmann::ordered_json j;
    j["level"] = std::string(to_string(m.level));
    j["analytics_in"] = m.analytics_in;
    j["passed"] = m.passed;
    j["replaced"] = m.replaced;
    j["removed"] = m.removed;
    j["injected"] = m.injected;
    j["forwarded"] = m.forwarded;
    j["opaque_forwarded"] = m.opaque_forwarded;
    j["non_analytics"] = m.non_analytics;
    j["original_events"] = histogram_to_json(m.original_events);
    j["anonymized_events"] = histogram_to_json(m.anonymized_events);
    doc["apps"][app] = std::move(j);
  }
  doc["hosts"] = nlohmann::ordered_json::object();
  for (const auto& [host, s] : per_host) {
    doc["hosts"][host] = {{"forwarded", s.forwarded}, {"accepted", s.accepted}};
  }
  return doc.dump(2);
}

RunMetrics RunMetrics::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(std::string("malformed metrics file: ") + ex.what());
  }
  RunMetrics out;
  if (doc.contains("apps")) {
    for (const auto& [app, j] : doc["apps"].items()) {
      AppMetrics m;
      m.level = parse_privacy_level(j.value("level", "NONE"));
      m.analytics_in = j.value("analytics_in", 0ull);
      m.passed = j.value("passed", 0ull);
      m.replaced = j.value("replaced", 0ull);
      m.removed = j.value("removed", 0ull);
      m.injected = j.value("injected", 0ull);
      m.forwarded = j.value("forwarded", 0ull);
      m.opaque_forwarded = j.value("opaque_forwarded", 0ull);
      m.non_analytics = j.value("non_analytics", 0ull);
      if (j.contains("original_events")) m.original_events = histogram_from_json(j["original_events"]);
      if (j.contains("anonymized_events")) m.anonymized_events = histogram_from_json(j["anonymized_events"]);
      out.per_app[app] = std::move(m);
    }
  }
  if (doc.contains("hosts")) {
    for (const auto& [host, j] : doc["hosts"].items()) {
      out.per_host[host] = {j.value("forwarded", 0ull), j.value("accepted", 0ull)};
    }
  }
  return out;
}

void MetricsRegistry::record_analytics_event(const std::string& app, PrivacyLevel level,
                                             const std::string& original_type,
                                             const std::vector<std::string>& emitted_types,
                                             Action fate, bool injected) {
  std::lock_guard lock(mutex_);
  AppMetrics& m = metrics_.per_app[app];
  m.level = level;
  m.analytics_in += 1;
  m.original_events[original_type] += 1;
  for (const auto& type : emitted_types) {
    m.anonymized_events[type] += 1;
  }
  switch (fate) {
    case Action::kPassThrough:
      m.passed += 1;
      break;
    case Action::kReplace:
      m.replaced += 1;
      break;
    case Action::kRemove:
      m.removed += 1;
      break;
    case Action::kInject:
      break;  // inject is never a fate
  }
  if (injected) m.injected += 1;
  m.forwarded += emitted_types.size();
}

void MetricsRegistry::record_opaque(const std::string& app, PrivacyLevel level) {
  std::lock_guard lock(mutex_);
  AppMetrics& m = metrics_.per_app[app];
  m.level = level;
  m.opaque_forwarded += 1;
}

void MetricsRegistry::record_non_analytics(const std::string& app) {
  std::lock_guard lock(mutex_);
  metrics_.per_app[app].non_analytics += 1;
}

void MetricsRegistry::record_forward(const std::string& app, const std::string& host,
                                     int status) {
  std::lock_guard lock(mutex_);
  (void)app;
  HostStats& s = metrics_.per_host[host];
  s.forwarded += 1;
  if (status >= 200 && status < 300) s.accepted += 1;
}

RunMetrics MetricsRegistry::snapshot() const {
  std::lock_guard lock(mutex_);
  return metrics_;
}

std::vector<LevelReportRow> summarize_levels(const std::vector<RunMetrics>& runs,
                                             double epsilon) {
  struct Accumulator {
    double injected = 0, removed = 0, replaced = 0, total = 0, dkl = 0;
    std::size_t n = 0;
  };
  std::map<int, Accumulator> by_level;
  for (const auto& run : runs) {
    for (const auto& [app, m] : run.per_app) {
      if (m.analytics_in == 0 && m.opaque_forwarded == 0) continue;
      Accumulator& acc = by_level[static_cast<int>(m.level)];
      acc.injected += static_cast<double>(m.injected);
      acc.removed += static_cast<double>(m.removed);
      acc.replaced += static_cast<double>(m.replaced);
      acc.total += static_cast<double>(m.total_emitted());
      acc.dkl += m.dkl(epsilon);
      acc.n += 1;
    }
  }

  std::vector<LevelReportRow> rows;
  for (const auto& [level, acc] : by_level) {
    LevelReportRow row;
    row.level = static_cast<PrivacyLevel>(level);
    row.th = threshold(row.level);
    row.samples = acc.n;
    if (acc.n > 0) {
      const double n = static_cast<double>(acc.n);
      row.mean_injected = acc.injected / n;
      row.mean_removed = acc.removed / n;
      row.mean_replaced = acc.replaced / n;
      row.mean_total = acc.total / n;
      row.mean_dkl = acc.dkl / n;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string report_csv(const std::vector<LevelReportRow>& rows) {
  std::string out = "level,TH,mean_inj,mean_rem,mean_rep,mean_total,mean_dkl\n";
  for (const auto& row : rows) {
    out += std::string(to_string(row.level)) + "," + format_double(row.th) + "," +
           format_double(row.mean_injected) + "," + format_double(row.mean_removed) + "," +
           format_double(row.mean_replaced) + "," + format_double(row.mean_total) + "," +
           format_double(row.mean_dkl) + "\n";
  }
  return out;
}

std::string report_table(const std::vector<LevelReportRow>& rows) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %6s %10s %10s %10s %10s %10s\n", "Level", "TH",
                "Inj", "Rem", "Rep", "Total", "D_KL");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %6.2f %10.2f %10.2f %10.2f %10.2f %10.4f\n",
                  std::string(to_string(row.level)).c_str(), row.th, row.mean_injected,
                  row.mean_removed, row.mean_replaced, row.mean_total, row.mean_dkl);
    out += buf;
  }
  return out;
}

std::vector<AcceptanceRow> acceptance_rates(const RunMetrics& metrics) {
  std::vector<AcceptanceRow> rows;
  uint64_t total_forwarded = 0;
  uint64_t total_accepted = 0;
  for (const auto& [host, s] : metrics.per_host) {
    AcceptanceRow row;
    row.host = host;
    row.forwarded = s.forwarded;
    row.accepted = s.accepted;
    if (s.forwarded > 0) {
      row.rate = 100.0 * static_cast<double>(s.accepted) / static_cast<double>(s.forwarded);
    }
    total_forwarded += s.forwarded;
    total_accepted += s.accepted;
    rows.push_back(std::move(row));
  }
  AcceptanceRow overall;
  overall.host = "(overall)";
  overall.forwarded = total_forwarded;
  overall.accepted = total_accepted;
  if (total_forwarded > 0) {
    overall.rate = 100.0 * static_cast<double>(total_accepted) /
                   static_cast<double>(total_forwarded);
  }
  rows.push_back(std::move(overall));
  return rows;
}

std::string acceptance_csv(const std::vector<AcceptanceRow>& rows) {
  std::string out = "host,forwarded,accepted,rate\n";
  for (const auto& row : rows) {
    out += row.host + "," + std::to_string(row.forwarded) + "," +
           std::to_string(row.accepted) + ",";
    out += row.rate ? format_double(*row.rate) : std::string("n/a");
    out += "\n";
  }
  return out;
}

}  // namespace anonproxy
