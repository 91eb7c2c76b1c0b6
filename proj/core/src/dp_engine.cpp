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

#include "anonproxy/dp_engine.hpp"

#include <fstream>

#include "anonproxy/value.hpp"

namespace anonproxy {

namespace {

constexpr double kTimestampJitterMs = 30000.0;  // +/- 30 s

}  // namespace

std::size_t RandomSource::uniform_index(std::size_t n) {
  if (n == 0) return 0;
  auto idx = static_cast<std::size_t>(next() * static_cast<double>(n));
  return idx < n ? idx : n - 1;
}

double Mt19937RandomSource::next() {
  // Top 53 bits give the full double mantissa; in [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint64_t derive_stream_seed(uint64_t base_seed, const AppHostKey& key) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a over app \0 host
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  mix(key.app_name);
  h ^= 0;
  h *= 1099511628211ull;
  mix(key.host_name);

  // splitmix64 finalizer over hash ^ seed spreads nearby seeds apart.
  uint64_t z = h ^ base_seed;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void EventBuffer::append(const AppHostKey& key, AnalyticsEvent event) {
  std::lock_guard lock(mutex_);
  store_[key].push_back(std::move(event));
}

std::vector<AnalyticsEvent> EventBuffer::history(const AppHostKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = store_.find(key);
  return it == store_.end() ? std::vector<AnalyticsEvent>{} : it->second;
}

std::size_t EventBuffer::size(const AppHostKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = store_.find(key);
  return it == store_.end() ? 0 : it->second.size();
}

std::size_t EventBuffer::total_size() const {
  std::lock_guard lock(mutex_);
  std::size_t total = 0;
  for (const auto& [key, events] : store_) total += events.size();
  return total;
}

void EventBuffer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write event buffer snapshot: " + path);
  std::lock_guard lock(mutex_);
  for (const auto& [key, events] : store_) {
    for (const auto& event : events) {
      Value line = Value::object();
      line.set("app", Value(key.app_name));
      line.set("host", Value(key.host_name));
      line.set("event_type", Value(event.event_type));
      line.set("timestamp", Value(event.timestamp_ms));
      line.set("attributes", event.attributes);
      out << dump_json(line) << "\n";
    }
  }
}

EventBuffer EventBuffer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open event buffer snapshot: " + path);
  EventBuffer buffer;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Value rec;
    try {
      rec = parse_json(line);
    } catch (const DecodeError& ex) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    const Value* app = rec.find("app");
    const Value* host = rec.find("host");
    const Value* type = rec.find("event_type");
    if (app == nullptr || host == nullptr || type == nullptr) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": snapshot line lacks app/host/event_type");
    }
    AnalyticsEvent event;
    event.event_type = type->as_string();
    if (const Value* ts = rec.find("timestamp")) {
      event.timestamp_ms = ts->is_number() ? static_cast<int64_t>(ts->as_double()) : 0;
    }
    if (const Value* attrs = rec.find("attributes")) {
      event.attributes = *attrs;
    }
    buffer.append({app->as_string(), host->as_string()}, std::move(event));
  }
  return buffer;
}

PerturbationOutcome perturb(const AnalyticsEvent& current, const AppHostKey& key,
                            PrivacyLevel level, EventBuffer& buffer, RandomSource& rng,
                            std::size_t min_len, const DghRuleSet& rules) {
  if (min_len == 0) {
    throw ConfigError("min_len must be >= 1 (a zero warm-up would sample an empty history)");
  }

  PerturbationOutcome outcome;
  const std::vector<AnalyticsEvent> history = buffer.history(key);

  if (history.size() < min_len) {
    // Warm-up: not enough history to perturb against.
    outcome.outputs.push_back(current);
    outcome.actions.push_back(Action::kPassThrough);
    outcome.fate = Action::kPassThrough;
    outcome.fate_output_index = 0;
    buffer.append(key, current);
    return outcome;
  }

  const double bar = threshold(level);
  const double pr_inject = rng.next();
  const double pr_remove = rng.next();
  const double pr_replace = rng.next();

  if (pr_inject > bar) {
    AnalyticsEvent injected = history[rng.uniform_index(history.size())];
    // Re-stamp near the current event so the stream's clock stays sane.
    injected.timestamp_ms =
        current.timestamp_ms +
        static_cast<int64_t>(rng.next() * 2.0 * kTimestampJitterMs - kTimestampJitterMs);
    outcome.outputs.push_back(std::move(injected));
    outcome.actions.push_back(Action::kInject);
    outcome.injected = true;
  }

  if (pr_replace > bar) {
    AnalyticsEvent replacement = history[rng.uniform_index(history.size())];
    replacement.attributes = generalize_request(replacement.attributes, level, rules);
    outcome.outputs.push_back(std::move(replacement));
    outcome.actions.push_back(Action::kReplace);
    outcome.fate = Action::kReplace;
    outcome.fate_output_index = static_cast<int>(outcome.outputs.size()) - 1;
  } else if (pr_remove > bar) {
    outcome.actions.push_back(Action::kRemove);
    outcome.fate = Action::kRemove;
  } else {
    outcome.outputs.push_back(current);
    outcome.actions.push_back(Action::kPassThrough);
    outcome.fate = Action::kPassThrough;
    outcome.fate_output_index = static_cast<int>(outcome.outputs.size()) - 1;
  }

  // The incoming event joins the pool regardless of its fate, so the
  // sampling distribution tracks real behavior.
  buffer.append(key, current);
  return outcome;
}

ActionRates action_rates(PrivacyLevel level) {
  const double p = static_cast<int>(level) / 4.0;
  return {p, p, p * (1.0 - p)};
}

}  // namespace anonproxy
