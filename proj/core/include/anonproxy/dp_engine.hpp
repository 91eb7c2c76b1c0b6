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

#ifndef ANONPROXY_DP_ENGINE_HPP_
#define ANONPROXY_DP_ENGINE_HPP_

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "anonproxy/generalizer.hpp"
#include "anonproxy/model.hpp"

namespace anonproxy {

// Uniform draws in [0,1). The perturbation consumes draws in a fixed
// order — inject, remove, replace, then the optional sampling and
// timestamp-jitter draws — so one seed reproduces one decision sequence.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual double next() = 0;

  // One draw mapped onto [0, n).
  std::size_t uniform_index(std::size_t n);
};

// mt19937_64 mapped to doubles via the high 53 bits; identical sequences
// on every platform for a given seed.
class Mt19937RandomSource final : public RandomSource {
 public:
  explicit Mt19937RandomSource(uint64_t seed) : engine_(seed) {}
  double next() override;

 private:
  std::mt19937_64 engine_;
};

// Derives a stable per-(app, host) seed so streams can be processed in
// parallel without sharing a generator, keeping runs reproducible
// regardless of scheduling.
uint64_t derive_stream_seed(uint64_t base_seed, const AppHostKey& key);

// Per-(app, host) ordered history of generalized events: the sampling
// pool for injection and replacement. Append-only per key.
class EventBuffer {
 public:
  void append(const AppHostKey& key, AnalyticsEvent event);
  std::vector<AnalyticsEvent> history(const AppHostKey& key) const;  // snapshot
  std::size_t size(const AppHostKey& key) const;
  std::size_t total_size() const;

  // JSON-lines snapshot (one event with its key per line) for optional
  // restart persistence.
  void save(const std::string& path) const;
  static EventBuffer load(const std::string& path);

 private:
  std::map<AppHostKey, std::vector<AnalyticsEvent>> store_;
  mutable std::mutex mutex_;
};

// What the perturbation emitted for one incoming event: zero events when
// it was removed, two when an injection rode along, otherwise one.
struct PerturbationOutcome {
  std::vector<AnalyticsEvent> outputs;   // injected event first when present
  std::vector<Action> actions;           // Inject (optional) then the fate
  bool injected = false;
  Action fate = Action::kPassThrough;    // fate of the current event
  int fate_output_index = -1;            // index into outputs, -1 when removed
};

// One pass of the anonymization pipeline's differential-privacy stage
// over an already generalized event:
//   - below min_len history the event passes through untouched;
//   - otherwise three draws decide inject / remove / replace against
//     threshold(level), replacement taking precedence over removal;
//   - injected and replacement events are sampled uniformly from the
//     history (replacements re-generalized, injected events re-stamped
//     near the current event's timestamp);
//   - the incoming event is appended to the history whatever happened.
// min_len of zero is a configuration error.
PerturbationOutcome perturb(const AnalyticsEvent& current, const AppHostKey& key,
                            PrivacyLevel level, EventBuffer& buffer, RandomSource& rng,
                            std::size_t min_len, const DghRuleSet& rules);

// Expected marginal firing probabilities at a level: inject and replace
// fire at level/4 each; removal only fires when replacement did not, so
// its effective rate is (level/4) * (1 - level/4).
struct ActionRates {
  double inject = 0.0;
  double replace = 0.0;
  double remove = 0.0;
};

ActionRates action_rates(PrivacyLevel level);

}  // namespace anonproxy

#endif  // ANONPROXY_DP_ENGINE_HPP_
