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

#ifndef ANONPROXY_PIPELINE_HPP_
#define ANONPROXY_PIPELINE_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "anonproxy/codec.hpp"
#include "anonproxy/detector.hpp"
#include "anonproxy/dp_engine.hpp"
#include "anonproxy/generalizer.hpp"
#include "anonproxy/metrics.hpp"
#include "anonproxy/model.hpp"

namespace anonproxy {

struct PipelineOptions {
  std::map<std::string, PrivacyLevel> per_app_levels;  // unknown apps: NONE
  std::size_t min_len = 5;
  uint64_t seed = 0;
};

// One request the pipeline wants sent upstream in place of the original.
struct OutboundRequest {
  std::string body;
  std::string content_type_header;
  std::string content_encoding_header;  // empty = drop the header
  bool carries_fate = false;  // the current/replacement event rides here
  std::string event_type;
  int64_t timestamp_ms = 0;
};

struct PipelineDecision {
  enum class Kind {
    kForwardRaw,   // untouched bytes go upstream (non-analytics, NONE, opaque)
    kAnonymized,   // send `outs` instead of the original (possibly none)
  };

  Kind kind = Kind::kForwardRaw;
  Classification classification;
  PrivacyLevel level = PrivacyLevel::kNone;
  Action fate = Action::kPassThrough;
  bool injected = false;
  bool opaque = false;  // raw forward forced by an undecodable body
  std::vector<OutboundRequest> outs;
};

// The per-request anonymization flow shared by the live proxy and the
// offline replay: classify, decode, generalize, perturb, re-encode.
// Requests for one (app, host) stream are serialized internally; distinct
// streams run concurrently, each on its own seeded draw sequence.
class Pipeline {
 public:
  Pipeline(AnalyticsDomainDb db, KeywordSet keywords, DghRuleSet rules,
           PipelineOptions options);

  PipelineDecision process(const std::string& app, const std::string& method,
                           const std::string& host, const std::string& path,
                           const std::string& query, const HeaderList& headers,
                           const std::string& body, int64_t timestamp_ms);

  PrivacyLevel level_for(const std::string& app) const;

  MetricsRegistry& metrics() { return metrics_; }
  AnalyticsDomainDb& domain_db() { return db_; }
  EventBuffer& event_buffer() { return buffer_; }
  const DghRuleSet& rules() const { return rules_; }

 private:
  struct StreamState {
    std::mutex mutex;
    Mt19937RandomSource rng;
    explicit StreamState(uint64_t seed) : rng(seed) {}
  };

  StreamState& stream_state(const AppHostKey& key);

  AnalyticsDomainDb db_;
  KeywordSet keywords_;
  DghRuleSet rules_;
  PipelineOptions options_;
  EventBuffer buffer_;
  MetricsRegistry metrics_;

  std::mutex streams_mutex_;
  std::map<AppHostKey, std::unique_ptr<StreamState>> streams_;
};

// First event-naming key of the tree, tried in priority order
// (event_type, event_name, event, name, type; '-'/'_' and case folded).
// Falls back to "(unlabeled)" so buffered events always carry a type.
std::string extract_event_type(const Value& tree);

}  // namespace anonproxy

#endif  // ANONPROXY_PIPELINE_HPP_
