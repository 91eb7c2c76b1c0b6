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

#ifndef ANONPROXY_REPLAY_HPP_
#define ANONPROXY_REPLAY_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anonproxy/config.hpp"
#include "anonproxy/metrics.hpp"
#include "anonproxy/model.hpp"
#include "anonproxy/pipeline.hpp"

namespace anonproxy {

// One recorded request; the offline stand-in for live device traffic.
// Serialized as one JSON object per line; binary bodies ride in
// "body_b64" instead of "body".
struct ReplayRecord {
  std::string app;
  std::string method = "POST";
  std::string url;
  HeaderList headers;
  std::string body;
  int64_t timestamp_ms = 0;

  bool operator==(const ReplayRecord&) const = default;
};

ReplayRecord parse_replay_record(std::string_view line, std::size_t index);
std::string replay_record_to_line(const ReplayRecord& record);

std::vector<ReplayRecord> load_replay_file(const std::string& path);

// Where replayed requests go. The simulated sink accepts everything,
// matching a run without a stub backend.
class ReplayForwarder {
 public:
  virtual ~ReplayForwarder() = default;
  virtual int forward(const ReplayRecord& record) = 0;  // returns HTTP status
};

// Runs the full pipeline over a recorded file. Writes the anonymized
// records to output_path (removed events omitted, injected ones adjacent
// to their trigger) and returns the run's metrics. Records of one app are
// processed in file order; different apps in parallel. With a seed in the
// config the output bytes are a pure function of (corpus, config, seed).
RunMetrics run_replay(const Config& config, const std::string& input_path,
                      const std::string& output_path, ReplayForwarder* forwarder = nullptr);

// Same, reusing a prepared pipeline (for callers that batch several runs
// against one rule set).
RunMetrics run_replay_with_pipeline(Pipeline& pipeline,
                                    const std::vector<ReplayRecord>& records,
                                    const std::string& output_path,
                                    ReplayForwarder* forwarder = nullptr);

// Forwarder that actually sends each record to a stub address over HTTP,
// preserving the record's logical Host.
std::unique_ptr<ReplayForwarder> make_stub_forwarder(const std::string& host, int port);

// ---- synthetic corpus ------------------------------------------------------

struct CorpusSpec {
  std::size_t events = 1000;
  int apps = 3;
  std::vector<std::string> vocabulary;  // empty = default event vocabulary
  double skew = 1.0;                    // Zipf exponent; 0 = uniform
  uint64_t seed = 7;
  std::vector<std::string> hosts;  // empty = default analytics hosts
};

// Event names observed most often in mobile analytics traffic, most
// frequent first.
const std::vector<std::string>& default_event_vocabulary();
const std::vector<std::string>& default_corpus_hosts();

// Writes a replay file whose event-type frequencies follow the requested
// skew. Deterministic for a given spec.
void gen_corpus(const CorpusSpec& spec, const std::string& out_path);

// Writes <base>.metrics.json, <base>.csv, <base>.txt and
// <base>.acceptance.csv for a finished run.
void write_reports(const RunMetrics& metrics, const std::string& base_path);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view text);

}  // namespace anonproxy

#endif  // ANONPROXY_REPLAY_HPP_
