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

#include "anonproxy/pipeline.hpp"

#include <algorithm>
#include <cctype>

namespace anonproxy {

namespace {

std::string fold_key(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    out += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string header_value(const HeaderList& headers, std::string_view name) {
  for (const auto& [k, v] : headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) ==
                 std::tolower(static_cast<unsigned char>(b));
        })) {
      return v;
    }
  }
  return {};
}

}  // namespace

std::string extract_event_type(const Value& tree) {
  if (!tree.is_object()) return "(unlabeled)";
  static const char* kCandidates[] = {"event-type", "event-name", "event", "name", "type"};
  for (const char* candidate : kCandidates) {
    for (const auto& [key, val] : tree.members()) {
      if (fold_key(key) == candidate && val.is_scalar()) {
        std::string text = val.scalar_text();
        if (!text.empty()) return text;
      }
    }
  }
  return "(unlabeled)";
}

Pipeline::Pipeline(AnalyticsDomainDb db, KeywordSet keywords, DghRuleSet rules,
                   PipelineOptions options)
    : db_(std::move(db)),
      keywords_(std::move(keywords)),
      rules_(std::move(rules)),
      options_(std::move(options)) {}

PrivacyLevel Pipeline::level_for(const std::string& app) const {
  auto it = options_.per_app_levels.find(app);
  return it == options_.per_app_levels.end() ? PrivacyLevel::kNone : it->second;
}

Pipeline::StreamState& Pipeline::stream_state(const AppHostKey& key) {
  std::lock_guard lock(streams_mutex_);
  auto it = streams_.find(key);
  if (it == streams_.end()) {
    it = streams_
             .emplace(key, std::make_unique<StreamState>(
                               derive_stream_seed(options_.seed, key)))
             .first;
  }
  return *it->second;
}

PipelineDecision Pipeline::process(const std::string& app, const std::string& method,
                                   const std::string& host, const std::string& path,
                                   const std::string& query, const HeaderList& headers,
                                   const std::string& body, int64_t timestamp_ms) {
  PipelineDecision decision;
  decision.level = level_for(app);

  // Decode up front: the keyword heuristic wants body keys, and a corrupt
  // compressed stream must fail open here rather than abort the request.
  DecodedBody decoded;
  bool decode_failed = false;
  try {
    decoded = decode_body(header_value(headers, "Content-Type"),
                          header_value(headers, "Content-Encoding"), body);
  } catch (const DecodeError&) {
    decode_failed = true;
  }

  ParsedRequest request;
  request.headers = headers;
  request.method = method;
  request.host = host;
  request.path = path;
  request.query = query;
  request.app = app;
  if (!decode_failed) {
    request.content_type = decoded.type;
    request.content_encoding = decoded.encoding;
    if (!decoded.opaque) request.body = decoded.tree;
  }

  decision.classification = classify(request, db_, keywords_);
  if (!decision.classification.analytics) {
    metrics_.record_non_analytics(app);
    return decision;  // kForwardRaw
  }

  if (decision.level == PrivacyLevel::kNone) {
    // Full pass-through; the stream still counts into both histograms so
    // a NONE run reports D_KL = 0 rather than an undefined distance.
    if (!decode_failed && !decoded.opaque) {
      const std::string type = extract_event_type(decoded.tree);
      metrics_.record_analytics_event(app, decision.level, type, {type},
                                      Action::kPassThrough, false);
    } else {
      metrics_.record_opaque(app, decision.level);
      decision.opaque = true;
    }
    return decision;  // kForwardRaw, byte-identical
  }

  if (decode_failed || decoded.opaque) {
    metrics_.record_opaque(app, decision.level);
    decision.opaque = true;
    return decision;  // fail open, forwarded unanonymized
  }

  const AppHostKey key{app, host};
  StreamState& stream = stream_state(key);
  std::lock_guard stream_lock(stream.mutex);

  AnalyticsEvent event;
  event.attributes = generalize_request(decoded.tree, decision.level, rules_);
  event.event_type = extract_event_type(event.attributes);
  event.timestamp_ms = timestamp_ms;
  const std::string original_type = extract_event_type(decoded.tree);

  PerturbationOutcome outcome =
      perturb(event, key, decision.level, buffer_, stream.rng, options_.min_len, rules_);

  std::vector<OutboundRequest> outs;
  std::vector<std::string> emitted_types;
  for (std::size_t i = 0; i < outcome.outputs.size(); ++i) {
    const AnalyticsEvent& out_event = outcome.outputs[i];
    EncodedBody encoded;
    try {
      encoded = encode_body(decoded, out_event.attributes);
    } catch (const EncodeError&) {
      // A sampled event that does not fit this wire format: fail open
      // with the original request rather than drop traffic.
      metrics_.record_opaque(app, decision.level);
      decision.opaque = true;
      decision.outs.clear();
      return decision;
    }
    OutboundRequest out;
    out.body = std::move(encoded.bytes);
    out.content_type_header = std::move(encoded.content_type_header);
    out.content_encoding_header = std::move(encoded.content_encoding_header);
    out.carries_fate = static_cast<int>(i) == outcome.fate_output_index;
    out.event_type = out_event.event_type;
    out.timestamp_ms = out_event.timestamp_ms;
    outs.push_back(std::move(out));
    emitted_types.push_back(out_event.event_type);
  }

  metrics_.record_analytics_event(app, decision.level, original_type, emitted_types,
                                  outcome.fate, outcome.injected);

  decision.kind = PipelineDecision::Kind::kAnonymized;
  decision.fate = outcome.fate;
  decision.injected = outcome.injected;
  decision.outs = std::move(outs);
  return decision;
}

}  // namespace anonproxy
