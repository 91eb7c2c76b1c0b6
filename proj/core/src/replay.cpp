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

#include "anonproxy/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "anonproxy/codec.hpp"
#include "anonproxy/http.hpp"

namespace anonproxy {

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

bool body_is_text(std::string_view body) {
  return std::all_of(body.begin(), body.end(), [](unsigned char c) {
    return c == '\t' || c == '\n' || c == '\r' || (c >= 0x20 && c < 0x7f);
  });
}

HeaderList headers_from_value(const Value& v, std::size_t index) {
  HeaderList headers;
  if (!v.is_array()) {
    throw ConfigError("record " + std::to_string(index) + ": \"headers\" must be an array");
  }
  for (const auto& item : v.items()) {
    if (!item.is_array() || item.items().size() != 2 || !item.items()[0].is_string() ||
        !item.items()[1].is_string()) {
      throw ConfigError("record " + std::to_string(index) +
                        ": header entries must be [name, value] string pairs");
    }
    headers.emplace_back(item.items()[0].as_string(), item.items()[1].as_string());
  }
  return headers;
}

}  // namespace

std::string base64_encode(std::string_view data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= data.size()) {
    uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                 (static_cast<unsigned char>(data[i + 1]) << 8) |
                 static_cast<unsigned char>(data[i + 2]);
    out += kB64Alphabet[(n >> 18) & 63];
    out += kB64Alphabet[(n >> 12) & 63];
    out += kB64Alphabet[(n >> 6) & 63];
    out += kB64Alphabet[n & 63];
    i += 3;
  }
  const std::size_t rest = data.size() - i;
  if (rest == 1) {
    uint32_t n = static_cast<unsigned char>(data[i]) << 16;
    out += kB64Alphabet[(n >> 18) & 63];
    out += kB64Alphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                 (static_cast<unsigned char>(data[i + 1]) << 8);
    out += kB64Alphabet[(n >> 18) & 63];
    out += kB64Alphabet[(n >> 12) & 63];
    out += kB64Alphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = value_of(c);
    if (v < 0) throw DecodeError("invalid base64 character");
    acc = (acc << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xff);
    }
  }
  return out;
}

ReplayRecord parse_replay_record(std::string_view line, std::size_t index) {
  Value doc;
  try {
    doc = parse_json(line);
  } catch (const DecodeError& ex) {
    throw ConfigError("record " + std::to_string(index) + ": " + ex.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("record " + std::to_string(index) + ": not a JSON object");
  }

  ReplayRecord record;
  auto required = [&](const char* field) -> const Value& {
    const Value* v = doc.find(field);
    if (v == nullptr || !v->is_string()) {
      throw ConfigError("record " + std::to_string(index) + ": missing string field \"" +
                        field + "\"");
    }
    return *v;
  };
  record.app = required("app").as_string();
  record.url = required("url").as_string();
  if (const Value* m = doc.find("method")) record.method = m->as_string();
  if (const Value* h = doc.find("headers")) record.headers = headers_from_value(*h, index);
  if (const Value* ts = doc.find("timestamp")) {
    if (ts->is_number()) record.timestamp_ms = static_cast<int64_t>(ts->as_double());
  }
  if (const Value* b64 = doc.find("body_b64")) {
    try {
      record.body = base64_decode(b64->as_string());
    } catch (const DecodeError& ex) {
      throw ConfigError("record " + std::to_string(index) + ": " + ex.what());
    }
  } else if (const Value* body = doc.find("body")) {
    record.body = body->as_string();
  }
  return record;
}

std::string replay_record_to_line(const ReplayRecord& record) {
  Value doc = Value::object();
  doc.set("app", Value(record.app));
  doc.set("method", Value(record.method));
  doc.set("url", Value(record.url));
  Value headers = Value::array();
  for (const auto& [name, value] : record.headers) {
    Value pair = Value::array();
    pair.push_back(Value(name));
    pair.push_back(Value(value));
    headers.push_back(std::move(pair));
  }
  doc.set("headers", std::move(headers));
  doc.set("timestamp", Value(record.timestamp_ms));
  if (body_is_text(record.body)) {
    doc.set("body", Value(record.body));
  } else {
    doc.set("body_b64", Value(base64_encode(record.body)));
  }
  return dump_json(doc);
}

std::vector<ReplayRecord> load_replay_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open replay file: " + path);
  std::vector<ReplayRecord> records;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++index;
      continue;
    }
    records.push_back(parse_replay_record(line, index));
    ++index;
  }
  return records;
}

namespace {

class SimulatedForwarder final : public ReplayForwarder {
 public:
  int forward(const ReplayRecord&) override { return 200; }
};

class StubForwarder final : public ReplayForwarder {
 public:
  StubForwarder(std::string host, int port) : host_(std::move(host)), port_(port) {}

  int forward(const ReplayRecord& record) override {
    ParsedUrl url = parse_url(record.url);
    HttpRequest request;
    request.method = record.method;
    request.path_query = url.path_query();
    request.headers = record.headers;
    strip_hop_by_hop(request.headers);
    if (!request.has_header("Host")) {
      request.headers.emplace_back("Host", url.host);
    }
    request.body = record.body;

    std::lock_guard lock(mutex_);
    if (!connection_) {
      connection_ = std::make_unique<UpstreamConnection>(host_, port_, false, url.host);
    }
    try {
      return connection_->round_trip(request).status;
    } catch (const Error&) {
      connection_.reset();
      return 0;  // counted as rejected
    }
  }

 private:
  std::string host_;
  int port_;
  std::mutex mutex_;
  std::unique_ptr<UpstreamConnection> connection_;
};

struct RecordOutput {
  std::vector<ReplayRecord> records;
};

ReplayRecord rewritten_record(const ReplayRecord& original, const OutboundRequest& out) {
  ReplayRecord record = original;
  record.body = out.body;
  record.timestamp_ms = out.timestamp_ms;
  HeaderList updated;
  bool have_type = false;
  for (const auto& [name, value] : original.headers) {
    if (iequals(name, "Content-Type")) {
      updated.emplace_back(name, out.content_type_header);
      have_type = true;
    } else if (iequals(name, "Content-Encoding")) {
      if (!out.content_encoding_header.empty()) {
        updated.emplace_back(name, out.content_encoding_header);
      }
    } else if (iequals(name, "Content-Length")) {
      updated.emplace_back(name, std::to_string(out.body.size()));
    } else {
      updated.emplace_back(name, value);
    }
  }
  if (!have_type && !out.content_type_header.empty()) {
    updated.emplace_back("Content-Type", out.content_type_header);
  }
  record.headers = std::move(updated);
  return record;
}

}  // namespace

std::unique_ptr<ReplayForwarder> make_stub_forwarder(const std::string& host, int port) {
  return std::make_unique<StubForwarder>(host, port);
}

RunMetrics run_replay_with_pipeline(Pipeline& pipeline,
                                    const std::vector<ReplayRecord>& records,
                                    const std::string& output_path,
                                    ReplayForwarder* forwarder) {
  SimulatedForwarder simulated;
  ReplayForwarder* sink = forwarder != nullptr ? forwarder : &simulated;

  // Group records by app, keeping file order within each group. Apps run
  // in parallel; outputs are reassembled by input index so the result is
  // independent of scheduling.
  std::map<std::string, std::vector<std::size_t>> by_app;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_app[records[i].app].push_back(i);
  }

  std::vector<RecordOutput> outputs(records.size());

  auto process_app = [&](const std::vector<std::size_t>& indices) {
    for (std::size_t index : indices) {
      const ReplayRecord& record = records[index];
      ParsedUrl url;
      try {
        url = parse_url(record.url);
      } catch (const Error& ex) {
        throw ConfigError("record " + std::to_string(index) + ": " + ex.what());
      }

      PipelineDecision decision =
          pipeline.process(record.app, record.method, url.host, url.path, url.query,
                           record.headers, record.body, record.timestamp_ms);

      auto deliver = [&](const ReplayRecord& out_record) {
        const int status = sink->forward(out_record);
        pipeline.metrics().record_forward(record.app, url.host, status);
        outputs[index].records.push_back(out_record);
      };

      if (decision.kind == PipelineDecision::Kind::kForwardRaw) {
        deliver(record);
      } else {
        for (const OutboundRequest& out : decision.outs) {
          deliver(rewritten_record(record, out));
        }
      }
    }
  };

  std::vector<std::future<void>> tasks;
  tasks.reserve(by_app.size());
  for (const auto& [app, indices] : by_app) {
    tasks.push_back(std::async(std::launch::async, process_app, std::cref(indices)));
  }
  for (auto& task : tasks) task.get();  // propagate the first failure

  if (!output_path.empty()) {
    std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write replay output: " + output_path);
    for (const auto& slot : outputs) {
      for (const auto& record : slot.records) {
        out << replay_record_to_line(record) << "\n";
      }
    }
  }

  return pipeline.metrics().snapshot();
}

RunMetrics run_replay(const Config& config, const std::string& input_path,
                      const std::string& output_path, ReplayForwarder* forwarder) {
  const std::vector<ReplayRecord> records = load_replay_file(input_path);
  std::shared_ptr<Pipeline> pipeline = build_pipeline(config);

  std::unique_ptr<ReplayForwarder> stub;
  if (forwarder == nullptr && config.upstream_stub) {
    std::string target = *config.upstream_stub;
    if (target.starts_with("http://") || target.starts_with("https://")) {
      ParsedUrl url = parse_url(target);
      stub = make_stub_forwarder(url.host, url.port);
    } else {
      auto [host, port] = split_host_port(target, 80);
      stub = make_stub_forwarder(host, port);
    }
    forwarder = stub.get();
  }
  return run_replay_with_pipeline(*pipeline, records, output_path, forwarder);
}

// ---- synthetic corpus ------------------------------------------------------

const std::vector<std::string>& default_event_vocabulary() {
  static const std::vector<std::string> kVocabulary = {
      "CUSTOM_APP_EVENTS",
      "MOBILE_APP_INSTALL",
      "fb_sdk_initialize",
      "SessionStarted",
      "fb_mobile_activate_app",
      "InvalidConfig",
      "SdkInitialized",
      "shoplist_product_add",
      "DEFERRED_APP_LINK",
      "fb_mobile_login",
      "new_password_pv",
      "new_password_back",
      "ApplicationOpened",
      "fb_mobile_deactivate_app",
      "fb_sdk_settings_changed",
      "ApplicationBackgrounded",
      "event_build_property",
      "AdGetSignalsSucceeded",
      "fb_login_button_create",
      "ServerError",
  };
  return kVocabulary;
}

const std::vector<std::string>& default_corpus_hosts() {
  static const std::vector<std::string> kHosts = {
      "graph.facebook.com", "app.adjust.com",    "data.flurry.com",
      "t.appsflyer.com",    "api2.branch.io",    "ads.mopub.com",
  };
  return kHosts;
}

void gen_corpus(const CorpusSpec& spec, const std::string& out_path) {
  if (spec.events == 0) throw ConfigError("corpus size must be >= 1");
  if (spec.apps <= 0) throw ConfigError("corpus needs at least one app");

  const std::vector<std::string>& vocabulary =
      spec.vocabulary.empty() ? default_event_vocabulary() : spec.vocabulary;
  const std::vector<std::string>& hosts =
      spec.hosts.empty() ? default_corpus_hosts() : spec.hosts;

  // Zipf-like cumulative weights over vocabulary ranks.
  std::vector<double> cumulative(vocabulary.size());
  double total = 0.0;
  for (std::size_t r = 0; r < vocabulary.size(); ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), spec.skew);
    cumulative[r] = total;
  }

  Mt19937RandomSource rng(spec.seed);
  auto pick_event = [&]() -> const std::string& {
    const double u = rng.next() * total;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t rank = static_cast<std::size_t>(it - cumulative.begin());
    if (rank >= vocabulary.size()) rank = vocabulary.size() - 1;
    return vocabulary[rank];
  };

  static const char* kModels[] = {"Android SDK built for x86", "Pixel 4", "SM-G960F",
                                  "Redmi Note 8"};
  static const char* kCountries[] = {"US", "IT", "DE", "BR", "IN", "GB"};
  static const char* kOperators[] = {"T-Mobile", "Vodafone", "Verizon", "TIM"};
  static const int kDpis[] = {560, 480, 440, 420};

  struct AppProfile {
    std::string name;
    std::string host;
    std::string device_id;
    std::string model;
    std::string country;
    std::string op;
    int dpi;
    int64_t clock;
    std::size_t session = 0;
  };

  std::vector<AppProfile> profiles;
  profiles.reserve(static_cast<std::size_t>(spec.apps));
  for (int a = 0; a < spec.apps; ++a) {
    AppProfile profile;
    char name[16];
    std::snprintf(name, sizeof(name), "app%02d", a + 1);
    profile.name = name;
    profile.host = hosts[static_cast<std::size_t>(a) % hosts.size()];
    char device[40];
    std::snprintf(device, sizeof(device), "%08llx-%04llx-4%03llx-a%03llx-%012llx",
                  static_cast<unsigned long long>(rng.next() * 0xffffffffull),
                  static_cast<unsigned long long>(rng.next() * 0xffffull),
                  static_cast<unsigned long long>(rng.next() * 0xfffull),
                  static_cast<unsigned long long>(rng.next() * 0xfffull),
                  static_cast<unsigned long long>(rng.next() * 0xffffffffffffull));
    profile.device_id = device;
    profile.model = kModels[rng.uniform_index(std::size(kModels))];
    profile.country = kCountries[rng.uniform_index(std::size(kCountries))];
    profile.op = kOperators[rng.uniform_index(std::size(kOperators))];
    profile.dpi = kDpis[rng.uniform_index(std::size(kDpis))];
    profile.clock = 1609500000000LL + static_cast<int64_t>(rng.next() * 86400000.0);
    profiles.push_back(std::move(profile));
  }

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write corpus file: " + out_path);

  for (std::size_t i = 0; i < spec.events; ++i) {
    AppProfile& app = profiles[rng.uniform_index(profiles.size())];
    app.clock += 100 + static_cast<int64_t>(rng.next() * 2900.0);
    app.session += 1;
    const std::string& event = pick_event();

    ReplayRecord record;
    record.app = app.name;
    record.method = "POST";
    record.url = "https://" + app.host + "/v2/events";
    record.timestamp_ms = app.clock;

    const double wire = rng.next();
    if (wire < 0.15) {
      // urlencoded
      Value tree = Value::object();
      tree.set("event", Value(event));
      tree.set("device_id", Value(app.device_id));
      tree.set("model", Value(app.model));
      tree.set("country", Value(app.country));
      tree.set("session", Value(std::to_string(app.session)));
      std::string body;
      for (const auto& [k, v] : tree.members()) {
        if (!body.empty()) body += '&';
        body += url_encode(k) + "=" + url_encode(v.as_string());
      }
      record.headers.emplace_back("Content-Type", "application/x-www-form-urlencoded");
      record.body = std::move(body);
    } else {
      Value tree = Value::object();
      tree.set("event_type", Value(event));
      tree.set("device_id", Value(app.device_id));
      tree.set("model", Value(app.model));
      tree.set("country", Value(app.country));
      tree.set("operator", Value(app.op));
      tree.set("screen_dpi", Value(static_cast<int64_t>(app.dpi)));
      tree.set("session", Value(static_cast<int64_t>(app.session)));
      tree.set("first_install_time", Value(static_cast<int64_t>(1609930857411LL)));
      const std::string plain = dump_json(tree);
      record.headers.emplace_back("Content-Type", "application/json");
      if (wire < 0.25) {
        record.headers.emplace_back("Content-Encoding", "gzip");
        record.body = gzip_compress(plain);
      } else if (wire < 0.30) {
        record.headers.emplace_back("Content-Encoding", "deflate");
        record.body = deflate_compress(plain);
      } else {
        record.body = plain;
      }
    }
    out << replay_record_to_line(record) << "\n";
  }
}

void write_reports(const RunMetrics& metrics, const std::string& base_path) {
  const std::vector<LevelReportRow> rows = summarize_levels({metrics});
  auto write = [](const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write report file: " + path);
    out << content;
  };
  write(base_path + ".metrics.json", metrics.to_json() + "\n");
  write(base_path + ".csv", report_csv(rows));
  write(base_path + ".txt", report_table(rows));
  write(base_path + ".acceptance.csv", acceptance_csv(acceptance_rates(metrics)));
}

}  // namespace anonproxy
