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

#include "anonproxy/config.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anonproxy/http.hpp"

namespace anonproxy {

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

Config Config::parse(std::string_view json_text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(origin + ": malformed config: " + ex.what());
  }
  if (!doc.is_object()) {
    throw ConfigError(origin + ": config must be a JSON object");
  }

  auto require_string = [&](const char* field) -> std::string {
    if (!doc.contains(field)) {
      throw ConfigError(origin + ": missing required field \"" + field + "\"");
    }
    if (!doc[field].is_string()) {
      throw ConfigError(origin + ": field \"" + field + "\" must be a string");
    }
    return doc[field].get<std::string>();
  };

  Config config;
  config.host_list_path = require_string("host_list_path");
  config.dgh_rules_path = require_string("dgh_rules_path");
  config.listen = doc.value("listen", config.listen);
  config.min_len = doc.value("min_len", config.min_len);
  if (config.min_len == 0) {
    throw ConfigError(origin + ": field \"min_len\" must be >= 1");
  }
  if (doc.contains("rng_seed")) {
    if (!doc["rng_seed"].is_number_unsigned() && !doc["rng_seed"].is_number_integer()) {
      throw ConfigError(origin + ": field \"rng_seed\" must be an integer");
    }
    config.rng_seed = doc["rng_seed"].get<uint64_t>();
  }
  if (doc.contains("per_app_levels")) {
    if (!doc["per_app_levels"].is_object()) {
      throw ConfigError(origin + ": field \"per_app_levels\" must map app names to levels");
    }
    for (const auto& [app, level] : doc["per_app_levels"].items()) {
      try {
        config.per_app_levels[app] = parse_privacy_level(level.get<std::string>());
      } catch (const ConfigError& ex) {
        throw ConfigError(origin + ": per_app_levels[\"" + app + "\"]: " + ex.what());
      }
    }
  }
  if (doc.contains("tls")) {
    const auto& tls = doc["tls"];
    config.tls.enabled = tls.value("enabled", false);
    config.tls.ca_out_path = tls.value("ca_out_path", config.tls.ca_out_path);
    config.tls.ca_key_path = tls.value("ca_key_path", config.tls.ca_key_path);
  }
  config.report_out_path = doc.value("report_out_path", config.report_out_path);
  if (doc.contains("upstream_stub")) {
    config.upstream_stub = doc["upstream_stub"].get<std::string>();
  }
  if (doc.contains("event_buffer_path")) {
    config.event_buffer_path = doc["event_buffer_path"].get<std::string>();
  }
  config.persist_learned_hosts = doc.value("persist_learned_hosts", false);
  if (doc.contains("learned_hosts_path")) {
    config.learned_hosts_path = doc["learned_hosts_path"].get<std::string>();
  }
  if (doc.contains("client_apps")) {
    for (const auto& [ip, app] : doc["client_apps"].items()) {
      config.client_apps[ip] = app.get<std::string>();
    }
  }
  return config;
}

std::string Config::to_json() const {
  nlohmann::ordered_json doc;
  doc["listen"] = listen;
  doc["host_list_path"] = host_list_path;
  doc["dgh_rules_path"] = dgh_rules_path;
  doc["min_len"] = min_len;
  if (rng_seed) doc["rng_seed"] = *rng_seed;
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (const auto& [app, level] : per_app_levels) {
    levels[app] = std::string(to_string(level));
  }
  doc["per_app_levels"] = std::move(levels);
  doc["tls"] = {{"enabled", tls.enabled},
                {"ca_out_path", tls.ca_out_path},
                {"ca_key_path", tls.ca_key_path}};
  doc["report_out_path"] = report_out_path;
  if (upstream_stub) doc["upstream_stub"] = *upstream_stub;
  if (event_buffer_path) doc["event_buffer_path"] = *event_buffer_path;
  doc["persist_learned_hosts"] = persist_learned_hosts;
  if (learned_hosts_path) doc["learned_hosts_path"] = *learned_hosts_path;
  if (!client_apps.empty()) {
    nlohmann::ordered_json apps = nlohmann::ordered_json::object();
    for (const auto& [ip, app] : client_apps) apps[ip] = app;
    doc["client_apps"] = std::move(apps);
  }
  return doc.dump(2);
}

std::pair<std::string, int> Config::listen_host_port() const {
  auto [host, port] = split_host_port(listen, 8080);
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

uint64_t Config::effective_seed() const {
  if (rng_seed) return *rng_seed;
  std::random_device rd;
  return (static_cast<uint64_t>(rd()) << 32) ^ rd();
}

std::shared_ptr<Pipeline> build_pipeline(const Config& config) {
  AnalyticsDomainDb db = AnalyticsDomainDb::load(config.host_list_path);
  DghRuleSet rules = DghRuleSet::load(config.dgh_rules_path);
  PipelineOptions options;
  options.per_app_levels = config.per_app_levels;
  options.min_len = config.min_len;
  options.seed = config.effective_seed();
  return std::make_shared<Pipeline>(std::move(db), KeywordSet(), std::move(rules),
                                    std::move(options));
}

}  // namespace anonproxy
