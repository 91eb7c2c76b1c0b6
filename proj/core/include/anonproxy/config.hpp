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

#ifndef ANONPROXY_CONFIG_HPP_
#define ANONPROXY_CONFIG_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "anonproxy/model.hpp"
#include "anonproxy/pipeline.hpp"

namespace anonproxy {

// Operator configuration: where to listen, per-app privacy levels, rule
// and host-list files, determinism knobs. Unknown apps resolve to NONE.
struct Config {
  std::string listen = "127.0.0.1:8080";
  std::map<std::string, PrivacyLevel> per_app_levels;
  std::string host_list_path;
  std::string dgh_rules_path;
  std::size_t min_len = 5;
  std::optional<uint64_t> rng_seed;  // set => the whole run is deterministic

  struct Tls {
    bool enabled = false;
    std::string ca_out_path = "anonproxy-ca.pem";
    std::string ca_key_path = "anonproxy-ca.key";
  } tls;

  std::string report_out_path = "anonproxy-report";
  std::optional<std::string> upstream_stub;      // "host:port" or http URL
  std::optional<std::string> event_buffer_path;  // JSONL snapshot persistence
  bool persist_learned_hosts = false;
  std::optional<std::string> learned_hosts_path;
  std::map<std::string, std::string> client_apps;  // client IP -> app name

  // Throws ConfigError naming the missing/bad field.
  static Config load(const std::string& path);
  static Config parse(std::string_view json_text, const std::string& origin);

  // Effective config as JSON; parse(to_json()) reproduces the behavior.
  std::string to_json() const;

  std::pair<std::string, int> listen_host_port() const;
  uint64_t effective_seed() const;  // rng_seed, or entropy when unset
};

// Loads the host list and DGH rules and assembles the shared pipeline.
std::shared_ptr<Pipeline> build_pipeline(const Config& config);

}  // namespace anonproxy

#endif  // ANONPROXY_CONFIG_HPP_
