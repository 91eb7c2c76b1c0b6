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

#ifndef ANONPROXY_PROXY_HPP_
#define ANONPROXY_PROXY_HPP_

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "anonproxy/pipeline.hpp"
#include "anonproxy/tls.hpp"

namespace anonproxy {

// Upstream verdict for one forwarded request.
struct ForwardResult {
  int status = 0;
  bool accepted = false;  // 2xx
  int64_t latency_ms = 0;
};

struct ProxyConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 0;  // 0 picks an ephemeral port

  // When set, every upstream connection goes to this address while the
  // logical Host / SNI stays the original target. Lets a recording stub
  // stand in for real analytics backends.
  std::optional<std::pair<std::string, int>> upstream_override;

  bool tls_interception = false;
  std::string ca_cert_path = "anonproxy-ca.pem";
  std::string ca_key_path = "anonproxy-ca.key";

  // Client address -> app name, consulted after the X-App-Name header.
  std::map<std::string, std::string> client_apps;
};

// Forward HTTP proxy (CONNECT for TLS) running the anonymization pipeline
// on analytics requests and passing everything else through unchanged.
// With interception off, CONNECT degrades to a blind byte tunnel.
class ProxyServer {
 public:
  ProxyServer(ProxyConfig config, std::shared_ptr<Pipeline> pipeline);
  ~ProxyServer();

  // Binds, writes the CA certificate when interception is on, starts the
  // accept loop. Returns the bound port. Throws Error on bind failure.
  int start();
  void stop();

  int port() const { return port_; }
  Pipeline& pipeline() { return *pipeline_; }

  // One line per handled request: app, host, verdict, action, status.
  using LogSink = std::function<void(const std::string&)>;
  void set_log_sink(LogSink sink) { log_ = std::move(sink); }

 private:
  struct ClientConnection;

  void accept_loop();
  void handle_connection(int fd, std::string client_ip);
  void serve_requests(ClientConnection& conn, BufferedReader& reader, bool in_tls_tunnel,
                      const std::string& tunnel_host, int tunnel_port);
  bool handle_one(ClientConnection& conn, HttpRequest& request, bool tls);
  void handle_connect(ClientConnection& conn, BufferedReader& reader,
                      const HttpRequest& request);
  std::string resolve_app(const HttpRequest& request, const std::string& client_ip) const;
  void log_line(const std::string& app, const std::string& host, const std::string& verdict,
                const std::string& action, int status);

  void track_fd(int fd);
  void untrack_fd(int fd);

  ProxyConfig config_;
  std::shared_ptr<Pipeline> pipeline_;
  std::optional<CertificateAuthority> ca_;
  LogSink log_;

  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::vector<std::thread> workers_;
  std::mutex workers_mutex_;
  std::set<int> client_fds_;
  std::mutex fds_mutex_;
};

}  // namespace anonproxy

#endif  // ANONPROXY_PROXY_HPP_
