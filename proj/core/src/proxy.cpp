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

#include "anonproxy/proxy.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace anonproxy {

namespace {

int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

HttpResponse make_simple_response(int status, const std::string& reason,
                                  const std::string& body = {}) {
  HttpResponse resp;
  resp.status = status;
  resp.reason = reason;
  resp.body = body;
  if (!body.empty()) {
    resp.headers.emplace_back("Content-Type", "text/plain");
  }
  return resp;
}

// Blind byte pump for un-intercepted CONNECT tunnels.
void tunnel_bidirectional(Stream& client, Stream& upstream) {
  pollfd fds[2];
  fds[0] = {client.fd(), POLLIN, 0};
  fds[1] = {upstream.fd(), POLLIN, 0};
  char buf[16384];
  while (true) {
    fds[0].revents = fds[1].revents = 0;
    if (::poll(fds, 2, 30000) <= 0) return;
    if (fds[0].revents & (POLLIN | POLLHUP)) {
      long n = client.read_some(buf, sizeof(buf));
      if (n <= 0 || !upstream.write_all({buf, static_cast<std::size_t>(n)})) return;
    }
    if (fds[1].revents & (POLLIN | POLLHUP)) {
      long n = upstream.read_some(buf, sizeof(buf));
      if (n <= 0 || !client.write_all({buf, static_cast<std::size_t>(n)})) return;
    }
    if ((fds[0].revents | fds[1].revents) & (POLLERR | POLLNVAL)) return;
  }
}

}  // namespace

// Per-client-connection state: the socket plus kept-alive upstream
// connections keyed by (host, port, tls).
struct ProxyServer::ClientConnection {
  Stream stream;
  std::string client_ip;
  ProxyServer* server = nullptr;
  std::map<std::tuple<std::string, int, bool>, std::unique_ptr<UpstreamConnection>> upstreams;

  UpstreamConnection& upstream_for(const std::string& host, int port, bool tls,
                                   const ProxyConfig& config) {
    auto key = std::make_tuple(host, port, tls);
    auto it = upstreams.find(key);
    if (it == upstreams.end()) {
      std::string addr = host;
      int addr_port = port;
      if (config.upstream_override) {
        addr = config.upstream_override->first;
        addr_port = config.upstream_override->second;
      }
      it = upstreams
               .emplace(key, std::make_unique<UpstreamConnection>(addr, addr_port, tls, host))
               .first;
    }
    return *it->second;
  }
};

ProxyServer::ProxyServer(ProxyConfig config, std::shared_ptr<Pipeline> pipeline)
    : config_(std::move(config)), pipeline_(std::move(pipeline)) {}

ProxyServer::~ProxyServer() { stop(); }

int ProxyServer::start() {
  if (config_.tls_interception) {
    ca_ = CertificateAuthority::load_or_generate(config_.ca_cert_path, config_.ca_key_path);
  }

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(config_.listen_port));
  if (::inet_pton(AF_INET, config_.listen_host.c_str(), &addr.sin_addr) != 1) {
    throw ConfigError("bad listen address: " + config_.listen_host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("cannot bind " + config_.listen_host + ":" +
                std::to_string(config_.listen_port) + ": " + why);
  }
  if (::listen(listen_fd_, 64) != 0) throw Error("listen() failed");

  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  return port_;
}

void ProxyServer::stop() {
  if (!running_.exchange(false)) {
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();

  {
    std::lock_guard lock(fds_mutex_);
    for (int fd : client_fds_) {
      ::shutdown(fd, SHUT_RDWR);
    }
  }
  std::lock_guard lock(workers_mutex_);
  for (auto& worker : workers_) {
    if (worker.joinable()) worker.join();
  }
  workers_.clear();
}

void ProxyServer::track_fd(int fd) {
  std::lock_guard lock(fds_mutex_);
  client_fds_.insert(fd);
}

void ProxyServer::untrack_fd(int fd) {
  std::lock_guard lock(fds_mutex_);
  client_fds_.erase(fd);
}

void ProxyServer::accept_loop() {
  while (running_) {
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (running_) continue;
      break;
    }
    char ip[INET_ADDRSTRLEN] = "?";
    ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof(ip));

    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, fd, ip = std::string(ip)] { handle_connection(fd, ip); });
  }
}

void ProxyServer::handle_connection(int fd, std::string client_ip) {
  timeval tv{30, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  track_fd(fd);

  ClientConnection conn;
  conn.stream = Stream(fd);
  conn.client_ip = std::move(client_ip);
  conn.server = this;

  try {
    BufferedReader reader(conn.stream);
    serve_requests(conn, reader, false, {}, 0);
  } catch (const std::exception&) {
    // Parse failures and peer resets just end the connection.
  }
  untrack_fd(fd);
}

void ProxyServer::serve_requests(ClientConnection& conn, BufferedReader& reader,
                                 bool in_tls_tunnel, const std::string& tunnel_host,
                                 int tunnel_port) {
  while (running_) {
    std::optional<HttpRequest> request;
    try {
      request = read_request(reader);
    } catch (const Error&) {
      break;
    }
    if (!request) break;

    if (request->method == "CONNECT") {
      if (in_tls_tunnel) break;  // no nesting
      handle_connect(conn, reader, *request);
      break;  // handle_connect consumes the connection
    }

    // Resolve the upstream target.
    if (request->target.starts_with("http://") || request->target.starts_with("https://")) {
      ParsedUrl url = parse_url(request->target);
      request->host = url.host;
      request->port = url.port;
      request->tls = url.scheme == "https";
      request->path_query = url.path_query();
    } else if (in_tls_tunnel) {
      request->host = tunnel_host;
      request->port = tunnel_port;
      request->tls = true;
      request->path_query = request->target;
    } else {
      // Origin-form to a plain proxy: fall back to the Host header.
      auto [host, port] = split_host_port(request->header("Host"), 80);
      if (host.empty()) {
        conn.stream.write_all(
            serialize_response(make_simple_response(400, "Bad Request", "no host")));
        break;
      }
      request->host = host;
      request->port = port;
      request->tls = false;
      request->path_query = request->target;
    }

    const bool keep_going = handle_one(conn, *request, request->tls);
    if (!keep_going) break;
    if (iequals(request->header("Connection"), "close")) break;
  }
}

std::string ProxyServer::resolve_app(const HttpRequest& request,
                                     const std::string& client_ip) const {
  std::string app = request.header("X-App-Name");
  if (!app.empty()) return app;
  if (auto it = config_.client_apps.find(client_ip); it != config_.client_apps.end()) {
    return it->second;
  }
  return "default";
}

void ProxyServer::log_line(const std::string& app, const std::string& host,
                           const std::string& verdict, const std::string& action,
                           int status) {
  if (!log_) return;
  log_("app=" + app + " host=" + host + " verdict=" + verdict + " action=" + action +
       " status=" + std::to_string(status));
}

bool ProxyServer::handle_one(ClientConnection& conn, HttpRequest& request, bool tls) {
  const std::string app = resolve_app(request, conn.client_ip);

  std::string path = request.path_query;
  std::string query;
  if (auto q = path.find('?'); q != std::string::npos) {
    query = path.substr(q + 1);
    path.resize(q);
  }

  PipelineDecision decision;
  try {
    decision = pipeline_->process(app, request.method, request.host, path, query,
                                  request.headers, request.body, now_ms());
  } catch (const std::exception&) {
    // A pipeline bug must not take user traffic down; fail open.
    decision = PipelineDecision{};
  }

  const std::string verdict =
      !decision.classification.analytics ? "non-analytics"
      : decision.classification.matched_by == MatchedBy::kHost ? "analytics-host"
                                                               : "analytics-keyword";

  HttpRequest upstream_request = request;
  strip_hop_by_hop(upstream_request.headers);
  if (!upstream_request.has_header("Host")) {
    upstream_request.headers.emplace_back("Host", request.host);
  }

  auto forward = [&](const HttpRequest& out) -> std::optional<HttpResponse> {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      UpstreamConnection& upstream =
          conn.upstream_for(request.host, request.port, tls, config_);
      HttpResponse resp = upstream.round_trip(out);
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
      (void)elapsed;
      pipeline_->metrics().record_forward(app, request.host, resp.status);
      return resp;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  if (decision.kind == PipelineDecision::Kind::kForwardRaw) {
    auto resp = forward(upstream_request);
    if (!resp) {
      conn.stream.write_all(
          serialize_response(make_simple_response(502, "Bad Gateway", "upstream failed")));
      log_line(app, request.host, verdict, "forward", 502);
      return false;
    }
    log_line(app, request.host, verdict,
             decision.opaque ? "forward-opaque" : "forward", resp->status);
    return conn.stream.write_all(serialize_response(*resp));
  }

  // Anonymized: send each rewritten request; the client gets the response
  // of the one carrying the surviving event, or a synthetic 200 when the
  // event was removed.
  std::optional<HttpResponse> fate_response;
  bool upstream_ok = true;
  for (const OutboundRequest& out : decision.outs) {
    HttpRequest rewritten = upstream_request;
    rewritten.body = out.body;
    HeaderList updated;
    bool have_type = false;
    for (auto& [name, value] : rewritten.headers) {
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
    rewritten.headers = std::move(updated);

    auto resp = forward(rewritten);
    if (!resp) {
      upstream_ok = false;
      break;
    }
    if (out.carries_fate) fate_response = *resp;
  }

  if (!upstream_ok) {
    conn.stream.write_all(
        serialize_response(make_simple_response(502, "Bad Gateway", "upstream failed")));
    log_line(app, request.host, verdict, std::string(to_string(decision.fate)), 502);
    return false;
  }

  HttpResponse to_client;
  if (fate_response) {
    to_client = *fate_response;
  } else {
    // Removed: the hosting app must see success, not an error or a
    // retriable failure.
    to_client = make_simple_response(200, "OK");
  }
  std::string action = std::string(to_string(decision.fate));
  if (decision.injected) action = "inject+" + action;
  log_line(app, request.host, verdict, action, to_client.status);
  return conn.stream.write_all(serialize_response(to_client));
}

void ProxyServer::handle_connect(ClientConnection& conn, BufferedReader& reader,
                                 const HttpRequest& request) {
  auto [host, port] = split_host_port(request.target, 443);
  if (host.empty()) {
    conn.stream.write_all(serialize_response(make_simple_response(400, "Bad Request")));
    return;
  }

  if (!config_.tls_interception) {
    // Blind tunnel: bytes pass through untouched.
    std::string addr = host;
    int addr_port = port;
    if (config_.upstream_override) {
      addr = config_.upstream_override->first;
      addr_port = config_.upstream_override->second;
    }
    Stream upstream;
    try {
      upstream = connect_tcp(addr, addr_port);
    } catch (const Error&) {
      conn.stream.write_all(serialize_response(make_simple_response(502, "Bad Gateway")));
      return;
    }
    conn.stream.write_all("HTTP/1.1 200 Connection Established\r\n\r\n");
    log_line("default", host, "connect-tunnel", "tunnel", 200);
    tunnel_bidirectional(conn.stream, upstream);
    return;
  }

  conn.stream.write_all("HTTP/1.1 200 Connection Established\r\n\r\n");

  SSL_CTX* ctx = ca_->server_context_for(host);
  SSL* ssl = SSL_new(ctx);
  SSL_set_fd(ssl, conn.stream.fd());
  if (SSL_accept(ssl) != 1) {
    SSL_free(ssl);
    log_line("default", host, "connect-mitm", "handshake-failed", 0);
    return;  // connection closed and logged
  }
  conn.stream.attach_ssl(ssl);

  BufferedReader tls_reader(conn.stream);
  serve_requests(conn, tls_reader, true, host, port);
}

}  // namespace anonproxy
