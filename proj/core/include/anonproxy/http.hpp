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

#ifndef ANONPROXY_HTTP_HPP_
#define ANONPROXY_HTTP_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "anonproxy/model.hpp"

typedef struct ssl_st SSL;

namespace anonproxy {

// Thin RAII wrapper over a connected socket, optionally wearing a TLS
// session. Whole-message reads and writes only; no partial-write state.
class Stream {
 public:
  Stream() = default;
  explicit Stream(int fd) : fd_(fd) {}
  ~Stream();

  Stream(Stream&& other) noexcept;
  Stream& operator=(Stream&& other) noexcept;
  Stream(const Stream&) = delete;
  Stream& operator=(const Stream&) = delete;

  // Takes ownership of a completed TLS session over this socket.
  void attach_ssl(SSL* ssl);

  // >0 bytes read, 0 on orderly EOF, -1 on error.
  long read_some(char* buf, std::size_t n);
  bool write_all(std::string_view data);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();

 private:
  int fd_ = -1;
  SSL* ssl_ = nullptr;
};

// Line/body reader with an internal buffer, for HTTP parsing.
class BufferedReader {
 public:
  explicit BufferedReader(Stream& stream) : stream_(stream) {}

  // Reads up to and including CRLF (or LF); strips the terminator.
  // nullopt on EOF before any byte of the line.
  std::optional<std::string> read_line();
  bool read_exact(std::string& out, std::size_t n);
  std::string read_to_eof();

 private:
  bool fill();

  Stream& stream_;
  std::string buffer_;
  std::size_t pos_ = 0;
};

struct HttpRequest {
  std::string method;
  std::string target;  // as received: absolute-form, origin-form or authority-form
  std::string version = "HTTP/1.1";
  HeaderList headers;
  std::string body;

  // Filled in by the proxy after resolving the target.
  std::string host;
  int port = 80;
  bool tls = false;
  std::string path_query;  // origin-form target for upstream

  std::string header(std::string_view name) const;
  bool has_header(std::string_view name) const;
};

struct HttpResponse {
  std::string version = "HTTP/1.1";
  int status = 0;
  std::string reason;
  HeaderList headers;
  std::string body;

  std::string header(std::string_view name) const;
};

// Parses one request from the stream; decodes chunked bodies. nullopt on
// a clean EOF between requests; throws Error on malformed traffic.
std::optional<HttpRequest> read_request(BufferedReader& reader);

// Parses one response. `head_request` suppresses body reading.
HttpResponse read_response(BufferedReader& reader, bool head_request = false);

// Origin-form serialization with an exact Content-Length; hop-by-hop
// headers are the caller's business.
std::string serialize_request(const HttpRequest& request);
std::string serialize_response(const HttpResponse& response);

// Drops headers that must not travel end to end. Content-Length is
// re-derived from the actual body on serialization.
void strip_hop_by_hop(HeaderList& headers);

bool is_hop_by_hop(std::string_view name);
bool iequals(std::string_view a, std::string_view b);

// "host:port" with defaulting; understands bracketed IPv6 literals.
std::pair<std::string, int> split_host_port(std::string_view authority, int default_port);

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 80;
  std::string path = "/";
  std::string query;  // no '?'

  std::string path_query() const { return query.empty() ? path : path + "?" + query; }
};

// http:// and https:// URLs only.
ParsedUrl parse_url(std::string_view url);

// Blocking TCP connect; throws Error on failure.
Stream connect_tcp(const std::string& host, int port, int timeout_ms = 10000);

// One reusable upstream connection: serializes a request, reads the
// response, reconnects once if a kept-alive peer went away.
class UpstreamConnection {
 public:
  UpstreamConnection(std::string host, int port, bool tls, std::string sni_host);
  ~UpstreamConnection();

  UpstreamConnection(UpstreamConnection&&) = delete;
  UpstreamConnection& operator=(UpstreamConnection&&) = delete;

  HttpResponse round_trip(const HttpRequest& request);

 private:
  void ensure_connected();
  HttpResponse try_round_trip(const HttpRequest& request);

  std::string host_;
  int port_;
  bool tls_;
  std::string sni_host_;
  Stream stream_;
  std::unique_ptr<BufferedReader> reader_;
  void* ssl_ctx_ = nullptr;  // SSL_CTX, opaque here
};

}  // namespace anonproxy

#endif  // ANONPROXY_HTTP_HPP_
