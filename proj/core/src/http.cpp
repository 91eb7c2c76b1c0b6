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

#include "anonproxy/http.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstring>

namespace anonproxy {

namespace {

constexpr std::size_t kMaxHeaderLine = 64 * 1024;
constexpr std::size_t kMaxBody = 64 * 1024 * 1024;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const std::string* find_header(const HeaderList& headers, std::string_view name) {
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) return &v;
  }
  return nullptr;
}

bool header_token_contains(std::string_view value, std::string_view token) {
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    if (comma == std::string_view::npos) comma = value.size();
    if (iequals(trim(value.substr(pos, comma - pos)), token)) return true;
    pos = comma + 1;
  }
  return false;
}

void read_chunked_body(BufferedReader& reader, std::string& body) {
  while (true) {
    auto line = reader.read_line();
    if (!line) throw Error("truncated chunked body");
    std::string_view size_token = trim(*line);
    if (auto semi = size_token.find(';'); semi != std::string_view::npos) {
      size_token = size_token.substr(0, semi);
    }
    std::size_t chunk_size = 0;
    auto [p, ec] = std::from_chars(size_token.data(), size_token.data() + size_token.size(),
                                   chunk_size, 16);
    if (ec != std::errc()) throw Error("bad chunk size");
    if (chunk_size == 0) break;
    if (body.size() + chunk_size > kMaxBody) throw Error("chunked body too large");
    std::string chunk;
    if (!reader.read_exact(chunk, chunk_size)) throw Error("truncated chunk");
    body += chunk;
    reader.read_line();  // chunk's trailing CRLF
  }
  // Trailers, until the blank line.
  while (true) {
    auto line = reader.read_line();
    if (!line || line->empty()) break;
  }
}

void read_headers(BufferedReader& reader, HeaderList& headers) {
  while (true) {
    auto line = reader.read_line();
    if (!line) throw Error("truncated headers");
    if (line->empty()) break;
    if (line->size() > kMaxHeaderLine) throw Error("header line too long");
    std::size_t colon = line->find(':');
    if (colon == std::string::npos) continue;  // tolerate garbage lines
    headers.emplace_back(std::string(trim(std::string_view(*line).substr(0, colon))),
                         std::string(trim(std::string_view(*line).substr(colon + 1))));
  }
}

void read_message_body(BufferedReader& reader, const HeaderList& headers, std::string& body,
                       bool allow_read_to_eof) {
  if (const std::string* te = find_header(headers, "Transfer-Encoding");
      te != nullptr && header_token_contains(*te, "chunked")) {
    read_chunked_body(reader, body);
    return;
  }
  if (const std::string* cl = find_header(headers, "Content-Length")) {
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(cl->data(), cl->data() + cl->size(), n);
    if (ec != std::errc() || n > kMaxBody) throw Error("bad Content-Length");
    if (n > 0 && !reader.read_exact(body, n)) throw Error("truncated body");
    return;
  }
  if (allow_read_to_eof) {
    body = reader.read_to_eof();
  }
}

}  // namespace

// ---- Stream ----------------------------------------------------------------

Stream::~Stream() { close(); }

Stream::Stream(Stream&& other) noexcept : fd_(other.fd_), ssl_(other.ssl_) {
  other.fd_ = -1;
  other.ssl_ = nullptr;
}

Stream& Stream::operator=(Stream&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    ssl_ = other.ssl_;
    other.fd_ = -1;
    other.ssl_ = nullptr;
  }
  return *this;
}

void Stream::attach_ssl(SSL* ssl) { ssl_ = ssl; }

long Stream::read_some(char* buf, std::size_t n) {
  if (ssl_ != nullptr) {
    int rc = SSL_read(ssl_, buf, static_cast<int>(n));
    if (rc > 0) return rc;
    int err = SSL_get_error(ssl_, rc);
    return err == SSL_ERROR_ZERO_RETURN ? 0 : -1;
  }
  while (true) {
    ssize_t rc = ::recv(fd_, buf, n, 0);
    if (rc >= 0) return static_cast<long>(rc);
    if (errno == EINTR) continue;
    return -1;
  }
}

bool Stream::write_all(std::string_view data) {
  std::size_t off = 0;
  while (off < data.size()) {
    long rc;
    if (ssl_ != nullptr) {
      int w = SSL_write(ssl_, data.data() + off, static_cast<int>(data.size() - off));
      rc = w > 0 ? w : -1;
    } else {
      ssize_t w = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (w < 0 && errno == EINTR) continue;
      rc = static_cast<long>(w);
    }
    if (rc <= 0) return false;
    off += static_cast<std::size_t>(rc);
  }
  return true;
}

void Stream::close() {
  if (ssl_ != nullptr) {
    SSL_shutdown(ssl_);
    SSL_free(ssl_);
    ssl_ = nullptr;
  }
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

// ---- BufferedReader --------------------------------------------------------

bool BufferedReader::fill() {
  std::array<char, 8192> chunk;
  long n = stream_.read_some(chunk.data(), chunk.size());
  if (n <= 0) return false;
  buffer_.append(chunk.data(), static_cast<std::size_t>(n));
  return true;
}

std::optional<std::string> BufferedReader::read_line() {
  while (true) {
    std::size_t nl = buffer_.find('\n', pos_);
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(pos_, nl - pos_);
      pos_ = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (pos_ > 1 << 20) {  // compact the consumed prefix
        buffer_.erase(0, pos_);
        pos_ = 0;
      }
      return line;
    }
    if (!fill()) {
      if (pos_ < buffer_.size()) {
        std::string rest = buffer_.substr(pos_);
        pos_ = buffer_.size();
        return rest;
      }
      return std::nullopt;
    }
  }
}

bool BufferedReader::read_exact(std::string& out, std::size_t n) {
  while (buffer_.size() - pos_ < n) {
    if (!fill()) return false;
  }
  out.append(buffer_, pos_, n);
  pos_ += n;
  if (pos_ == buffer_.size()) {
    buffer_.clear();
    pos_ = 0;
  }
  return true;
}

std::string BufferedReader::read_to_eof() {
  while (fill()) {
  }
  std::string rest = buffer_.substr(pos_);
  buffer_.clear();
  pos_ = 0;
  return rest;
}

// ---- messages --------------------------------------------------------------

std::string HttpRequest::header(std::string_view name) const {
  const std::string* v = find_header(headers, name);
  return v != nullptr ? *v : std::string();
}

bool HttpRequest::has_header(std::string_view name) const {
  return find_header(headers, name) != nullptr;
}

std::string HttpResponse::header(std::string_view name) const {
  const std::string* v = find_header(headers, name);
  return v != nullptr ? *v : std::string();
}

std::optional<HttpRequest> read_request(BufferedReader& reader) {
  auto line = reader.read_line();
  if (!line || line->empty()) return std::nullopt;

  HttpRequest req;
  std::size_t sp1 = line->find(' ');
  std::size_t sp2 = line->rfind(' ');
  if (sp1 == std::string::npos || sp2 == sp1) {
    throw Error("malformed request line: " + *line);
  }
  req.method = line->substr(0, sp1);
  req.target = line->substr(sp1 + 1, sp2 - sp1 - 1);
  req.version = line->substr(sp2 + 1);

  read_headers(reader, req.headers);
  if (req.method != "CONNECT") {
    read_message_body(reader, req.headers, req.body, false);
  }
  return req;
}

HttpResponse read_response(BufferedReader& reader, bool head_request) {
  auto line = reader.read_line();
  if (!line) throw Error("no response from upstream");

  HttpResponse resp;
  std::size_t sp1 = line->find(' ');
  if (sp1 == std::string::npos) throw Error("malformed status line: " + *line);
  resp.version = line->substr(0, sp1);
  std::size_t sp2 = line->find(' ', sp1 + 1);
  std::string code = sp2 == std::string::npos ? line->substr(sp1 + 1)
                                              : line->substr(sp1 + 1, sp2 - sp1 - 1);
  resp.status = std::atoi(code.c_str());
  if (sp2 != std::string::npos) resp.reason = line->substr(sp2 + 1);

  read_headers(reader, resp.headers);
  const bool no_body = head_request || resp.status / 100 == 1 || resp.status == 204 ||
                       resp.status == 304;
  if (!no_body) {
    read_message_body(reader, resp.headers, resp.body, true);
  }
  return resp;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_hop_by_hop(std::string_view name) {
  static constexpr std::string_view kHopByHop[] = {
      "connection",        "proxy-connection", "keep-alive",
      "transfer-encoding", "te",               "trailer",
      "upgrade",           "proxy-authorization", "proxy-authenticate"};
  return std::any_of(std::begin(kHopByHop), std::end(kHopByHop),
                     [&](std::string_view h) { return iequals(h, name); });
}

void strip_hop_by_hop(HeaderList& headers) {
  headers.erase(std::remove_if(headers.begin(), headers.end(),
                               [](const auto& h) { return is_hop_by_hop(h.first); }),
                headers.end());
}

std::string serialize_request(const HttpRequest& request) {
  std::string out = request.method + " " +
                    (request.path_query.empty() ? "/" : request.path_query) + " HTTP/1.1\r\n";
  bool wrote_length = false;
  for (const auto& [name, value] : request.headers) {
    if (iequals(name, "Content-Length")) {
      out += "Content-Length: " + std::to_string(request.body.size()) + "\r\n";
      wrote_length = true;
    } else {
      out += name + ": " + value + "\r\n";
    }
  }
  if (!wrote_length && (!request.body.empty() || request.method == "POST" ||
                        request.method == "PUT")) {
    out += "Content-Length: " + std::to_string(request.body.size()) + "\r\n";
  }
  out += "\r\n";
  out += request.body;
  return out;
}

std::string serialize_response(const HttpResponse& response) {
  std::string out = "HTTP/1.1 " + std::to_string(response.status) + " " +
                    (response.reason.empty() ? "OK" : response.reason) + "\r\n";
  bool wrote_length = false;
  for (const auto& [name, value] : response.headers) {
    if (iequals(name, "Content-Length")) {
      out += "Content-Length: " + std::to_string(response.body.size()) + "\r\n";
      wrote_length = true;
    } else if (is_hop_by_hop(name)) {
      continue;  // we always re-frame with Content-Length
    } else {
      out += name + ": " + value + "\r\n";
    }
  }
  if (!wrote_length) {
    out += "Content-Length: " + std::to_string(response.body.size()) + "\r\n";
  }
  out += "\r\n";
  out += response.body;
  return out;
}

std::pair<std::string, int> split_host_port(std::string_view authority, int default_port) {
  if (!authority.empty() && authority.front() == '[') {
    // [v6]:port
    std::size_t close = authority.find(']');
    if (close == std::string_view::npos) return {std::string(authority), default_port};
    std::string host(authority.substr(1, close - 1));
    if (close + 1 < authority.size() && authority[close + 1] == ':') {
      return {host, std::atoi(std::string(authority.substr(close + 2)).c_str())};
    }
    return {host, default_port};
  }
  std::size_t colon = authority.rfind(':');
  if (colon == std::string_view::npos || authority.find(':') != colon) {
    return {std::string(authority), default_port};
  }
  return {std::string(authority.substr(0, colon)),
          std::atoi(std::string(authority.substr(colon + 1)).c_str())};
}

ParsedUrl parse_url(std::string_view url) {
  ParsedUrl out;
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error("unsupported URL (expected http:// or https://): " + std::string(url));
  }
  out.scheme = std::string(url.substr(0, scheme_end));
  std::transform(out.scheme.begin(), out.scheme.end(), out.scheme.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (out.scheme != "http" && out.scheme != "https") {
    throw Error("unsupported URL scheme: " + out.scheme);
  }
  const int default_port = out.scheme == "https" ? 443 : 80;

  std::string_view rest = url.substr(scheme_end + 3);
  std::size_t path_start = rest.find('/');
  std::string_view authority = path_start == std::string_view::npos ? rest : rest.substr(0, path_start);
  std::tie(out.host, out.port) = split_host_port(authority, default_port);

  if (path_start != std::string_view::npos) {
    std::string_view path_query = rest.substr(path_start);
    std::size_t q = path_query.find('?');
    if (q == std::string_view::npos) {
      out.path = std::string(path_query);
    } else {
      out.path = std::string(path_query.substr(0, q));
      out.query = std::string(path_query.substr(q + 1));
    }
  }
  return out;
}

Stream connect_tcp(const std::string& host, int port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string port_str = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &result); rc != 0) {
    throw Error("cannot resolve " + host + ": " + gai_strerror(rc));
  }

  int fd = -1;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) {
    throw Error("cannot connect to " + host + ":" + port_str);
  }
  return Stream(fd);
}

// ---- UpstreamConnection ----------------------------------------------------

UpstreamConnection::UpstreamConnection(std::string host, int port, bool tls,
                                       std::string sni_host)
    : host_(std::move(host)), port_(port), tls_(tls), sni_host_(std::move(sni_host)) {}

UpstreamConnection::~UpstreamConnection() {
  if (ssl_ctx_ != nullptr) {
    SSL_CTX_free(static_cast<SSL_CTX*>(ssl_ctx_));
  }
}

void UpstreamConnection::ensure_connected() {
  if (stream_.valid()) return;
  Stream stream = connect_tcp(host_, port_);
  if (tls_) {
    if (ssl_ctx_ == nullptr) {
      SSL_CTX* ctx = SSL_CTX_new(TLS_client_method());
      if (ctx == nullptr) throw Error("SSL_CTX_new failed");
      // The proxy is itself the trust decision point; upstream
      // verification stays off so self-signed test backends work.
      SSL_CTX_set_verify(ctx, SSL_VERIFY_NONE, nullptr);
      ssl_ctx_ = ctx;
    }
    SSL* ssl = SSL_new(static_cast<SSL_CTX*>(ssl_ctx_));
    if (ssl == nullptr) throw Error("SSL_new failed");
    SSL_set_fd(ssl, stream.fd());
    if (!sni_host_.empty()) {
      SSL_set_tlsext_host_name(ssl, sni_host_.c_str());
    }
    if (SSL_connect(ssl) != 1) {
      SSL_free(ssl);
      throw Error("TLS handshake with upstream " + host_ + " failed");
    }
    stream.attach_ssl(ssl);
  }
  stream_ = std::move(stream);
  reader_ = std::make_unique<BufferedReader>(stream_);
}

HttpResponse UpstreamConnection::try_round_trip(const HttpRequest& request) {
  ensure_connected();
  if (!stream_.write_all(serialize_request(request))) {
    throw Error("write to upstream failed");
  }
  return read_response(*reader_, request.method == "HEAD");
}

HttpResponse UpstreamConnection::round_trip(const HttpRequest& request) {
  const bool was_connected = stream_.valid();
  try {
    return try_round_trip(request);
  } catch (const Error&) {
    if (!was_connected) throw;
    // Kept-alive peer likely closed on us; retry once on a fresh socket.
    stream_.close();
    reader_.reset();
    return try_round_trip(request);
  }
}

}  // namespace anonproxy
