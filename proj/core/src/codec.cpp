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

#include "anonproxy/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>

namespace anonproxy {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Media type without parameters, lowercased.
std::string media_type(std::string_view header_value) {
  std::string_view mt = header_value;
  if (auto semi = mt.find(';'); semi != std::string_view::npos) mt = mt.substr(0, semi);
  return to_lower(trim(mt));
}

// Extracts one parameter (e.g. boundary) from a Content-Type header value.
std::optional<std::string> header_param(std::string_view header_value, std::string_view name) {
  std::size_t pos = header_value.find(';');
  while (pos != std::string_view::npos) {
    std::string_view rest = header_value.substr(pos + 1);
    std::size_t next = rest.find(';');
    std::string_view param = next == std::string_view::npos ? rest : rest.substr(0, next);
    param = trim(param);
    std::size_t eq = param.find('=');
    if (eq != std::string_view::npos) {
      std::string key = to_lower(trim(param.substr(0, eq)));
      if (key == name) {
        std::string_view val = trim(param.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
          val = val.substr(1, val.size() - 2);
        }
        return std::string(val);
      }
    }
    pos = header_value.find(';', pos + 1);
  }
  return std::nullopt;
}

// ---- compression ----------------------------------------------------------

constexpr std::size_t kChunk = 16384;

std::string inflate_with(std::string_view data, int window_bits) {
  z_stream zs{};
  if (inflateInit2(&zs, window_bits) != Z_OK) {
    throw DecodeError("inflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());

  std::string out;
  std::array<char, kChunk> buf;
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = kChunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      std::string msg = zs.msg ? zs.msg : "corrupt stream";
      inflateEnd(&zs);
      throw DecodeError("inflate: " + msg);
    }
    out.append(buf.data(), kChunk - zs.avail_out);
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw DecodeError("inflate: truncated stream");
  }
  return out;
}

std::string deflate_with(std::string_view data, int window_bits) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, window_bits, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw EncodeError("deflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());

  std::string out;
  std::array<char, kChunk> buf;
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = kChunk;
    rc = deflate(&zs, Z_FINISH);
    out.append(buf.data(), kChunk - zs.avail_out);
  } while (rc != Z_STREAM_END);
  deflateEnd(&zs);
  return out;
}

std::string apply_encoding(std::string_view data, ContentEncoding enc) {
  switch (enc) {
    case ContentEncoding::kIdentity:
      return std::string(data);
    case ContentEncoding::kGzip:
      return gzip_compress(data);
    case ContentEncoding::kDeflate:
      return deflate_compress(data);
  }
  return std::string(data);
}

std::string strip_encoding(std::string_view data, ContentEncoding enc) {
  switch (enc) {
    case ContentEncoding::kIdentity:
      return std::string(data);
    case ContentEncoding::kGzip:
      return gzip_decompress(data);
    case ContentEncoding::kDeflate:
      return deflate_decompress(data);
  }
  return std::string(data);
}

// ---- urlencoded -----------------------------------------------------------

Value decode_urlencoded(std::string_view body) {
  Value tree = Value::object();
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t amp = body.find('&', pos);
    if (amp == std::string_view::npos) amp = body.size();
    std::string_view token = body.substr(pos, amp - pos);
    if (!token.empty()) {
      std::size_t eq = token.find('=');
      if (eq == std::string_view::npos) {
        tree.members().emplace_back(url_decode(token), Value(std::string()));
      } else {
        tree.members().emplace_back(url_decode(token.substr(0, eq)),
                                    Value(url_decode(token.substr(eq + 1))));
      }
    }
    pos = amp + 1;
  }
  return tree;
}

std::string encode_urlencoded(const Value& tree) {
  if (!tree.is_object()) {
    throw EncodeError("urlencoded body requires a top-level object");
  }
  std::string out;
  for (const auto& [key, val] : tree.members()) {
    if (!val.is_scalar()) {
      throw EncodeError("urlencoded cannot express nested value for key \"" + key + "\"");
    }
    if (!out.empty()) out += '&';
    out += url_encode(key);
    out += '=';
    out += url_encode(val.scalar_text());
  }
  return out;
}

// ---- multipart ------------------------------------------------------------

struct MultipartDecodeResult {
  Value tree = Value::object();
  std::vector<MultipartPartMeta> meta;
  bool ok = false;
};

std::optional<std::string> disposition_name(const std::string& value) {
  return header_param(value, "name");
}

MultipartDecodeResult decode_multipart(std::string_view body, const std::string& boundary) {
  MultipartDecodeResult result;
  const std::string delim = "--" + boundary;

  std::size_t pos = body.find(delim);
  if (pos == std::string_view::npos) return result;
  pos += delim.size();

  while (true) {
    if (body.compare(pos, 2, "--") == 0) break;  // closing delimiter
    if (body.compare(pos, 2, "\r\n") == 0) {
      pos += 2;
    } else if (pos < body.size() && body[pos] == '\n') {
      pos += 1;
    } else if (pos >= body.size()) {
      break;
    }

    // Part headers up to the blank line.
    MultipartPartMeta meta;
    std::string content_disposition;
    while (true) {
      std::size_t eol = body.find('\n', pos);
      if (eol == std::string_view::npos) return result;
      std::string_view line = body.substr(pos, eol - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      pos = eol + 1;
      if (line.empty()) break;
      std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      std::string name(trim(line.substr(0, colon)));
      std::string value(trim(line.substr(colon + 1)));
      if (to_lower(name) == "content-disposition") content_disposition = value;
      meta.headers.emplace_back(std::move(name), std::move(value));
    }

    std::size_t next = body.find(delim, pos);
    if (next == std::string_view::npos) return result;
    std::string_view content = body.substr(pos, next - pos);
    // The CRLF before the delimiter belongs to the framing, not the content.
    if (content.size() >= 2 && content.substr(content.size() - 2) == "\r\n") {
      content.remove_suffix(2);
    } else if (!content.empty() && content.back() == '\n') {
      content.remove_suffix(1);
    }

    std::string part_name = disposition_name(content_disposition).value_or("");
    if (part_name.empty()) {
      part_name = "part" + std::to_string(result.meta.size());
    }
    meta.name = part_name;
    result.tree.members().emplace_back(part_name, Value(std::string(content)));
    result.meta.push_back(std::move(meta));

    pos = next + delim.size();
  }

  result.ok = true;
  return result;
}

// Deterministic boundary that collides with none of the part bodies.
std::string make_boundary(const Value& tree) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [key, val] : tree.members()) {
    mix(key);
    if (val.is_scalar()) mix(val.scalar_text());
  }
  for (int salt = 0;; ++salt) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "----AnonBoundary%016llx%02x",
                  static_cast<unsigned long long>(h), salt);
    std::string candidate(buf);
    bool collides = false;
    for (const auto& [key, val] : tree.members()) {
      if (val.is_scalar() && val.scalar_text().find(candidate) != std::string::npos) {
        collides = true;
        break;
      }
    }
    if (!collides) return candidate;
  }
}

std::string encode_multipart(const Value& tree, const std::string& boundary,
                             const std::vector<MultipartPartMeta>& meta) {
  if (!tree.is_object()) {
    throw EncodeError("multipart body requires a top-level object");
  }
  std::string out;
  for (const auto& [key, val] : tree.members()) {
    out += "--" + boundary + "\r\n";
    const MultipartPartMeta* part = nullptr;
    for (const auto& m : meta) {
      if (m.name == key) {
        part = &m;
        break;
      }
    }
    if (part != nullptr && !part->headers.empty()) {
      for (const auto& [hname, hvalue] : part->headers) {
        out += hname + ": " + hvalue + "\r\n";
      }
    } else {
      out += "Content-Disposition: form-data; name=\"" + key + "\"\r\n";
    }
    out += "\r\n";
    // Containers are written as JSON text; they decode back as strings,
    // which is what a multipart decode yields for any part.
    out += val.is_scalar() ? val.scalar_text() : dump_json(val);
    out += "\r\n";
  }
  out += "--" + boundary + "--\r\n";
  return out;
}

}  // namespace

ContentType parse_content_type(std::string_view header_value) {
  const std::string mt = media_type(header_value);
  if (mt == "application/x-www-form-urlencoded") return ContentType::kFormUrlEncoded;
  if (mt == "application/json" || mt == "text/json") return ContentType::kJson;
  if (mt == "multipart/form-data") return ContentType::kMultipartFormData;
  return ContentType::kOpaque;
}

ContentEncoding parse_content_encoding(std::string_view header_value) {
  const std::string enc = to_lower(trim(header_value));
  if (enc.empty() || enc == "identity") return ContentEncoding::kIdentity;
  if (enc == "gzip" || enc == "x-gzip") return ContentEncoding::kGzip;
  if (enc == "deflate") return ContentEncoding::kDeflate;
  // Unknown encodings make the body opaque rather than failing.
  return ContentEncoding::kIdentity;
}

std::string gzip_compress(std::string_view data) {
  return deflate_with(data, 15 + 16);
}

std::string gzip_decompress(std::string_view data) {
  return inflate_with(data, 15 + 16);
}

std::string deflate_compress(std::string_view data) {
  return deflate_with(data, 15);  // zlib-wrapped
}

std::string deflate_decompress(std::string_view data) {
  try {
    return inflate_with(data, 15);  // zlib-wrapped
  } catch (const DecodeError&) {
    return inflate_with(data, -15);  // raw stream, seen in the wild
  }
}

std::string url_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '+') {
      out += ' ';
    } else if (c == '%' && i + 2 < text.size() && std::isxdigit(static_cast<unsigned char>(text[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(text[i + 2]))) {
      auto hex = [](char h) {
        if (h >= '0' && h <= '9') return h - '0';
        return (std::tolower(static_cast<unsigned char>(h)) - 'a') + 10;
      };
      out += static_cast<char>(hex(text[i + 1]) * 16 + hex(text[i + 2]));
      i += 2;
    } else {
      out += c;
    }
  }
  return out;
}

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

DecodedBody decode_body(std::string_view content_type_header,
                        std::string_view content_encoding_header,
                        std::string_view body) {
  DecodedBody result;
  result.raw = std::string(body);
  result.type = parse_content_type(content_type_header);
  result.encoding = parse_content_encoding(content_encoding_header);

  if (result.type == ContentType::kOpaque) {
    return result;  // opaque, raw retained
  }

  // A corrupt compressed layer throws DecodeError; the caller fails open.
  const std::string plain = strip_encoding(body, result.encoding);

  switch (result.type) {
    case ContentType::kJson: {
      Value tree;
      try {
        tree = parse_json(plain);
      } catch (const DecodeError&) {
        return result;  // claimed JSON but isn't: opaque pass-through
      }
      if (!tree.is_object() && !tree.is_array()) {
        return result;  // scalar documents are not attribute trees
      }
      result.tree = std::move(tree);
      break;
    }
    case ContentType::kFormUrlEncoded:
      result.tree = decode_urlencoded(plain);
      break;
    case ContentType::kMultipartFormData: {
      auto boundary = header_param(content_type_header, "boundary");
      if (!boundary || boundary->empty()) return result;
      auto decoded = decode_multipart(plain, *boundary);
      if (!decoded.ok) return result;
      result.tree = std::move(decoded.tree);
      result.part_meta = std::move(decoded.meta);
      result.boundary = *boundary;
      break;
    }
    case ContentType::kOpaque:
      return result;
  }

  result.opaque = false;
  result.original_tree = result.tree;
  return result;
}

EncodedBody encode_body(const DecodedBody& decoded, const Value& tree) {
  if (decoded.opaque) {
    throw EncodeError("cannot encode an opaque body");
  }
  EncodedBody out;
  std::string plain;
  switch (decoded.type) {
    case ContentType::kJson:
      plain = dump_json(tree);
      out.content_type_header = "application/json";
      break;
    case ContentType::kFormUrlEncoded:
      plain = encode_urlencoded(tree);
      out.content_type_header = "application/x-www-form-urlencoded";
      break;
    case ContentType::kMultipartFormData: {
      std::string boundary =
          (!decoded.boundary.empty() && tree == decoded.original_tree)
              ? decoded.boundary
              : make_boundary(tree);
      plain = encode_multipart(tree, boundary, decoded.part_meta);
      out.content_type_header = "multipart/form-data; boundary=" + boundary;
      break;
    }
    case ContentType::kOpaque:
      throw EncodeError("cannot encode an opaque body");
  }

  out.bytes = apply_encoding(plain, decoded.encoding);
  if (decoded.encoding != ContentEncoding::kIdentity) {
    out.content_encoding_header = std::string(to_string(decoded.encoding));
  }
  return out;
}

}  // namespace anonproxy
