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

#ifndef ANONPROXY_CODEC_HPP_
#define ANONPROXY_CODEC_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anonproxy/model.hpp"
#include "anonproxy/value.hpp"

namespace anonproxy {

// Part metadata kept from a multipart decode so unchanged parts re-encode
// with their original headers.
struct MultipartPartMeta {
  std::string name;
  std::vector<std::pair<std::string, std::string>> headers;
};

// Result of decoding a request body. When `opaque` is set the content type
// or combination is unsupported and `raw` holds the original bytes for
// pass-through forwarding.
struct DecodedBody {
  ContentType type = ContentType::kOpaque;
  ContentEncoding encoding = ContentEncoding::kIdentity;
  Value tree;  // object tree; untouched default when opaque
  bool opaque = true;
  std::string raw;

  // Multipart bookkeeping.
  std::string boundary;
  std::vector<MultipartPartMeta> part_meta;
  Value original_tree;  // as decoded, to detect modification on encode
};

struct EncodedBody {
  std::string bytes;
  std::string content_type_header;      // full header value incl. boundary
  std::string content_encoding_header;  // empty = omit header
};

ContentType parse_content_type(std::string_view header_value);
ContentEncoding parse_content_encoding(std::string_view header_value);

// Decodes a body into an order-preserving attribute tree. An absent
// Content-Encoding means identity. Unsupported content types (protobuf
// and friends) come back opaque; a corrupt gzip/deflate stream throws
// DecodeError so the caller can fail open.
DecodedBody decode_body(std::string_view content_type_header,
                        std::string_view content_encoding_header,
                        std::string_view body);

// Re-encodes a (possibly modified) tree in the original wire form and
// re-applies the compression layer. Throws EncodeError when the tree has
// values the content type cannot express.
EncodedBody encode_body(const DecodedBody& decoded, const Value& tree);

// Compression helpers (RFC 1952 gzip; deflate accepts both zlib-wrapped
// and raw streams, and emits zlib-wrapped).
std::string gzip_compress(std::string_view data);
std::string gzip_decompress(std::string_view data);
std::string deflate_compress(std::string_view data);
std::string deflate_decompress(std::string_view data);

// urlencoded helpers shared with query-string handling.
std::string url_decode(std::string_view text);
std::string url_encode(std::string_view text);

}  // namespace anonproxy

#endif  // ANONPROXY_CODEC_HPP_
