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

#ifndef ANONPROXY_MODEL_HPP_
#define ANONPROXY_MODEL_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "anonproxy/value.hpp"

namespace anonproxy {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, rule files, host lists. Maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Body could not be decoded (corrupt compressed stream). The proxy treats
// this as fail-open: the request is forwarded unmodified.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Tree not representable in the requested wire format.
class EncodeError : public Error {
 public:
  using Error::Error;
};

// Per-app privacy level selected by the user. The numeric encoding is part
// of the contract: the action threshold is 1 - level/4.
enum class PrivacyLevel : int { kNone = 0, kLow = 1, kMedium = 2, kHigh = 3 };

// 1 - level/4: the probability bar a uniform draw must exceed for a
// perturbation action to fire. NONE yields 1.0, which no draw in [0,1)
// can exceed.
constexpr double threshold(PrivacyLevel level) {
  return 1.0 - static_cast<int>(level) / 4.0;
}

PrivacyLevel parse_privacy_level(std::string_view name);  // case-insensitive
std::string_view to_string(PrivacyLevel level);

enum class AttributeClass { kExplicitIdentifier, kQuasiIdentifier, kSensitiveData };

// Outcome recorded per processed event. Inject is tracked alongside the
// fate of the current event (PassThrough / Replace / Remove).
enum class Action { kInject, kRemove, kReplace, kPassThrough };

std::string_view to_string(Action action);

// Identifies one (app, analytics host) stream; the unit of history and of
// pipeline serialization.
struct AppHostKey {
  std::string app_name;
  std::string host_name;

  bool operator==(const AppHostKey&) const = default;
  auto operator<=>(const AppHostKey&) const = default;
};

// One named user-interaction event: the unit buffered and perturbed.
struct AnalyticsEvent {
  std::string event_type;
  Value attributes;  // full decoded body tree, generalized before buffering
  int64_t timestamp_ms = 0;

  bool operator==(const AnalyticsEvent&) const = default;
};

enum class ContentType { kFormUrlEncoded, kJson, kMultipartFormData, kOpaque };
enum class ContentEncoding { kIdentity, kGzip, kDeflate };

std::string_view to_string(ContentType t);
std::string_view to_string(ContentEncoding e);

// Ordered, duplicate-preserving header list.
using HeaderList = std::vector<std::pair<std::string, std::string>>;

// Decoded analytics request, one field per row of the parsing table:
// headers, content type/encoding, URL, body, app.
struct ParsedRequest {
  HeaderList headers;
  ContentType content_type = ContentType::kOpaque;
  ContentEncoding content_encoding = ContentEncoding::kIdentity;
  std::string method;
  std::string host;
  std::string path;   // path only, no query
  std::string query;  // raw query string, no leading '?'
  Value body;         // attribute tree; empty object when opaque
  std::string app;
};

}  // namespace anonproxy

#endif  // ANONPROXY_MODEL_HPP_
