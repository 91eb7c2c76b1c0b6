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

#include "anonproxy/model.hpp"

#include <algorithm>
#include <cctype>

namespace anonproxy {

namespace {

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

PrivacyLevel parse_privacy_level(std::string_view name) {
  const std::string upper = to_upper(name);
  if (upper == "NONE") return PrivacyLevel::kNone;
  if (upper == "LOW") return PrivacyLevel::kLow;
  if (upper == "MEDIUM") return PrivacyLevel::kMedium;
  if (upper == "HIGH") return PrivacyLevel::kHigh;
  throw ConfigError("unknown privacy level: \"" + std::string(name) +
                    "\" (expected NONE, LOW, MEDIUM or HIGH)");
}

std::string_view to_string(PrivacyLevel level) {
  switch (level) {
    case PrivacyLevel::kNone:
      return "NONE";
    case PrivacyLevel::kLow:
      return "LOW";
    case PrivacyLevel::kMedium:
      return "MEDIUM";
    case PrivacyLevel::kHigh:
      return "HIGH";
  }
  return "NONE";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kInject:
      return "inject";
    case Action::kRemove:
      return "remove";
    case Action::kReplace:
      return "replace";
    case Action::kPassThrough:
      return "pass";
  }
  return "pass";
}

std::string_view to_string(ContentType t) {
  switch (t) {
    case ContentType::kFormUrlEncoded:
      return "application/x-www-form-urlencoded";
    case ContentType::kJson:
      return "application/json";
    case ContentType::kMultipartFormData:
      return "multipart/form-data";
    case ContentType::kOpaque:
      return "opaque";
  }
  return "opaque";
}

std::string_view to_string(ContentEncoding e) {
  switch (e) {
    case ContentEncoding::kIdentity:
      return "identity";
    case ContentEncoding::kGzip:
      return "gzip";
    case ContentEncoding::kDeflate:
      return "deflate";
  }
  return "identity";
}

}  // namespace anonproxy
