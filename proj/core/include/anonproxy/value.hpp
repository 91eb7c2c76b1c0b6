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

#ifndef ANONPROXY_VALUE_HPP_
#define ANONPROXY_VALUE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace anonproxy {

// Order-preserving attribute tree decoded from an analytics request body.
//
// Object members keep insertion order (a vector of pairs, duplicates
// allowed) so that a decode/encode cycle reproduces the original key
// sequence. Floating-point numbers remember their source lexeme so that
// re-encoding never changes the textual representation of an untouched
// value.
class Value {
 public:
  enum class Kind { kNull, kBool, kInt, kUint, kDouble, kString, kArray, kObject };

  using Member = std::pair<std::string, Value>;
  using Array = std::vector<Value>;
  using Object = std::vector<Member>;

  Value() : data_(std::monostate{}) {}
  Value(std::nullptr_t) : data_(std::monostate{}) {}
  Value(bool b) : data_(b) {}
  Value(int64_t n) : data_(n) {}
  Value(int n) : data_(static_cast<int64_t>(n)) {}
  Value(uint64_t n) : data_(n) {}
  Value(double d) : data_(DoubleRepr{d, {}}) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(const char* s) : data_(std::string(s)) {}

  static Value number(double d, std::string lexeme) {
    Value v;
    v.data_ = DoubleRepr{d, std::move(lexeme)};
    return v;
  }
  static Value array() {
    Value v;
    v.data_ = Array{};
    return v;
  }
  static Value object() {
    Value v;
    v.data_ = Object{};
    return v;
  }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_null() const { return kind() == Kind::kNull; }
  bool is_bool() const { return kind() == Kind::kBool; }
  bool is_int() const { return kind() == Kind::kInt; }
  bool is_uint() const { return kind() == Kind::kUint; }
  bool is_double() const { return kind() == Kind::kDouble; }
  bool is_string() const { return kind() == Kind::kString; }
  bool is_array() const { return kind() == Kind::kArray; }
  bool is_object() const { return kind() == Kind::kObject; }
  bool is_number() const { return is_int() || is_uint() || is_double(); }
  bool is_scalar() const { return !is_array() && !is_object(); }

  bool as_bool() const { return std::get<bool>(data_); }
  int64_t as_int() const { return std::get<int64_t>(data_); }
  uint64_t as_uint() const { return std::get<uint64_t>(data_); }
  double as_double() const;  // any numeric kind widened to double
  const std::string& as_string() const { return std::get<std::string>(data_); }
  const std::string& double_lexeme() const { return std::get<DoubleRepr>(data_).lexeme; }

  Array& items() { return std::get<Array>(data_); }
  const Array& items() const { return std::get<Array>(data_); }
  Object& members() { return std::get<Object>(data_); }
  const Object& members() const { return std::get<Object>(data_); }

  // Object helpers. find returns the first member with that key.
  Value* find(std::string_view key);
  const Value* find(std::string_view key) const;
  Value& set(std::string_view key, Value v);  // replace first or append
  void push_back(Value v) { items().push_back(std::move(v)); }

  std::size_t size() const;

  // Scalar rendered as wire text (urlencoded values, multipart part bodies).
  std::string scalar_text() const;

  bool operator==(const Value& other) const;
  bool operator!=(const Value& other) const { return !(*this == other); }

 private:
  struct DoubleRepr {
    double value;
    std::string lexeme;  // empty = format on demand
    bool operator==(const DoubleRepr& o) const { return value == o.value; }
  };

  // variant index order must match Kind.
  std::variant<std::monostate, bool, int64_t, uint64_t, DoubleRepr, std::string,
               Array, Object>
      data_;
};

// Compact JSON text. Double lexemes are emitted verbatim when present, so
// parse_json followed by dump_json is representation-stable for numbers.
std::string dump_json(const Value& v);

// Parses a JSON document into a Value, preserving member order.
// Throws DecodeError on malformed input.
Value parse_json(std::string_view text);

}  // namespace anonproxy

#endif  // ANONPROXY_VALUE_HPP_
