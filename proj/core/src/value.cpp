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

#include "anonproxy/value.hpp"

#include <nlohmann/json.hpp>

#include "anonproxy/model.hpp"

namespace anonproxy {

namespace {

using nlohmann::json;

// Numeric cross-kind equality: an int64 5 equals a uint64 5. Doubles
// compare by value; the lexeme is presentation, not identity.
bool numbers_equal(const Value& a, const Value& b) {
  if (a.is_double() || b.is_double()) {
    return a.as_double() == b.as_double();
  }
  if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
  if (a.is_uint() && b.is_uint()) return a.as_uint() == b.as_uint();
  // Mixed signedness.
  int64_t i = a.is_int() ? a.as_int() : b.as_int();
  uint64_t u = a.is_uint() ? a.as_uint() : b.as_uint();
  return i >= 0 && static_cast<uint64_t>(i) == u;
}

void dump_to(const Value& v, std::string& out) {
  switch (v.kind()) {
    case Value::Kind::kNull:
      out += "null";
      break;
    case Value::Kind::kBool:
      out += v.as_bool() ? "true" : "false";
      break;
    case Value::Kind::kInt:
      out += std::to_string(v.as_int());
      break;
    case Value::Kind::kUint:
      out += std::to_string(v.as_uint());
      break;
    case Value::Kind::kDouble:
      if (!v.double_lexeme().empty()) {
        out += v.double_lexeme();
      } else {
        out += json(v.as_double()).dump();
      }
      break;
    case Value::Kind::kString:
      out += json(v.as_string()).dump();  // handles escaping
      break;
    case Value::Kind::kArray: {
      out += '[';
      bool first = true;
      for (const auto& item : v.items()) {
        if (!first) out += ',';
        first = false;
        dump_to(item, out);
      }
      out += ']';
      break;
    }
    case Value::Kind::kObject: {
      out += '{';
      bool first = true;
      for (const auto& [key, val] : v.members()) {
        if (!first) out += ',';
        first = false;
        out += json(key).dump();
        out += ':';
        dump_to(val, out);
      }
      out += '}';
      break;
    }
  }
}

// SAX handler building a Value while keeping member order and float
// lexemes, which nlohmann's DOM would lose.
class ValueBuilder {
 public:
  bool null() { return emplace(Value()); }
  bool boolean(bool b) { return emplace(Value(b)); }
  bool number_integer(json::number_integer_t n) { return emplace(Value(static_cast<int64_t>(n))); }
  bool number_unsigned(json::number_unsigned_t n) { return emplace(Value(static_cast<uint64_t>(n))); }
  bool number_float(json::number_float_t d, const std::string& lexeme) {
    return emplace(Value::number(d, lexeme));
  }
  bool string(std::string& s) { return emplace(Value(s)); }
  bool binary(json::binary_t&) { return false; }  // not part of JSON text

  bool start_object(std::size_t) {
    stack_.push_back(Value::object());
    return true;
  }
  bool key(std::string& k) {
    pending_keys_.push_back(k);
    return true;
  }
  bool end_object() { return pop(); }
  bool start_array(std::size_t) {
    stack_.push_back(Value::array());
    return true;
  }
  bool end_array() { return pop(); }

  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) {
    throw DecodeError("json parse error at byte " + std::to_string(position) + ": " + ex.what());
  }

  Value take() { return std::move(root_); }

 private:
  bool emplace(Value v) {
    if (stack_.empty()) {
      root_ = std::move(v);
      return true;
    }
    Value& top = stack_.back();
    if (top.is_object()) {
      top.members().emplace_back(std::move(pending_keys_.back()), std::move(v));
      pending_keys_.pop_back();
    } else {
      top.items().push_back(std::move(v));
    }
    return true;
  }

  bool pop() {
    Value done = std::move(stack_.back());
    stack_.pop_back();
    return emplace(std::move(done));
  }

  Value root_;
  std::vector<Value> stack_;
  std::vector<std::string> pending_keys_;
};

}  // namespace

double Value::as_double() const {
  switch (kind()) {
    case Kind::kInt:
      return static_cast<double>(as_int());
    case Kind::kUint:
      return static_cast<double>(as_uint());
    default:
      return std::get<DoubleRepr>(data_).value;
  }
}

Value* Value::find(std::string_view key) {
  for (auto& [k, v] : members()) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Value* Value::find(std::string_view key) const {
  for (const auto& [k, v] : members()) {
    if (k == key) return &v;
  }
  return nullptr;
}

Value& Value::set(std::string_view key, Value v) {
  if (Value* existing = find(key)) {
    *existing = std::move(v);
    return *existing;
  }
  members().emplace_back(std::string(key), std::move(v));
  return members().back().second;
}

std::size_t Value::size() const {
  if (is_array()) return items().size();
  if (is_object()) return members().size();
  return 1;
}

std::string Value::scalar_text() const {
  switch (kind()) {
    case Kind::kNull:
      return "null";
    case Kind::kBool:
      return as_bool() ? "true" : "false";
    case Kind::kInt:
      return std::to_string(as_int());
    case Kind::kUint:
      return std::to_string(as_uint());
    case Kind::kDouble:
      return double_lexeme().empty() ? json(as_double()).dump() : double_lexeme();
    case Kind::kString:
      return as_string();
    default:
      throw EncodeError("container value has no scalar text form");
  }
}

bool Value::operator==(const Value& other) const {
  if (is_number() && other.is_number()) return numbers_equal(*this, other);
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::kNull:
      return true;
    case Kind::kBool:
      return as_bool() == other.as_bool();
    case Kind::kString:
      return as_string() == other.as_string();
    case Kind::kArray:
      return items() == other.items();
    case Kind::kObject:
      return members() == other.members();
    default:
      return true;  // numbers already handled
  }
}

std::string dump_json(const Value& v) {
  std::string out;
  dump_to(v, out);
  return out;
}

Value parse_json(std::string_view text) {
  ValueBuilder builder;
  json::sax_parse(text.begin(), text.end(), &builder);
  return builder.take();
}

}  // namespace anonproxy
