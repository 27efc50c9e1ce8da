#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gridwh {

/// Dynamically typed payload carried in method parameters and results.
///
/// A value is one of: null, boolean, signed 64-bit integer, double, UTF-8
/// text, list of values, or a string-keyed map of values. Map keys are kept
/// sorted, which also fixes their serialization order.
class Value {
public:
  using List = std::vector<Value>;
  using Map = std::map<std::string, Value, std::less<>>;
  using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string, List, Map>;

  enum class Kind { null, boolean, integer, real, text, list, map };

  /// Deepest nesting accepted on the wire. A scalar has depth 1.
  static constexpr int kMaxDepth = 32;

  Value() = default;
  Value(std::nullptr_t) {}
  Value(bool b) : data_(b) {}
  Value(int i) : data_(static_cast<std::int64_t>(i)) {}
  Value(std::int64_t i) : data_(i) {}
  Value(double d) : data_(d) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(std::string_view s) : data_(std::string(s)) {}
  Value(List l) : data_(std::move(l)) {}
  Value(Map m) : data_(std::move(m)) {}

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_null() const { return kind() == Kind::null; }
  bool is_bool() const { return kind() == Kind::boolean; }
  bool is_int() const { return kind() == Kind::integer; }
  bool is_real() const { return kind() == Kind::real; }
  bool is_text() const { return kind() == Kind::text; }
  bool is_list() const { return kind() == Kind::list; }
  bool is_map() const { return kind() == Kind::map; }
  bool is_scalar() const { return !is_list() && !is_map(); }

  // Accessors throw FaultError{bad-request} on a kind mismatch.
  bool as_bool() const;
  std::int64_t as_int() const;
  double as_real() const;  // accepts integers too
  const std::string& as_text() const;
  const List& as_list() const;
  const Map& as_map() const;
  List& as_list();
  Map& as_map();

  /// Map lookup; nullptr when this is not a map or the key is absent.
  const Value* find(std::string_view key) const;

  int depth() const;

  const Storage& storage() const { return data_; }

  friend bool operator==(const Value&, const Value&) = default;

private:
  Storage data_;
};

std::string_view kind_name(Value::Kind kind);

/// Compact JSON rendering, for diagnostics and CLI output.
std::string to_json_text(const Value& v);

}  // namespace gridwh
