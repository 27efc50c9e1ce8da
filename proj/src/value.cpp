#include "gridwh/value.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridwh/fault.hpp"
#include "gridwh/json.hpp"

namespace gridwh {
namespace {

[[noreturn]] void kind_mismatch(Value::Kind want, Value::Kind got) {
  throw FaultError(FaultCode::bad_request,
                   "expected " + std::string(kind_name(want)) + ", got " + std::string(kind_name(got)));
}

struct DepthLimitExceeded {};

}  // namespace

std::string_view kind_name(Value::Kind kind) {
  switch (kind) {
    case Value::Kind::null: return "null";
    case Value::Kind::boolean: return "boolean";
    case Value::Kind::integer: return "integer";
    case Value::Kind::real: return "real";
    case Value::Kind::text: return "text";
    case Value::Kind::list: return "list";
    case Value::Kind::map: return "map";
  }
  return "?";
}

bool Value::as_bool() const {
  if (!is_bool()) kind_mismatch(Kind::boolean, kind());
  return std::get<bool>(data_);
}

std::int64_t Value::as_int() const {
  if (!is_int()) kind_mismatch(Kind::integer, kind());
  return std::get<std::int64_t>(data_);
}

double Value::as_real() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data_));
  if (!is_real()) kind_mismatch(Kind::real, kind());
  return std::get<double>(data_);
}

const std::string& Value::as_text() const {
  if (!is_text()) kind_mismatch(Kind::text, kind());
  return std::get<std::string>(data_);
}

const Value::List& Value::as_list() const {
  if (!is_list()) kind_mismatch(Kind::list, kind());
  return std::get<List>(data_);
}

const Value::Map& Value::as_map() const {
  if (!is_map()) kind_mismatch(Kind::map, kind());
  return std::get<Map>(data_);
}

Value::List& Value::as_list() {
  if (!is_list()) kind_mismatch(Kind::list, kind());
  return std::get<List>(data_);
}

Value::Map& Value::as_map() {
  if (!is_map()) kind_mismatch(Kind::map, kind());
  return std::get<Map>(data_);
}

const Value* Value::find(std::string_view key) const {
  if (!is_map()) return nullptr;
  const auto& m = std::get<Map>(data_);
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

int Value::depth() const {
  int child = 0;
  if (is_list()) {
    for (const auto& v : std::get<List>(data_)) child = std::max(child, v.depth());
  } else if (is_map()) {
    for (const auto& [k, v] : std::get<Map>(data_)) child = std::max(child, v.depth());
  }
  return 1 + child;
}

std::string to_json_text(const Value& v) { return to_json(v).dump(); }

// ---------------------------------------------------------------------------

namespace {

OrderedJson to_json_at(const Value& v, int depth) {
  if (depth > Value::kMaxDepth) {
    throw FaultError(FaultCode::bad_request, "value nesting exceeds " + std::to_string(Value::kMaxDepth));
  }
  switch (v.kind()) {
    case Value::Kind::null: return nullptr;
    case Value::Kind::boolean: return v.as_bool();
    case Value::Kind::integer: return v.as_int();
    case Value::Kind::real: {
      double d = v.as_real();
      if (!std::isfinite(d)) throw FaultError(FaultCode::bad_request, "non-finite real is not representable");
      return d;
    }
    case Value::Kind::text: return v.as_text();
    case Value::Kind::list: {
      auto out = OrderedJson::array();
      for (const auto& item : v.as_list()) out.push_back(to_json_at(item, depth + 1));
      return out;
    }
    case Value::Kind::map: {
      auto out = OrderedJson::object();
      for (const auto& [k, item] : v.as_map()) out[k] = to_json_at(item, depth + 1);
      return out;
    }
  }
  return nullptr;
}

Value from_json_at(const Json& j, int depth) {
  if (depth > Value::kMaxDepth) {
    throw FaultError(FaultCode::bad_request, "value nesting exceeds " + std::to_string(Value::kMaxDepth));
  }
  switch (j.type()) {
    case Json::value_t::null: return Value{};
    case Json::value_t::boolean: return Value(j.get<bool>());
    case Json::value_t::number_integer: return Value(j.get<std::int64_t>());
    case Json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw FaultError(FaultCode::bad_request, "integer out of signed 64-bit range");
      }
      return Value(static_cast<std::int64_t>(u));
    }
    case Json::value_t::number_float: return Value(j.get<double>());
    case Json::value_t::string: return Value(j.get<std::string>());
    case Json::value_t::array: {
      Value::List out;
      out.reserve(j.size());
      for (const auto& item : j) out.push_back(from_json_at(item, depth + 1));
      return Value(std::move(out));
    }
    case Json::value_t::object: {
      Value::Map out;
      for (const auto& [k, item] : j.items()) out.emplace(k, from_json_at(item, depth + 1));
      return Value(std::move(out));
    }
    default: throw FaultError(FaultCode::bad_request, "unsupported JSON value");
  }
}

}  // namespace

OrderedJson to_json(const Value& v) { return to_json_at(v, 1); }

Value from_json(const Json& j) { return from_json_at(j, 1); }

Json parse_json_text(std::string_view text, int max_depth) {
  auto guard = [max_depth](int depth, Json::parse_event_t, Json&) {
    if (depth > max_depth) throw DepthLimitExceeded{};
    return true;
  };
  try {
    return Json::parse(text.begin(), text.end(), guard);
  } catch (const Json::parse_error& e) {
    throw FaultError(FaultCode::parse_error, e.what(),
                     Value::Map{{"offset", static_cast<std::int64_t>(e.byte)}});
  } catch (const DepthLimitExceeded&) {
    throw FaultError(FaultCode::bad_request, "document nesting exceeds " + std::to_string(max_depth));
  }
}

}  // namespace gridwh
