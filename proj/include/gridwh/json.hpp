#pragma once

// Conversions between Value and nlohmann::json. Shared by the envelope
// codec, the registry document store and the CLI's --json output.

#include <nlohmann/json.hpp>

#include "gridwh/value.hpp"

namespace gridwh {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Throws FaultError{bad-request} for non-finite reals or depth overflow.
OrderedJson to_json(const Value& v);

/// Throws FaultError{bad-request} for integers outside int64 or nesting
/// deeper than Value::kMaxDepth.
Value from_json(const Json& j);

/// Parses text, throwing FaultError{parse-error} on malformed syntax.
/// Nesting beyond max_depth is rejected before a tree is built.
Json parse_json_text(std::string_view text, int max_depth = Value::kMaxDepth + 8);

}  // namespace gridwh
