#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gridwh/value.hpp"

namespace gridwh {

/// Closed set of fault codes carried in response envelopes.
enum class FaultCode {
  bad_request,
  parse_error,
  unknown_method,
  unknown_service,
  unknown_dataset,
  access_denied,
  session_expired,
  dialect_unsupported,
  backend_failure,
  unreachable,
  timeout,
  registry_unavailable,
};

std::string_view to_string(FaultCode code);
std::optional<FaultCode> fault_code_from_string(std::string_view text);

/// Transport failures are the only ones worth retrying against another replica.
constexpr bool is_transport(FaultCode code) {
  return code == FaultCode::unreachable || code == FaultCode::timeout;
}

struct Fault {
  FaultCode code = FaultCode::backend_failure;
  std::string message;
  std::optional<Value::Map> detail;

  friend bool operator==(const Fault&, const Fault&) = default;
};

/// Exception form of a Fault, used inside the library. Server dispatch and
/// the RPC client convert between this and fault envelopes.
class FaultError : public std::runtime_error {
public:
  explicit FaultError(Fault fault);
  FaultError(FaultCode code, std::string message, std::optional<Value::Map> detail = std::nullopt);

  const Fault& fault() const noexcept { return fault_; }
  FaultCode code() const noexcept { return fault_.code; }

private:
  Fault fault_;
};

}  // namespace gridwh
