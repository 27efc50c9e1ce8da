#include "gridwh/fault.hpp"

#include <array>
#include <utility>

namespace gridwh {
namespace {

constexpr std::array<std::pair<FaultCode, std::string_view>, 12> kNames{{
    {FaultCode::bad_request, "bad-request"},
    {FaultCode::parse_error, "parse-error"},
    {FaultCode::unknown_method, "unknown-method"},
    {FaultCode::unknown_service, "unknown-service"},
    {FaultCode::unknown_dataset, "unknown-dataset"},
    {FaultCode::access_denied, "access-denied"},
    {FaultCode::session_expired, "session-expired"},
    {FaultCode::dialect_unsupported, "dialect-unsupported"},
    {FaultCode::backend_failure, "backend-failure"},
    {FaultCode::unreachable, "unreachable"},
    {FaultCode::timeout, "timeout"},
    {FaultCode::registry_unavailable, "registry-unavailable"},
}};

std::string what_text(const Fault& f) {
  std::string s(to_string(f.code));
  if (!f.message.empty()) {
    s += ": ";
    s += f.message;
  }
  return s;
}

}  // namespace

std::string_view to_string(FaultCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "backend-failure";
}

std::optional<FaultCode> fault_code_from_string(std::string_view text) {
  for (const auto& [c, name] : kNames) {
    if (name == text) return c;
  }
  return std::nullopt;
}

FaultError::FaultError(Fault fault) : std::runtime_error(what_text(fault)), fault_(std::move(fault)) {}

FaultError::FaultError(FaultCode code, std::string message, std::optional<Value::Map> detail)
    : FaultError(Fault{code, std::move(message), std::move(detail)}) {}

}  // namespace gridwh
