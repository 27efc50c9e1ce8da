#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "gridwh/fault.hpp"
#include "gridwh/value.hpp"

namespace gridwh::wire {

/// Largest request or response envelope accepted, in bytes.
inline constexpr std::size_t kMaxEnvelopeBytes = 16u * 1024u * 1024u;

/// Header service name addressed to a registry.
inline constexpr std::string_view kRegistryService = "registry";

/// Liveness method answered regardless of the addressed service.
inline constexpr std::string_view kProbeMethod = "ping";

/// Service address of the form http://host:port/rpc.
class Endpoint {
public:
  /// Throws FaultError{bad-request} unless url is http://host:port/rpc with a
  /// nonempty host and a port in 1..65535.
  static Endpoint parse(std::string_view url);
  static Endpoint from_host_port(std::string host, int port);

  const std::string& url() const { return url_; }
  const std::string& host() const { return host_; }
  int port() const { return port_; }

  friend bool operator==(const Endpoint& a, const Endpoint& b) { return a.url_ == b.url_; }
  friend auto operator<=>(const Endpoint& a, const Endpoint& b) { return a.url_ <=> b.url_; }

private:
  Endpoint(std::string url, std::string host, int port)
      : url_(std::move(url)), host_(std::move(host)), port_(port) {}

  std::string url_;
  std::string host_;
  int port_ = 0;
};

struct MethodCall {
  std::string id;
  std::string service;
  std::optional<std::string> session;
  std::optional<std::string> token;
  std::string method;
  Value::Map params;

  friend bool operator==(const MethodCall&, const MethodCall&) = default;
};

/// A response envelope: the echoed request id plus either a result or a fault.
struct Response {
  std::string id;
  std::variant<Value, Fault> outcome;

  bool is_fault() const { return std::holds_alternative<Fault>(outcome); }
  const Value& result() const { return std::get<Value>(outcome); }
  const Fault& fault() const { return std::get<Fault>(outcome); }

  /// Returns the result, or throws the fault as FaultError.
  const Value& value_or_throw() const;

  friend bool operator==(const Response&, const Response&) = default;
};

std::string marshal_request(const MethodCall& call);
MethodCall unmarshal_request(std::string_view bytes);

std::string marshal_response(std::string_view id, const std::variant<Value, Fault>& outcome);
Response unmarshal_response(std::string_view bytes);

/// Handlers either return a result/fault or throw FaultError; any other
/// exception is reported as backend-failure.
using Reply = std::variant<Value, Fault>;
using Handler = std::function<Reply(const MethodCall&)>;
using HandlerTable = std::map<std::string, Handler, std::less<>>;

/// Server-side tie: never throws, always returns a well-formed response
/// envelope. When `service` is set, calls addressed to another service are
/// answered with unknown-service (kProbeMethod excepted).
std::string dispatch(const HandlerTable& handlers, std::string_view request_bytes,
                     std::optional<std::string_view> service = std::nullopt);

/// Client-side stub: POSTs the marshaled call and returns the decoded
/// response. Transport problems come back as local faults (unreachable,
/// timeout, parse-error) carrying the call's id.
Response invoke(const Endpoint& endpoint, const MethodCall& call, int timeout_ms);

/// Process-unique correlation id.
std::string next_call_id();

}  // namespace gridwh::wire
