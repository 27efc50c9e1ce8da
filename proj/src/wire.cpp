#include "gridwh/wire.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <chrono>

#include "gridwh/json.hpp"

namespace gridwh::wire {
namespace {

[[noreturn]] void bad_request(std::string message) {
  throw FaultError(FaultCode::bad_request, std::move(message));
}

const Json& require(const Json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end()) bad_request(std::string("missing ") + where + "." + key);
  return *it;
}

const Json& require_object(const Json& obj, const char* key, const char* where) {
  const Json& j = require(obj, key, where);
  if (!j.is_object()) bad_request(std::string(where) + "." + key + " must be an object");
  return j;
}

std::string require_string(const Json& obj, const char* key, const char* where, bool nonempty) {
  const Json& j = require(obj, key, where);
  if (!j.is_string()) bad_request(std::string(where) + "." + key + " must be a string");
  auto s = j.get<std::string>();
  if (nonempty && s.empty()) bad_request(std::string(where) + "." + key + " must be nonempty");
  return s;
}

std::optional<std::string> optional_string(const Json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) bad_request(std::string(where) + "." + key + " must be a string or null");
  return it->get<std::string>();
}

OrderedJson nullable(const std::optional<std::string>& s) {
  return s ? OrderedJson(*s) : OrderedJson(nullptr);
}

OrderedJson fault_json(const Fault& f) {
  OrderedJson out = OrderedJson::object();
  out["code"] = std::string(to_string(f.code));
  out["message"] = f.message;
  out["detail"] = f.detail ? to_json(Value(*f.detail)) : OrderedJson(nullptr);
  return out;
}

Fault fault_from_json(const Json& j) {
  if (!j.is_object()) bad_request("fault must be an object");
  auto code_text = require_string(j, "code", "fault", true);
  auto code = fault_code_from_string(code_text);
  if (!code) bad_request("unknown fault code '" + code_text + "'");
  Fault f{*code, {}, std::nullopt};
  if (auto it = j.find("message"); it != j.end() && it->is_string()) f.message = it->get<std::string>();
  if (auto it = j.find("detail"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) bad_request("fault.detail must be an object or null");
    f.detail = from_json(*it).as_map();
  }
  return f;
}

std::string dump(const OrderedJson& j) {
  std::string text;
  try {
    text = j.dump(-1, ' ', false, Json::error_handler_t::strict);
  } catch (const Json::exception& e) {
    bad_request(std::string("cannot encode envelope: ") + e.what());
  }
  if (text.size() > kMaxEnvelopeBytes) bad_request("envelope exceeds 16 MiB");
  return text;
}

// Best-effort id recovery for faults raised while decoding a request.
std::string salvage_id(const Json& doc) {
  if (!doc.is_object()) return "unknown";
  auto env = doc.find("envelope");
  if (env == doc.end() || !env->is_object()) return "unknown";
  auto header = env->find("header");
  if (header == env->end() || !header->is_object()) return "unknown";
  auto id = header->find("id");
  if (id == header->end() || !id->is_string() || id->get_ref<const std::string&>().empty()) return "unknown";
  return id->get<std::string>();
}

MethodCall decode_request(const Json& doc) {
  if (!doc.is_object()) bad_request("request must be a JSON object");
  const Json& env = require_object(doc, "envelope", "request");
  const Json& header = require_object(env, "header", "envelope");
  const Json& body = require_object(env, "body", "envelope");
  MethodCall call;
  call.id = require_string(header, "id", "header", true);
  call.service = require_string(header, "service", "header", true);
  call.session = optional_string(header, "session", "header");
  call.token = optional_string(header, "token", "header");
  call.method = require_string(body, "method", "body", true);
  call.params = from_json(require_object(body, "params", "body")).as_map();
  return call;
}

}  // namespace

// ---------------------------------------------------------------------------

Endpoint Endpoint::parse(std::string_view url) {
  constexpr std::string_view scheme = "http://";
  constexpr std::string_view path = "/rpc";
  auto invalid = [&](const char* why) -> FaultError {
    return FaultError(FaultCode::bad_request, "invalid endpoint '" + std::string(url) + "': " + why);
  };
  if (!url.starts_with(scheme)) throw invalid("scheme must be http");
  auto rest = url.substr(scheme.size());
  auto slash = rest.find('/');
  if (slash == std::string_view::npos || rest.substr(slash) != path) throw invalid("path must be /rpc");
  auto authority = rest.substr(0, slash);
  auto colon = authority.rfind(':');
  if (colon == std::string_view::npos) throw invalid("port required");
  auto host = authority.substr(0, colon);
  auto port_text = authority.substr(colon + 1);
  if (host.empty()) throw invalid("empty host");
  if (host.find_first_of(":@/ ") != std::string_view::npos) throw invalid("malformed host");
  int port = 0;
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || p != port_text.data() + port_text.size() || port_text.empty() || port < 1 ||
      port > 65535) {
    throw invalid("port must be 1-65535");
  }
  return Endpoint(std::string(url), std::string(host), port);
}

Endpoint Endpoint::from_host_port(std::string host, int port) {
  return parse("http://" + host + ":" + std::to_string(port) + "/rpc");
}

const Value& Response::value_or_throw() const {
  if (is_fault()) throw FaultError(fault());
  return result();
}

std::string marshal_request(const MethodCall& call) {
  if (call.id.empty()) bad_request("call id must be nonempty");
  if (call.service.empty()) bad_request("call service must be nonempty");
  if (call.method.empty()) bad_request("call method must be nonempty");

  OrderedJson header = OrderedJson::object();
  header["id"] = call.id;
  header["service"] = call.service;
  header["session"] = nullable(call.session);
  header["token"] = nullable(call.token);

  OrderedJson body = OrderedJson::object();
  body["method"] = call.method;
  OrderedJson params = OrderedJson::object();
  for (const auto& [k, v] : call.params) params[k] = to_json(v);
  body["params"] = std::move(params);

  OrderedJson env = OrderedJson::object();
  env["header"] = std::move(header);
  env["body"] = std::move(body);
  OrderedJson doc = OrderedJson::object();
  doc["envelope"] = std::move(env);
  return dump(doc);
}

MethodCall unmarshal_request(std::string_view bytes) {
  if (bytes.size() > kMaxEnvelopeBytes) bad_request("envelope exceeds 16 MiB");
  return decode_request(parse_json_text(bytes));
}

std::string marshal_response(std::string_view id, const std::variant<Value, Fault>& outcome) {
  if (id.empty()) bad_request("response id must be nonempty");
  OrderedJson header = OrderedJson::object();
  header["id"] = std::string(id);
  OrderedJson body = OrderedJson::object();
  if (const auto* v = std::get_if<Value>(&outcome)) {
    body["result"] = to_json(*v);
  } else {
    body["fault"] = fault_json(std::get<Fault>(outcome));
  }
  OrderedJson env = OrderedJson::object();
  env["header"] = std::move(header);
  env["body"] = std::move(body);
  OrderedJson doc = OrderedJson::object();
  doc["envelope"] = std::move(env);
  return dump(doc);
}

Response unmarshal_response(std::string_view bytes) {
  if (bytes.size() > kMaxEnvelopeBytes) bad_request("envelope exceeds 16 MiB");
  Json doc = parse_json_text(bytes);
  if (!doc.is_object()) bad_request("response must be a JSON object");
  const Json& env = require_object(doc, "envelope", "response");
  const Json& header = require_object(env, "header", "envelope");
  const Json& body = require_object(env, "body", "envelope");
  Response r;
  r.id = require_string(header, "id", "header", true);
  bool has_result = body.contains("result");
  bool has_fault = body.contains("fault");
  if (has_result == has_fault) bad_request("response body must carry exactly one of result or fault");
  if (has_result) {
    r.outcome = from_json(body["result"]);
  } else {
    r.outcome = fault_from_json(body["fault"]);
  }
  return r;
}

std::string dispatch(const HandlerTable& handlers, std::string_view request_bytes,
                     std::optional<std::string_view> service) {
  std::string id = "unknown";
  auto respond = [&](const std::variant<Value, Fault>& outcome) {
    try {
      return marshal_response(id, outcome);
    } catch (const FaultError& e) {
      // Result not encodable (too large, non-finite real, too deep).
      return marshal_response(id, e.fault());
    }
  };
  try {
    if (request_bytes.size() > kMaxEnvelopeBytes) bad_request("envelope exceeds 16 MiB");
    Json doc = parse_json_text(request_bytes);
    id = salvage_id(doc);
    MethodCall call = decode_request(doc);
    if (service && call.service != *service && call.method != kProbeMethod) {
      throw FaultError(FaultCode::unknown_service, "this endpoint does not serve '" + call.service + "'",
                       Value::Map{{"service", call.service}});
    }
    auto it = handlers.find(call.method);
    if (it == handlers.end()) {
      throw FaultError(FaultCode::unknown_method, "no method '" + call.method + "'",
                       Value::Map{{"method", call.method}});
    }
    return respond(it->second(call));
  } catch (const FaultError& e) {
    return respond(e.fault());
  } catch (const std::exception& e) {
    return respond(Fault{FaultCode::backend_failure, e.what(), std::nullopt});
  } catch (...) {
    return respond(Fault{FaultCode::backend_failure, "unexpected failure", std::nullopt});
  }
}

Response invoke(const Endpoint& endpoint, const MethodCall& call, int timeout_ms) {
  auto local_fault = [&](FaultCode code, std::string message) {
    return Response{call.id, Fault{code, std::move(message), Value::Map{{"endpoint", endpoint.url()}}}};
  };
  if (timeout_ms <= 0) return local_fault(FaultCode::bad_request, "timeout_ms must be positive");

  std::string body;
  try {
    body = marshal_request(call);
  } catch (const FaultError& e) {
    return Response{call.id, e.fault()};
  }

  const auto timeout = std::chrono::milliseconds(timeout_ms);
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(endpoint.host(), endpoint.port());
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_keep_alive(false);

  auto res = client.Post("/rpc", body, "application/json");
  const auto elapsed = std::chrono::steady_clock::now() - start;
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout) {
      return local_fault(FaultCode::timeout, "no response within " + std::to_string(timeout_ms) + " ms");
    }
    return local_fault(FaultCode::unreachable, httplib::to_string(err));
  }
  if (elapsed > timeout) {
    return local_fault(FaultCode::timeout, "no response within " + std::to_string(timeout_ms) + " ms");
  }
  if (res->status == 413) return local_fault(FaultCode::bad_request, "request rejected as too large");
  if (res->status != 200) {
    return local_fault(FaultCode::unreachable, "HTTP status " + std::to_string(res->status));
  }
  try {
    Response r = unmarshal_response(res->body);
    if (r.id != call.id && r.id != "unknown") {
      return local_fault(FaultCode::parse_error, "response id '" + r.id + "' does not match call");
    }
    r.id = call.id;
    return r;
  } catch (const FaultError& e) {
    return local_fault(FaultCode::parse_error, std::string("unintelligible response: ") + e.what());
  }
}

std::string next_call_id() {
  static std::atomic<std::uint64_t> counter{0};
  return std::to_string(counter.fetch_add(1, std::memory_order_relaxed) + 1);
}

}  // namespace gridwh::wire
