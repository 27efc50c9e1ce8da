#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridwh/backend.hpp"
#include "gridwh/clock.hpp"
#include "gridwh/registry.hpp"
#include "gridwh/rpc_server.hpp"
#include "gridwh/table.hpp"

namespace gridwh::dbs {

inline constexpr std::int64_t kDefaultSessionTtlSeconds = 600;

struct TableSpec {
  std::string name;
  std::vector<Column> schema;
  std::filesystem::path csv;
};

/// Service configuration, normally read from a JSON file:
///
///   {"serviceKey": "site-a", "listen": "127.0.0.1:0", "dialect": "tsql",
///    "authRequired": false, "accessToken": "", "registryUrl": "http://…/rpc",
///    "autoPublish": true, "tables": [{"name": "events", "csv": "events.csv",
///    "schema": [{"name": "id", "type": "int"}, …]}], "injectedDelayMs": 0}
///
/// Optional extras: providerName, description, sessionTtlSeconds and
/// registryAdminToken (used by autoPublish; GRIDWH_ADMIN_TOKEN otherwise).
struct ServiceConfig {
  std::string serviceKey;
  std::string listenHost = "127.0.0.1";
  int listenPort = 0;
  Dialect dialect = Dialect::ansi;
  bool authRequired = false;
  std::string accessToken;
  std::optional<std::string> registryUrl;
  bool autoPublish = false;
  std::vector<TableSpec> tables;
  std::int64_t injectedDelayMs = 0;
  std::int64_t sessionTtlSeconds = kDefaultSessionTtlSeconds;
  std::string providerName;
  std::string description;
  std::optional<std::string> registryAdminToken;
};

/// Relative CSV paths resolve against `base_dir`.
ServiceConfig parse_service_config(const Value& v, const std::filesystem::path& base_dir);
ServiceConfig load_service_config(const std::filesystem::path& file);

/// Loads every table in the config. Throws IngestError.
std::shared_ptr<const TableStore> load_tables(const ServiceConfig& config);

struct SessionHandle {
  std::string sessionId;
  std::string serviceKey;
  TimePoint createdAt;
  std::int64_t ttlSeconds = kDefaultSessionTtlSeconds;

  bool expired(TimePoint now) const { return now > createdAt + std::chrono::seconds(ttlSeconds); }
};

Value to_value(const SessionHandle& s);
SessionHandle session_from_value(const Value& v);

struct OperationSignature {
  std::string name;
  std::vector<std::pair<std::string, std::string>> params;  // (name, type)
};

struct ServiceDescription {
  registry::ServiceDescriptor descriptor;
  std::vector<OperationSignature> operations;
};

Value to_value(const ServiceDescription& d);

/// One Grid Data Service: a backend behind createSession / execute /
/// describe / ping.
class DbsService {
public:
  /// Methods exposed over the wire, sorted.
  static const std::vector<std::string>& method_names();

  DbsService(ServiceConfig config, std::shared_ptr<const TableStore> tables, Clock clock = system_clock());
  /// Uses a caller-supplied backend (e.g. an adapter to an external engine).
  DbsService(ServiceConfig config, std::shared_ptr<const TableStore> tables, std::unique_ptr<Backend> backend,
             Clock clock);
  ~DbsService();

  DbsService(const DbsService&) = delete;
  DbsService& operator=(const DbsService&) = delete;

  SessionHandle create_session(const std::optional<std::string>& token);
  /// parse → translate to this service's dialect → backend.
  ResultSet handle_execute(std::string_view session_id, std::string_view query_text);
  ServiceDescription describe() const;
  Value::Map ping() const;

  /// Descriptor as published to the registry (endpoint reflects the bound
  /// port once serving).
  registry::ServiceDescriptor descriptor() const;

  wire::HandlerTable handlers();

  /// Binds and serves on a background thread; publishes to the registry
  /// when autoPublish is set.
  void start();
  void stop();
  bool running() const;
  wire::Endpoint endpoint() const;

  const ServiceConfig& config() const { return config_; }

private:
  SessionHandle validate_session(std::string_view session_id);

  ServiceConfig config_;
  std::shared_ptr<const TableStore> tables_;
  std::unique_ptr<Backend> backend_;
  Clock clock_;

  std::mutex sessions_mutex_;
  std::map<std::string, SessionHandle, std::less<>> sessions_;

  std::unique_ptr<wire::RpcServer> server_;
};

/// Sends a publish call for `descriptor` to the registry at `registry_url`.
/// Throws FaultError on any fault.
std::string publish_descriptor(const wire::Endpoint& registry_url, const registry::ServiceDescriptor& descriptor,
                               const std::string& admin_token, int timeout_ms = 5000);

}  // namespace gridwh::dbs
