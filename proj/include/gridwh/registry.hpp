#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "gridwh/clock.hpp"
#include "gridwh/value.hpp"
#include "gridwh/wire.hpp"

namespace gridwh::registry {

inline constexpr std::string_view kUddiVersion = "2.00";

struct DatasetEntry {
  std::string name;
  std::optional<std::int64_t> approxRows;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

/// Registry record for one database service.
struct ServiceDescriptor {
  std::string serviceKey;
  std::string providerName;
  std::string description;
  std::string endpoint;  // http://host:port/rpc
  std::vector<DatasetEntry> datasets;
  std::string dialect;
  std::vector<std::string> operations;
  bool authRequired = false;
  std::int64_t publishedAt = 0;

  wire::Endpoint parsed_endpoint() const { return wire::Endpoint::parse(endpoint); }

  friend bool operator==(const ServiceDescriptor&, const ServiceDescriptor&) = default;
};

/// Throws FaultError{bad-request} naming the first violated invariant.
void validate(const ServiceDescriptor& d);

bool is_valid_service_key(std::string_view key);

Value to_value(const ServiceDescriptor& d);
/// Structural decode only; call validate() for the invariants.
ServiceDescriptor descriptor_from_value(const Value& v);

/// A dataset name with a trailing '*' is a prefix match.
struct FindQuery {
  std::optional<std::string> datasetName;
  std::optional<std::string> serviceKey;

  friend bool operator==(const FindQuery&, const FindQuery&) = default;
};

void validate(const FindQuery& q);
bool matches(const ServiceDescriptor& d, const FindQuery& q);

Value to_value(const FindQuery& q);
FindQuery find_query_from_value(const Value& v);

/// Publish/find/deregister over a directory of `<serviceKey>.json` documents.
///
/// Mutations are serialized and persisted (temp file + rename) before they
/// return; finds run concurrently under a shared lock.
class Registry {
public:
  /// Loads every valid document in `store`. Corrupt or mismatched documents
  /// are skipped and reported through warnings(). Throws
  /// FaultError{backend-failure} when the directory cannot be read.
  static std::unique_ptr<Registry> open(std::filesystem::path store, std::string admin_token,
                                        Clock clock = system_clock());

  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  /// Upsert. Stamps publishedAt from the registry clock.
  std::string publish(ServiceDescriptor descriptor, std::string_view admin_token);
  std::vector<ServiceDescriptor> find(const FindQuery& query) const;
  void deregister(std::string_view service_key, std::string_view admin_token);
  Value::Map info() const;

  std::size_t size() const;
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::filesystem::path& store_path() const { return store_; }

private:
  Registry(std::filesystem::path store, std::string admin_token, Clock clock);

  void check_token(std::string_view token) const;
  void persist(const ServiceDescriptor& d) const;

  std::filesystem::path store_;
  std::string admin_token_;
  Clock clock_;
  std::vector<std::string> warnings_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, ServiceDescriptor> records_;
};

/// Handler table for the "publish", "find", "deregister" and "info" methods.
wire::HandlerTable handlers(Registry& registry);

}  // namespace gridwh::registry
