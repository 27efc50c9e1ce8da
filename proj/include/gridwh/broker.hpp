#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridwh/clock.hpp"
#include "gridwh/dbs_service.hpp"
#include "gridwh/monitor.hpp"
#include "gridwh/registry.hpp"
#include "gridwh/table.hpp"
#include "gridwh/wire.hpp"

namespace gridwh::broker {

struct QueryOptions {
  int timeout_ms = 5000;
  int maxAttempts = 3;
  std::optional<std::string> token;
};

struct BoundService {
  registry::ServiceDescriptor descriptor;
  dbs::SessionHandle session;
  TimePoint lastUsed;
};

struct QueryOutcome {
  dbs::ResultSet resultSet;
  std::string servedBy;
  wire::Endpoint endpoint;
  int attempts = 0;
  std::vector<monitor::Candidate> ranking;  // as selected, head first
  std::vector<std::string> tried;           // endpoint URLs in attempt order
};

/// Client side of the virtual database: locate → select → bind → execute.
///
/// Failures surface as FaultError. Faults raised by query_dataset carry
/// `attempts` and `tried` in their detail. Only transport faults
/// (unreachable, timeout) move on to the next replica.
class Broker {
public:
  explicit Broker(monitor::MonitorConfig config = {}, Clock clock = system_clock());

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Registry find by dataset name. Transport failures become
  /// registry-unavailable.
  std::vector<registry::ServiceDescriptor> locate(const wire::Endpoint& registry_url, std::string_view dataset,
                                                  int timeout_ms = 5000);

  /// Opens a session on the service and caches it under (serviceKey, token).
  BoundService bind(const registry::ServiceDescriptor& descriptor, const std::optional<std::string>& token,
                    int timeout_ms = 5000);

  QueryOutcome query_dataset(const wire::Endpoint& registry_url, std::string_view dataset,
                             std::string_view query_text, const QueryOptions& opts = {});

  /// Runs one query on one service: cached or fresh session, with a single
  /// transparent re-bind on session-expired. Returns the rows and the
  /// execute round trip in milliseconds.
  std::pair<dbs::ResultSet, double> execute_on(const registry::ServiceDescriptor& descriptor,
                                               std::string_view query_text, const QueryOptions& opts);

  monitor::Monitor& monitor() { return monitor_; }
  std::size_t cached_sessions() const;
  void forget_sessions();

private:
  using CacheKey = std::pair<std::string, std::string>;

  std::optional<BoundService> cached(const CacheKey& key);

  monitor::Monitor monitor_;
  Clock clock_;
  mutable std::mutex cache_mutex_;
  std::map<CacheKey, BoundService> cache_;
};

}  // namespace gridwh::broker
