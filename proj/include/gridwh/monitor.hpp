#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gridwh/clock.hpp"
#include "gridwh/wire.hpp"

namespace gridwh::monitor {

struct MonitorConfig {
  double alpha = 0.3;
  std::int64_t probePeriodSeconds = 10;
  std::int64_t failureThreshold = 3;
};

/// Throws FaultError{bad-request} on out-of-range settings.
void validate(const MonitorConfig& config);

struct LatencySample {
  wire::Endpoint endpoint;
  double rtt_ms = 0.0;
  bool ok = false;
  TimePoint at;
};

/// Smoothed latency and availability for one endpoint. ewma_ms is empty
/// (UNKNOWN) until the first successful sample.
struct EndpointMetric {
  std::optional<double> ewma_ms;
  std::int64_t sampleCount = 0;
  std::int64_t consecutiveFailures = 0;
  bool available = true;

  friend bool operator==(const EndpointMetric&, const EndpointMetric&) = default;
};

/// UNKNOWN prev → sample; otherwise alpha·sample + (1−alpha)·prev.
/// Throws FaultError{bad-request} unless alpha ∈ (0,1] and sample ≥ 0.
double ewma_update(std::optional<double> prev, double sample_ms, double alpha);

EndpointMetric record_sample(EndpointMetric metric, const LatencySample& sample, const MonitorConfig& config);

/// Times a ping round trip. Never throws; failures come back with ok=false.
LatencySample probe(const wire::Endpoint& endpoint, int timeout_ms);

using Candidate = std::pair<std::string, wire::Endpoint>;  // (serviceKey, endpoint)
using MetricMap = std::map<wire::Endpoint, EndpointMetric>;

/// Ranking cost of a metric; nullopt ranks after every known cost.
using CostFunction = std::function<std::optional<double>(const EndpointMetric&)>;

std::optional<double> ewma_cost(const EndpointMetric& m);

/// Pure ranking: drops unavailable endpoints, orders the rest by ascending
/// cost (UNKNOWN last), ties by serviceKey. An endpoint absent from
/// `metrics` counts as UNKNOWN and available.
std::vector<Candidate> select_optimal(const std::vector<Candidate>& candidates, const MetricMap& metrics,
                                      const CostFunction& cost = ewma_cost);

/// Thread-safe metric table with an optional periodic probe loop.
class Monitor {
public:
  explicit Monitor(MonitorConfig config = {});
  ~Monitor();

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  const MonitorConfig& config() const { return config_; }

  EndpointMetric record(const LatencySample& sample);
  /// Overwrites an endpoint's metric (seeding, tests).
  void put(const wire::Endpoint& endpoint, EndpointMetric metric);
  std::optional<EndpointMetric> metric(const wire::Endpoint& endpoint) const;
  MetricMap snapshot() const;

  /// Probes once and records the sample.
  LatencySample probe_and_record(const wire::Endpoint& endpoint, int timeout_ms);

  /// Starts probing `targets()` every probePeriodSeconds until stop().
  void start(std::function<std::vector<wire::Endpoint>()> targets, int timeout_ms);
  void stop();

private:
  MonitorConfig config_;
  mutable std::mutex mutex_;
  MetricMap metrics_;

  std::mutex loop_mutex_;
  std::condition_variable loop_cv_;
  bool stopping_ = false;
  std::thread loop_;
};

}  // namespace gridwh::monitor
