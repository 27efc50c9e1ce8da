#include "gridwh/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridwh::monitor {

void validate(const MonitorConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha <= 1.0)) {
    throw FaultError(FaultCode::bad_request, "alpha must be in (0,1]");
  }
  if (config.probePeriodSeconds <= 0) throw FaultError(FaultCode::bad_request, "probePeriodSeconds must be positive");
  if (config.failureThreshold <= 0) throw FaultError(FaultCode::bad_request, "failureThreshold must be positive");
}

double ewma_update(std::optional<double> prev, double sample_ms, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw FaultError(FaultCode::bad_request, "alpha must be in (0,1]");
  if (!(sample_ms >= 0.0) || !std::isfinite(sample_ms)) {
    throw FaultError(FaultCode::bad_request, "latency sample must be a finite nonnegative number");
  }
  if (!prev) return sample_ms;
  return alpha * sample_ms + (1.0 - alpha) * *prev;
}

EndpointMetric record_sample(EndpointMetric metric, const LatencySample& sample, const MonitorConfig& config) {
  if (sample.ok) {
    metric.ewma_ms = ewma_update(metric.ewma_ms, sample.rtt_ms, config.alpha);
    ++metric.sampleCount;
    metric.consecutiveFailures = 0;
  } else {
    ++metric.consecutiveFailures;
  }
  metric.available = metric.consecutiveFailures < config.failureThreshold;
  return metric;
}

LatencySample probe(const wire::Endpoint& endpoint, int timeout_ms) {
  wire::MethodCall call{wire::next_call_id(), "probe", std::nullopt, std::nullopt, "ping", {}};
  auto started = std::chrono::steady_clock::now();
  auto at = std::chrono::system_clock::now();
  auto response = wire::invoke(endpoint, call, timeout_ms);
  std::chrono::duration<double, std::milli> rtt = std::chrono::steady_clock::now() - started;
  return LatencySample{endpoint, rtt.count(), !response.is_fault(), at};
}

std::optional<double> ewma_cost(const EndpointMetric& m) { return m.ewma_ms; }

std::vector<Candidate> select_optimal(const std::vector<Candidate>& candidates, const MetricMap& metrics,
                                      const CostFunction& cost) {
  struct Ranked {
    const Candidate* candidate;
    double cost;  // +inf for UNKNOWN
  };
  std::vector<Ranked> ranked;
  for (const auto& c : candidates) {
    auto it = metrics.find(c.second);
    double value = std::numeric_limits<double>::infinity();
    if (it != metrics.end()) {
      if (!it->second.available) continue;
      if (auto v = cost(it->second)) value = *v;
    }
    ranked.push_back({&c, value});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.candidate->first < b.candidate->first;
  });
  std::vector<Candidate> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(*r.candidate);
  return out;
}

// ---------------------------------------------------------------------------

Monitor::Monitor(MonitorConfig config) : config_(config) { validate(config_); }

Monitor::~Monitor() { stop(); }

EndpointMetric Monitor::record(const LatencySample& sample) {
  std::lock_guard lock(mutex_);
  auto& slot = metrics_[sample.endpoint];
  slot = record_sample(slot, sample, config_);
  return slot;
}

void Monitor::put(const wire::Endpoint& endpoint, EndpointMetric metric) {
  std::lock_guard lock(mutex_);
  metrics_.insert_or_assign(endpoint, metric);
}

std::optional<EndpointMetric> Monitor::metric(const wire::Endpoint& endpoint) const {
  std::lock_guard lock(mutex_);
  auto it = metrics_.find(endpoint);
  if (it == metrics_.end()) return std::nullopt;
  return it->second;
}

MetricMap Monitor::snapshot() const {
  std::lock_guard lock(mutex_);
  return metrics_;
}

LatencySample Monitor::probe_and_record(const wire::Endpoint& endpoint, int timeout_ms) {
  auto sample = probe(endpoint, timeout_ms);
  record(sample);
  return sample;
}

void Monitor::start(std::function<std::vector<wire::Endpoint>()> targets, int timeout_ms) {
  if (loop_.joinable()) return;
  {
    std::lock_guard lock(loop_mutex_);
    stopping_ = false;
  }
  loop_ = std::thread([this, targets = std::move(targets), timeout_ms] {
    const auto period = std::chrono::seconds(config_.probePeriodSeconds);
    for (;;) {
      std::vector<wire::Endpoint> endpoints;
      try {
        endpoints = targets();
      } catch (const std::exception&) {
        // target discovery failed this round; try again next period
      }
      for (const auto& ep : endpoints) probe_and_record(ep, timeout_ms);
      std::unique_lock lock(loop_mutex_);
      if (loop_cv_.wait_for(lock, period, [this] { return stopping_; })) return;
    }
  });
}

void Monitor::stop() {
  {
    std::lock_guard lock(loop_mutex_);
    stopping_ = true;
  }
  loop_cv_.notify_all();
  if (loop_.joinable()) loop_.join();
}

}  // namespace gridwh::monitor
