#include "gridwh/broker.hpp"

#include <chrono>

namespace gridwh::broker {
namespace {

FaultError with_attempts(Fault fault, int attempts, const std::vector<std::string>& tried) {
  auto detail = fault.detail.value_or(Value::Map{});
  detail.insert_or_assign("attempts", static_cast<std::int64_t>(attempts));
  detail.insert_or_assign("tried", Value::List(tried.begin(), tried.end()));
  fault.detail = std::move(detail);
  return FaultError(std::move(fault));
}

}  // namespace

Broker::Broker(monitor::MonitorConfig config, Clock clock) : monitor_(config), clock_(std::move(clock)) {}

std::vector<registry::ServiceDescriptor> Broker::locate(const wire::Endpoint& registry_url, std::string_view dataset,
                                                        int timeout_ms) {
  if (dataset.empty()) throw FaultError(FaultCode::bad_request, "dataset must be nonempty");
  registry::FindQuery q{std::string(dataset), std::nullopt};
  wire::MethodCall call{wire::next_call_id(), std::string(wire::kRegistryService), std::nullopt, std::nullopt, "find",
                        {{"query", registry::to_value(q)}}};
  auto response = wire::invoke(registry_url, call, timeout_ms);
  if (response.is_fault()) {
    const auto& f = response.fault();
    if (is_transport(f.code)) {
      throw FaultError(FaultCode::registry_unavailable, "registry at " + registry_url.url() + ": " + f.message,
                       Value::Map{{"registry", registry_url.url()}, {"cause", std::string(to_string(f.code))}});
    }
    throw FaultError(f);
  }
  std::vector<registry::ServiceDescriptor> out;
  for (const auto& item : response.result().as_list()) out.push_back(registry::descriptor_from_value(item));
  return out;
}

BoundService Broker::bind(const registry::ServiceDescriptor& descriptor, const std::optional<std::string>& token,
                          int timeout_ms) {
  auto endpoint = descriptor.parsed_endpoint();
  Value::Map params;
  params.emplace("token", token ? Value(*token) : Value());
  wire::MethodCall call{wire::next_call_id(), descriptor.serviceKey, std::nullopt, token, "createSession",
                        std::move(params)};
  auto response = wire::invoke(endpoint, call, timeout_ms);
  auto session = dbs::session_from_value(response.value_or_throw());
  if (session.serviceKey != descriptor.serviceKey) {
    throw FaultError(FaultCode::backend_failure, "session issued for '" + session.serviceKey + "', expected '" +
                                                     descriptor.serviceKey + "'");
  }
  BoundService bound{descriptor, std::move(session), clock_()};
  std::lock_guard lock(cache_mutex_);
  cache_.insert_or_assign(CacheKey{descriptor.serviceKey, token.value_or("")}, bound);
  return bound;
}

std::optional<BoundService> Broker::cached(const CacheKey& key) {
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(key);
  if (it == cache_.end()) return std::nullopt;
  it->second.lastUsed = clock_();
  return it->second;
}

std::pair<dbs::ResultSet, double> Broker::execute_on(const registry::ServiceDescriptor& descriptor,
                                                     std::string_view query_text, const QueryOptions& opts) {
  const CacheKey key{descriptor.serviceKey, opts.token.value_or("")};
  auto endpoint = descriptor.parsed_endpoint();
  auto run = [&](const BoundService& bound) {
    wire::MethodCall call{wire::next_call_id(), descriptor.serviceKey, bound.session.sessionId, opts.token, "execute",
                          {{"sql", std::string(query_text)}}};
    auto started = std::chrono::steady_clock::now();
    auto response = wire::invoke(endpoint, call, opts.timeout_ms);
    std::chrono::duration<double, std::milli> rtt = std::chrono::steady_clock::now() - started;
    return std::pair{std::move(response), rtt.count()};
  };

  auto bound = cached(key);
  if (!bound) bound = bind(descriptor, opts.token, opts.timeout_ms);
  auto [response, rtt] = run(*bound);
  if (response.is_fault() && response.fault().code == FaultCode::session_expired) {
    {
      std::lock_guard lock(cache_mutex_);
      cache_.erase(key);
    }
    auto fresh = bind(descriptor, opts.token, opts.timeout_ms);
    std::tie(response, rtt) = run(fresh);
  }
  return {dbs::result_set_from_value(response.value_or_throw()), rtt};
}

QueryOutcome Broker::query_dataset(const wire::Endpoint& registry_url, std::string_view dataset,
                                   std::string_view query_text, const QueryOptions& opts) {
  if (query_text.empty()) throw FaultError(FaultCode::bad_request, "query text must be nonempty");
  if (opts.maxAttempts < 1) throw FaultError(FaultCode::bad_request, "maxAttempts must be at least 1");
  std::vector<std::string> tried;

  std::vector<registry::ServiceDescriptor> located;
  try {
    located = locate(registry_url, dataset, opts.timeout_ms);
  } catch (const FaultError& e) {
    throw with_attempts(e.fault(), 0, tried);
  }
  if (located.empty()) {
    throw with_attempts(Fault{FaultCode::unknown_dataset, "no registered service holds '" + std::string(dataset) + "'",
                              Value::Map{{"dataset", std::string(dataset)}}},
                        0, tried);
  }

  std::map<std::string, const registry::ServiceDescriptor*> by_key;
  std::vector<monitor::Candidate> candidates;
  for (const auto& d : located) {
    try {
      candidates.emplace_back(d.serviceKey, d.parsed_endpoint());
      by_key[d.serviceKey] = &d;
    } catch (const FaultError&) {
      // unusable endpoint in the registry record
    }
  }

  // Cold start: measure endpoints we know nothing about before ranking.
  for (const auto& [key, ep] : candidates) {
    auto m = monitor_.metric(ep);
    if (!m || (!m->ewma_ms && m->available)) monitor_.probe_and_record(ep, opts.timeout_ms);
  }
  auto ranking = monitor::select_optimal(candidates, monitor_.snapshot());
  if (ranking.empty()) {
    // Every replica is marked down; give each one fresh chance.
    for (const auto& [key, ep] : candidates) monitor_.probe_and_record(ep, opts.timeout_ms);
    ranking = monitor::select_optimal(candidates, monitor_.snapshot());
  }
  if (ranking.empty()) {
    throw with_attempts(Fault{FaultCode::unreachable, "no available endpoint for '" + std::string(dataset) + "'",
                              Value::Map{{"dataset", std::string(dataset)}}},
                        0, tried);
  }

  std::optional<Fault> last;
  int attempts = 0;
  for (const auto& [key, ep] : ranking) {
    if (attempts >= opts.maxAttempts) break;
    ++attempts;
    tried.push_back(ep.url());
    try {
      auto [rows, rtt] = execute_on(*by_key.at(key), query_text, opts);
      monitor_.record(monitor::LatencySample{ep, rtt, true, clock_()});
      return QueryOutcome{std::move(rows), key, ep, attempts, ranking, tried};
    } catch (const FaultError& e) {
      if (!is_transport(e.code())) throw with_attempts(e.fault(), attempts, tried);
      monitor_.record(monitor::LatencySample{ep, 0.0, false, clock_()});
      last = e.fault();
    }
  }
  throw with_attempts(*last, attempts, tried);
}

std::size_t Broker::cached_sessions() const {
  std::lock_guard lock(cache_mutex_);
  return cache_.size();
}

void Broker::forget_sessions() {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

}  // namespace gridwh::broker
