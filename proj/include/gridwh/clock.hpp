#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>

namespace gridwh {

using TimePoint = std::chrono::system_clock::time_point;

/// Wall-clock source. Components take one so tests can control time.
using Clock = std::function<TimePoint()>;

inline Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

inline std::int64_t epoch_seconds(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::seconds>(t.time_since_epoch()).count();
}

/// Manually advanced clock for tests and demos. Copies of `clock()` share
/// the same underlying time.
class ManualClock {
public:
  explicit ManualClock(TimePoint start = std::chrono::system_clock::now())
      : now_(std::make_shared<std::atomic<std::int64_t>>(start.time_since_epoch().count())) {}

  void advance(std::chrono::system_clock::duration d) { now_->fetch_add(d.count()); }

  TimePoint now() const { return TimePoint(std::chrono::system_clock::duration(now_->load())); }

  Clock clock() const {
    return [now = now_] { return TimePoint(std::chrono::system_clock::duration(now->load())); };
  }

private:
  std::shared_ptr<std::atomic<std::int64_t>> now_;
};

}  // namespace gridwh
