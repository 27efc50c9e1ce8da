#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "gridwh/wire.hpp"

namespace gridwh::wire {

/// HTTP front end for a handler table: POST /rpc → dispatch.
///
/// The handler table is fixed at construction. `start()` binds and serves on
/// a background thread; port 0 picks a free port. An injected delay is slept
/// before every dispatch (test harness latency).
class RpcServer {
public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;
    std::optional<std::string> service;  // reject calls addressed elsewhere
    std::chrono::milliseconds injected_delay{0};
  };

  RpcServer(HandlerTable handlers, Options options);
  ~RpcServer();

  RpcServer(const RpcServer&) = delete;
  RpcServer& operator=(const RpcServer&) = delete;

  /// Throws FaultError{backend-failure} when the address cannot be bound.
  void start();
  void stop();
  bool running() const;

  int port() const;
  Endpoint endpoint() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gridwh::wire
