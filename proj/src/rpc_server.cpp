#include "gridwh/rpc_server.hpp"

#include <httplib.h>

#include <thread>

namespace gridwh::wire {

struct RpcServer::Impl {
  HandlerTable handlers;
  Options options;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
};

RpcServer::RpcServer(HandlerTable handlers, Options options) : impl_(std::make_unique<Impl>()) {
  impl_->handlers = std::move(handlers);
  impl_->options = std::move(options);

  auto* impl = impl_.get();
  // Oversized envelopes are turned into bad-request faults by dispatch; the
  // transport limit sits a little above so that path is reachable.
  impl->server.set_payload_max_length(kMaxEnvelopeBytes + 1024 * 1024);
  impl->server.Post("/rpc", [impl](const httplib::Request& req, httplib::Response& res) {
    if (impl->options.injected_delay.count() > 0) std::this_thread::sleep_for(impl->options.injected_delay);
    std::optional<std::string_view> service;
    if (impl->options.service) service = *impl->options.service;
    res.set_content(dispatch(impl->handlers, req.body, service), "application/json");
  });
}

RpcServer::~RpcServer() { stop(); }

void RpcServer::start() {
  if (impl_->thread.joinable()) return;
  auto& opts = impl_->options;
  int port = opts.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(opts.host);
    if (port < 0) port = 0;
  } else if (!impl_->server.bind_to_port(opts.host, port)) {
    port = 0;
  }
  if (port <= 0) {
    throw FaultError(FaultCode::backend_failure,
                     "cannot bind " + opts.host + ":" + std::to_string(opts.port));
  }
  impl_->bound_port = port;
  impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void RpcServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

bool RpcServer::running() const { return impl_->thread.joinable() && impl_->server.is_running(); }

int RpcServer::port() const { return impl_->bound_port; }

Endpoint RpcServer::endpoint() const {
  std::string host = impl_->options.host;
  if (host == "0.0.0.0" || host.empty()) host = "127.0.0.1";
  return Endpoint::from_host_port(host, impl_->bound_port);
}

}  // namespace gridwh::wire
