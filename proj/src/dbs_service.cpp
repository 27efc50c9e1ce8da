#include "gridwh/dbs_service.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "gridwh/json.hpp"

namespace gridwh::dbs {
namespace {

[[noreturn]] void bad_config(std::string message) {
  throw FaultError(FaultCode::bad_request, "service config: " + std::move(message));
}

const Value& require(const Value& m, std::string_view key) {
  const Value* v = m.find(key);
  if (!v || v->is_null()) bad_config("missing '" + std::string(key) + "'");
  return *v;
}

std::string random_hex_128() {
  std::random_device rd;
  std::array<std::uint32_t, 4> words{};
  for (auto& w : words) w = rd();
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (auto w : words) {
    for (int shift = 28; shift >= 0; shift -= 4) out += digits[(w >> shift) & 0xF];
  }
  return out;
}

std::string param_text(const wire::MethodCall& call, std::string_view key) {
  auto it = call.params.find(key);
  if (it == call.params.end()) {
    throw FaultError(FaultCode::bad_request, "missing parameter '" + std::string(key) + "'");
  }
  return it->second.as_text();
}

}  // namespace

ServiceConfig parse_service_config(const Value& v, const std::filesystem::path& base_dir) {
  if (!v.is_map()) bad_config("must be a JSON object");
  ServiceConfig c;
  c.serviceKey = require(v, "serviceKey").as_text();
  if (!registry::is_valid_service_key(c.serviceKey)) bad_config("serviceKey must match [a-z0-9-]{1,64}");

  if (const Value* listen = v.find("listen"); listen && !listen->is_null()) {
    const auto& text = listen->as_text();
    auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0) bad_config("listen must be host:port");
    c.listenHost = text.substr(0, colon);
    auto port_text = std::string_view(text).substr(colon + 1);
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), c.listenPort);
    if (ec != std::errc{} || p != port_text.data() + port_text.size() || c.listenPort < 0 || c.listenPort > 65535) {
      bad_config("listen port must be 0-65535");
    }
  }
  c.dialect = dialect_from_string(require(v, "dialect").as_text());
  if (const Value* x = v.find("authRequired"); x && !x->is_null()) c.authRequired = x->as_bool();
  if (const Value* x = v.find("accessToken"); x && !x->is_null()) c.accessToken = x->as_text();
  if (c.authRequired && c.accessToken.empty()) bad_config("authRequired needs a nonempty accessToken");
  if (const Value* x = v.find("registryUrl"); x && !x->is_null()) {
    c.registryUrl = x->as_text();
    wire::Endpoint::parse(*c.registryUrl);
  }
  if (const Value* x = v.find("autoPublish"); x && !x->is_null()) c.autoPublish = x->as_bool();
  if (c.autoPublish && !c.registryUrl) bad_config("autoPublish needs registryUrl");
  if (const Value* x = v.find("injectedDelayMs"); x && !x->is_null()) c.injectedDelayMs = x->as_int();
  if (c.injectedDelayMs < 0) bad_config("injectedDelayMs must be nonnegative");
  if (const Value* x = v.find("sessionTtlSeconds"); x && !x->is_null()) c.sessionTtlSeconds = x->as_int();
  if (c.sessionTtlSeconds <= 0) bad_config("sessionTtlSeconds must be positive");
  if (const Value* x = v.find("providerName"); x && !x->is_null()) c.providerName = x->as_text();
  if (const Value* x = v.find("description"); x && !x->is_null()) c.description = x->as_text();
  if (const Value* x = v.find("registryAdminToken"); x && !x->is_null()) c.registryAdminToken = x->as_text();

  for (const auto& t : require(v, "tables").as_list()) {
    TableSpec spec;
    spec.name = require(t, "name").as_text();
    if (spec.name.empty()) bad_config("table name must be nonempty");
    std::filesystem::path csv = require(t, "csv").as_text();
    spec.csv = csv.is_absolute() ? csv : base_dir / csv;
    for (const auto& col : require(t, "schema").as_list()) {
      spec.schema.push_back(Column{require(col, "name").as_text(), column_type_from_string(require(col, "type").as_text())});
    }
    if (spec.schema.empty()) bad_config("table '" + spec.name + "' needs a schema");
    c.tables.push_back(std::move(spec));
  }
  if (c.tables.empty()) bad_config("at least one table is required");
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FaultError(FaultCode::bad_request, "cannot read config " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_service_config(from_json(parse_json_text(ss.str())), file.parent_path());
}

std::shared_ptr<const TableStore> load_tables(const ServiceConfig& config) {
  auto store = std::make_shared<TableStore>();
  for (const auto& spec : config.tables) {
    store->insert_or_assign(spec.name, load_table(spec.csv, spec.schema, spec.name));
  }
  return store;
}

Value to_value(const SessionHandle& s) {
  return Value::Map{{"sessionId", s.sessionId},
                    {"serviceKey", s.serviceKey},
                    {"createdAt", epoch_seconds(s.createdAt)},
                    {"ttlSeconds", s.ttlSeconds}};
}

SessionHandle session_from_value(const Value& v) {
  SessionHandle s;
  s.sessionId = require(v, "sessionId").as_text();
  s.serviceKey = require(v, "serviceKey").as_text();
  s.createdAt = TimePoint(std::chrono::seconds(require(v, "createdAt").as_int()));
  s.ttlSeconds = require(v, "ttlSeconds").as_int();
  return s;
}

Value to_value(const ServiceDescription& d) {
  Value::List ops;
  for (const auto& op : d.operations) {
    Value::List params;
    for (const auto& [name, type] : op.params) params.emplace_back(Value::Map{{"name", name}, {"type", type}});
    ops.emplace_back(Value::Map{{"name", op.name}, {"params", std::move(params)}});
  }
  auto v = registry::to_value(d.descriptor);
  v.as_map().insert_or_assign("signatures", std::move(ops));
  return v;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& DbsService::method_names() {
  static const std::vector<std::string> names{"createSession", "describe", "execute", "ping"};
  return names;
}

DbsService::DbsService(ServiceConfig config, std::shared_ptr<const TableStore> tables, Clock clock)
    : DbsService(std::move(config), tables, nullptr, std::move(clock)) {}

DbsService::DbsService(ServiceConfig config, std::shared_ptr<const TableStore> tables,
                       std::unique_ptr<Backend> backend, Clock clock)
    : config_(std::move(config)), tables_(std::move(tables)), backend_(std::move(backend)), clock_(std::move(clock)) {
  if (!tables_) tables_ = std::make_shared<const TableStore>();
  if (!backend_) backend_ = std::make_unique<DeskBackend>(config_.dialect, tables_);
  if (backend_->dialect() != config_.dialect) {
    throw FaultError(FaultCode::dialect_unsupported, "backend dialect does not match configured dialect");
  }
}

DbsService::~DbsService() { stop(); }

SessionHandle DbsService::create_session(const std::optional<std::string>& token) {
  if (config_.authRequired && (!token || *token != config_.accessToken)) {
    throw FaultError(FaultCode::access_denied, "invalid access token for " + config_.serviceKey);
  }
  SessionHandle s{config_.serviceKey + "." + random_hex_128(), config_.serviceKey, clock_(), config_.sessionTtlSeconds};
  std::lock_guard lock(sessions_mutex_);
  // Drop expired leases while we hold the lock.
  auto now = s.createdAt;
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.expired(now); });
  sessions_.emplace(s.sessionId, s);
  return s;
}

SessionHandle DbsService::validate_session(std::string_view session_id) {
  auto dot = session_id.rfind('.');
  if (dot != std::string_view::npos && session_id.substr(0, dot) != config_.serviceKey) {
    throw FaultError(FaultCode::access_denied, "session belongs to another service");
  }
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw FaultError(FaultCode::session_expired, "unknown or expired session");
  if (it->second.expired(clock_())) {
    sessions_.erase(it);
    throw FaultError(FaultCode::session_expired, "session lease expired");
  }
  return it->second;
}

ResultSet DbsService::handle_execute(std::string_view session_id, std::string_view query_text) {
  validate_session(session_id);
  auto q = parse_query(query_text);
  return backend_->execute(translate(q, config_.dialect));
}

registry::ServiceDescriptor DbsService::descriptor() const {
  registry::ServiceDescriptor d;
  d.serviceKey = config_.serviceKey;
  d.providerName = config_.providerName;
  d.description = config_.description;
  d.endpoint = server_ ? server_->endpoint().url()
                       : "http://" + config_.listenHost + ":" + std::to_string(config_.listenPort) + "/rpc";
  for (const auto& [name, table] : *tables_) {
    d.datasets.push_back(registry::DatasetEntry{name, static_cast<std::int64_t>(table.rows.size())});
  }
  d.dialect = std::string(to_string(config_.dialect));
  d.operations = method_names();
  d.authRequired = config_.authRequired;
  d.publishedAt = epoch_seconds(clock_());
  return d;
}

ServiceDescription DbsService::describe() const {
  return ServiceDescription{descriptor(),
                            {
                                {"createSession", {{"token", "text|null"}}},
                                {"describe", {}},
                                {"execute", {{"sql", "text"}}},
                                {"ping", {}},
                            }};
}

Value::Map DbsService::ping() const { return {{"pong", epoch_seconds(clock_())}}; }

wire::HandlerTable DbsService::handlers() {
  wire::HandlerTable table;
  table.emplace("createSession", [this](const wire::MethodCall& call) -> wire::Reply {
    std::optional<std::string> token = call.token;
    if (auto it = call.params.find("token"); it != call.params.end() && !it->second.is_null()) {
      token = it->second.as_text();
    }
    return to_value(create_session(token));
  });
  table.emplace("execute", [this](const wire::MethodCall& call) -> wire::Reply {
    if (!call.session) throw FaultError(FaultCode::session_expired, "execute requires a session");
    return to_value(handle_execute(*call.session, param_text(call, "sql")));
  });
  table.emplace("describe", [this](const wire::MethodCall&) -> wire::Reply { return to_value(describe()); });
  table.emplace("ping", [this](const wire::MethodCall&) -> wire::Reply { return Value(ping()); });
  return table;
}

void DbsService::start() {
  if (server_) return;
  wire::RpcServer::Options opts;
  opts.host = config_.listenHost;
  opts.port = config_.listenPort;
  opts.service = config_.serviceKey;
  opts.injected_delay = std::chrono::milliseconds(config_.injectedDelayMs);
  auto server = std::make_unique<wire::RpcServer>(handlers(), opts);
  server->start();
  server_ = std::move(server);

  if (config_.autoPublish) {
    std::string token = config_.registryAdminToken.value_or("");
    if (!config_.registryAdminToken) {
      if (const char* env = std::getenv("GRIDWH_ADMIN_TOKEN")) token = env;
    }
    publish_descriptor(wire::Endpoint::parse(*config_.registryUrl), descriptor(), token);
  }
}

void DbsService::stop() {
  if (server_) {
    server_->stop();
    server_.reset();
  }
}

bool DbsService::running() const { return server_ && server_->running(); }

wire::Endpoint DbsService::endpoint() const {
  if (!server_) throw FaultError(FaultCode::unreachable, config_.serviceKey + " is not serving");
  return server_->endpoint();
}

std::string publish_descriptor(const wire::Endpoint& registry_url, const registry::ServiceDescriptor& descriptor,
                               const std::string& admin_token, int timeout_ms) {
  wire::MethodCall call{wire::next_call_id(),
                        std::string(wire::kRegistryService),
                        std::nullopt,
                        std::nullopt,
                        "publish",
                        {{"descriptor", registry::to_value(descriptor)}, {"token", admin_token}}};
  auto r = wire::invoke(registry_url, call, timeout_ms);
  return r.value_or_throw().as_text();
}

}  // namespace gridwh::dbs
