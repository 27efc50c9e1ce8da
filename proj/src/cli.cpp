#include "gridwh/cli.hpp"

#include <CLI11.hpp>

#include <pthread.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "gridwh/broker.hpp"
#include "gridwh/dbs_service.hpp"
#include "gridwh/json.hpp"
#include "gridwh/monitor.hpp"
#include "gridwh/registry.hpp"
#include "gridwh/rpc_server.hpp"

namespace gridwh::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_real(double d) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  return std::string(buf.data(), p);
}

std::string format_ms(double ms) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << ms;
  return ss.str();
}

std::string cell_text(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::null: return "NULL";
    case Value::Kind::boolean: return v.as_bool() ? "true" : "false";
    case Value::Kind::integer: return std::to_string(v.as_int());
    case Value::Kind::real: return format_real(v.as_real());
    case Value::Kind::text: return v.as_text();
    default: return to_json_text(v);
  }
}

void print_table(std::ostream& os, const dbs::ResultSet& rs) {
  std::vector<std::size_t> width;
  for (const auto& c : rs.columns) width.push_back(c.name.size());
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rs.rows) {
    auto& line = cells.emplace_back();
    for (std::size_t i = 0; i < row.size(); ++i) {
      line.push_back(cell_text(row[i]));
      width[i] = std::max(width[i], line.back().size());
    }
  }
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << " | ";
      os << fields[i];
      if (i + 1 < fields.size()) os << std::string(width[i] - fields[i].size(), ' ');
    }
    os << '\n';
  };
  std::vector<std::string> header;
  for (const auto& c : rs.columns) header.push_back(c.name);
  emit(header);
  for (std::size_t i = 0; i < width.size(); ++i) {
    if (i) os << "-+-";
    os << std::string(width[i], '-');
  }
  os << '\n';
  for (const auto& line : cells) emit(line);
  os << rs.rowCount << (rs.rowCount == 1 ? " row" : " rows") << '\n';
}

std::string plural(std::size_t n, const char* noun) {
  return std::to_string(n) + " " + noun + (n == 1 ? "" : "s");
}

/// Human text goes to `text()`; in JSON mode that stream is discarded and a
/// single document is written when the command finishes.
class Output {
public:
  Output(bool json, std::ostream& out) : json_(json), out_(out) {}

  std::ostream& text() { return json_ ? sink_ : out_; }
  bool json() const { return json_; }

  void set(std::string key, Value v) { data_.insert_or_assign(std::move(key), std::move(v)); }
  void set_data(Value v) { whole_ = std::move(v); }

  int ok() {
    if (json_) {
      OrderedJson doc = OrderedJson::object();
      doc["ok"] = true;
      doc["data"] = to_json(whole_ ? *whole_ : Value(data_));
      out_ << doc.dump() << '\n';
    }
    return kExitOk;
  }

  int fail(const Fault& f, std::ostream& err, int code = kExitFault) {
    if (json_) {
      OrderedJson doc = OrderedJson::object();
      doc["ok"] = false;
      OrderedJson fault = OrderedJson::object();
      fault["code"] = std::string(to_string(f.code));
      fault["message"] = f.message;
      fault["detail"] = f.detail ? to_json(Value(*f.detail)) : OrderedJson(nullptr);
      doc["fault"] = std::move(fault);
      doc["data"] = nullptr;
      out_ << doc.dump() << '\n';
    } else {
      err << "error: " << to_string(f.code) << ": " << f.message << '\n';
    }
    return code;
  }

private:
  bool json_;
  std::ostream& out_;
  std::ostringstream sink_;
  Value::Map data_;
  std::optional<Value> whole_;
};

// Blocks SIGINT/SIGTERM for this thread and threads started afterwards, so
// the serve loop can sigwait for them.
sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_shutdown(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

std::string random_token() {
  std::random_device rd;
  std::ostringstream ss;
  ss << std::hex << rd() << rd();
  return ss.str();
}

// Temp directory removed on scope exit.
class ScratchDir {
public:
  ScratchDir() {
    path_ = fs::temp_directory_path() / ("gridwh-demo-" + random_token());
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

Value outcome_value(const broker::QueryOutcome& o) {
  Value::List tried(o.tried.begin(), o.tried.end());
  return Value::Map{{"servedBy", o.servedBy},
                    {"endpoint", o.endpoint.url()},
                    {"attempts", static_cast<std::int64_t>(o.attempts)},
                    {"tried", std::move(tried)},
                    {"resultSet", dbs::to_value(o.resultSet)}};
}

Value metric_value(const std::string& key, const wire::Endpoint& ep, const monitor::EndpointMetric& m) {
  return Value::Map{{"serviceKey", key},
                    {"endpoint", ep.url()},
                    {"ewmaMs", m.ewma_ms ? Value(*m.ewma_ms) : Value()},
                    {"sampleCount", m.sampleCount},
                    {"consecutiveFailures", m.consecutiveFailures},
                    {"available", m.available}};
}

void print_outcome(std::ostream& os, const broker::QueryOutcome& o) {
  os << "served-by: " << o.servedBy << " " << o.endpoint.url() << '\n';
  os << "attempts: " << o.attempts << '\n';
  print_table(os, o.resultSet);
}

// ---------------------------------------------------------------------------
// Commands

struct CommonArgs {
  std::string registry;
  std::string dataset;
  std::string sql;
  std::string token;
  std::string store;
  std::string listen = "127.0.0.1:0";
  std::string admin_token;
  std::string config;
  std::string fixture;
  std::string delays;
  int sites = 3;
  int samples = 3;
  int timeout_ms = 5000;
  int max_attempts = 3;
};

std::pair<std::string, int> split_host_port(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw UsageError("--listen must be host:port");
  int port = -1;
  auto tail = std::string_view(text).substr(colon + 1);
  auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), port);
  if (ec != std::errc{} || p != tail.data() + tail.size() || port < 0 || port > 65535) {
    throw UsageError("--listen port must be 0-65535");
  }
  return {text.substr(0, colon), port};
}

int cmd_registry_serve(const CommonArgs& a, Output& out) {
  auto [host, port] = split_host_port(a.listen);
  auto signals = block_shutdown_signals();
  auto reg = registry::Registry::open(a.store, a.admin_token);
  for (const auto& w : reg->warnings()) std::cerr << "warning: " << w << '\n';
  wire::RpcServer server(registry::handlers(*reg), {host, port, std::string(wire::kRegistryService), {}});
  server.start();
  auto info = reg->info();
  out.text() << "registry listening at " << server.endpoint().url() << " (uddiVersion "
             << info.at("uddiVersion").as_text() << ", " << plural(reg->size(), "service") << ", store "
             << a.store << ")" << std::endl;
  wait_for_shutdown(signals);
  server.stop();
  out.set("endpoint", server.endpoint().url());
  return out.ok();
}

int cmd_dbs_serve(const CommonArgs& a, Output& out) {
  auto signals = block_shutdown_signals();
  auto config = dbs::load_service_config(a.config);
  dbs::DbsService service(config, dbs::load_tables(config));
  service.start();
  out.text() << config.serviceKey << " (" << dbs::to_string(config.dialect) << ") listening at "
             << service.endpoint().url() << (config.autoPublish ? ", published to " + *config.registryUrl : "")
             << std::endl;
  wait_for_shutdown(signals);
  service.stop();
  out.set("endpoint", service.endpoint().url());
  return out.ok();
}

int cmd_publish(const CommonArgs& a, Output& out) {
  auto registry_url = wire::Endpoint::parse(a.registry);
  auto config = dbs::load_service_config(a.config);
  if (config.listenPort == 0) throw UsageError("publish needs a fixed listen port in the service config");
  dbs::DbsService service(config, dbs::load_tables(config));
  auto descriptor = service.descriptor();
  auto key = dbs::publish_descriptor(registry_url, descriptor, a.admin_token, a.timeout_ms);
  out.text() << "published " << key << " -> " << descriptor.endpoint << '\n';
  out.set("serviceKey", key);
  out.set("endpoint", descriptor.endpoint);
  return out.ok();
}

int cmd_find(const CommonArgs& a, Output& out) {
  broker::Broker b;
  auto found = b.locate(wire::Endpoint::parse(a.registry), a.dataset, a.timeout_ms);
  out.text() << plural(found.size(), "service") << '\n';
  Value::List list;
  for (const auto& d : found) {
    out.text() << d.serviceKey << "  " << d.endpoint << "  " << d.dialect << '\n';
    list.push_back(registry::to_value(d));
  }
  out.set_data(Value(std::move(list)));
  return out.ok();
}

int cmd_query(const CommonArgs& a, Output& out) {
  broker::Broker b;
  broker::QueryOptions opts;
  opts.timeout_ms = a.timeout_ms;
  opts.maxAttempts = a.max_attempts;
  if (!a.token.empty()) opts.token = a.token;
  auto outcome = b.query_dataset(wire::Endpoint::parse(a.registry), a.dataset, a.sql, opts);
  print_outcome(out.text(), outcome);
  out.set_data(outcome_value(outcome));
  return out.ok();
}

int cmd_probe(const CommonArgs& a, Output& out) {
  broker::Broker b;
  auto found = b.locate(wire::Endpoint::parse(a.registry), "*", a.timeout_ms);
  Value::List list;
  out.text() << plural(found.size(), "service") << '\n';
  for (const auto& d : found) {
    auto ep = d.parsed_endpoint();
    for (int i = 0; i < a.samples; ++i) b.monitor().probe_and_record(ep, a.timeout_ms);
    auto m = b.monitor().metric(ep).value_or(monitor::EndpointMetric{});
    out.text() << d.serviceKey << "  " << ep.url() << "  ewma "
               << (m.ewma_ms ? format_ms(*m.ewma_ms) + " ms" : std::string("UNKNOWN")) << "  "
               << (m.available ? "available" : "unavailable") << '\n';
    list.push_back(metric_value(d.serviceKey, ep, m));
  }
  out.set_data(Value(std::move(list)));
  return out.ok();
}

std::vector<std::int64_t> parse_delays(const std::string& text, int sites) {
  std::vector<std::int64_t> delays;
  if (text.empty()) {
    for (int i = 0; i < sites; ++i) delays.push_back(10 * ((i + 1) % sites));
    return delays;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::int64_t v = -1;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size() || v < 0) throw UsageError("--delays expects ms,ms,...");
    delays.push_back(v);
  }
  if (static_cast<int>(delays.size()) != sites) throw UsageError("--delays needs one value per site");
  return delays;
}

int cmd_demo(const CommonArgs& a, Output& out) {
  if (a.sites < 1) throw UsageError("--sites must be at least 1");
  auto delays = parse_delays(a.delays, a.sites);
  auto& os = out.text();
  ScratchDir scratch;
  const auto admin = random_token();
  Value::Map report;

  fs::path fixture = a.fixture;
  if (fixture.empty()) {
    fixture = scratch.path() / "events.csv";
    write_events_fixture(fixture);
  }
  const std::string dataset = fixture.stem().string();
  auto schema = dbs::infer_schema(fixture);

  fs::create_directories(scratch.path() / "store");
  auto reg = registry::Registry::open(scratch.path() / "store", admin);
  wire::RpcServer registry_server(registry::handlers(*reg), {"127.0.0.1", 0, std::string(wire::kRegistryService), {}});
  registry_server.start();
  const auto registry_url = registry_server.endpoint();
  os << "== registry ==\n"
     << registry_url.url() << "  uddiVersion " << reg->info().at("uddiVersion").as_text() << '\n';
  report.emplace("registry", Value::Map{{"endpoint", registry_url.url()}, {"info", reg->info()}});

  static constexpr std::array<dbs::Dialect, 3> kDialects{dbs::Dialect::ansi, dbs::Dialect::tsql, dbs::Dialect::oracle};
  std::vector<std::unique_ptr<dbs::DbsService>> sites;
  os << "== publish ==\n";
  Value::List published;
  for (int i = 0; i < a.sites; ++i) {
    dbs::ServiceConfig cfg;
    cfg.serviceKey = "site-" + std::to_string(i + 1);
    cfg.dialect = kDialects[static_cast<std::size_t>(i) % kDialects.size()];
    cfg.registryUrl = registry_url.url();
    cfg.autoPublish = true;
    cfg.registryAdminToken = admin;
    cfg.injectedDelayMs = delays[static_cast<std::size_t>(i)];
    cfg.providerName = "demo";
    cfg.tables.push_back(dbs::TableSpec{dataset, schema, fixture});
    auto svc = std::make_unique<dbs::DbsService>(cfg, dbs::load_tables(cfg));
    svc->start();
    os << cfg.serviceKey << "  " << dbs::to_string(cfg.dialect) << "  delay " << cfg.injectedDelayMs << " ms  "
       << svc->endpoint().url() << "  published\n";
    published.push_back(Value::Map{{"serviceKey", cfg.serviceKey},
                                   {"dialect", std::string(dbs::to_string(cfg.dialect))},
                                   {"delayMs", cfg.injectedDelayMs},
                                   {"endpoint", svc->endpoint().url()}});
    sites.push_back(std::move(svc));
  }
  report.emplace("published", std::move(published));

  broker::Broker b;
  os << "== locate ==  dataset '" << dataset << "'\n";
  auto located = b.locate(registry_url, dataset);
  os << plural(located.size(), "service") << '\n';
  Value::List loc;
  std::vector<monitor::Candidate> candidates;
  for (const auto& d : located) {
    os << "  " << d.serviceKey << "  " << d.endpoint << "  " << d.dialect << '\n';
    loc.push_back(Value::Map{{"serviceKey", d.serviceKey}, {"endpoint", d.endpoint}, {"dialect", d.dialect}});
    candidates.emplace_back(d.serviceKey, d.parsed_endpoint());
  }
  report.emplace("locate", std::move(loc));

  os << "== probe ==\n";
  Value::List probes;
  for (const auto& [key, ep] : candidates) {
    for (int i = 0; i < 3; ++i) b.monitor().probe_and_record(ep, 5000);
    auto m = *b.monitor().metric(ep);
    os << "  " << key << "  ewma " << (m.ewma_ms ? format_ms(*m.ewma_ms) + " ms" : std::string("UNKNOWN")) << "  "
       << (m.available ? "available" : "unavailable") << '\n';
    probes.push_back(metric_value(key, ep, m));
  }
  report.emplace("probe", std::move(probes));

  os << "== select ==\n";
  auto ranking = monitor::select_optimal(candidates, b.monitor().snapshot());
  Value::List ranked;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    os << "  " << (i + 1) << ". " << ranking[i].first << "  " << ranking[i].second.url() << '\n';
    ranked.emplace_back(ranking[i].first);
  }
  report.emplace("ranking", std::move(ranked));

  const std::string col0 = schema.front().name;
  const std::vector<std::string> queries{
      "SELECT * FROM " + dataset + " LIMIT 5",
      "SELECT * FROM " + dataset + " ORDER BY " + col0 + " DESC LIMIT 3",
  };
  os << "== query ==\n";
  Value::List results;
  for (const auto& sql : queries) {
    os << "sql: " << sql << '\n';
    auto outcome = b.query_dataset(registry_url, dataset, sql);
    print_outcome(os, outcome);
    auto v = outcome_value(outcome);
    v.as_map().emplace("sql", sql);
    results.push_back(std::move(v));
  }
  report.emplace("queries", std::move(results));

  if (sites.size() > 1 && !ranking.empty()) {
    const auto& best = ranking.front().first;
    os << "== failover ==\nstopping " << best << '\n';
    for (auto& s : sites) {
      if (s->config().serviceKey == best) s->stop();
    }
    auto outcome = b.query_dataset(registry_url, dataset, queries.front());
    print_outcome(os, outcome);
    auto v = outcome_value(outcome);
    v.as_map().emplace("stopped", best);
    report.emplace("failover", std::move(v));
  }

  for (auto& s : sites) s->stop();
  registry_server.stop();
  os << "== done ==\n";
  out.set_data(Value(std::move(report)));
  return out.ok();
}

}  // namespace

void write_events_fixture(const std::filesystem::path& path, std::size_t rows) {
  static constexpr std::array<const char*, 4> kTags{"mu", "e", "tau", "jet"};
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FaultError(FaultCode::backend_failure, "cannot write fixture " + path.string());
  os << "id,run,e,tag,good\n";
  for (std::size_t i = 1; i <= rows; ++i) {
    os << i << ',' << 1000 + (i % 7) << ',';
    if (i % 17 != 0) os << format_real(static_cast<double>((i * 37) % 1000) / 10.0);
    os << ',';
    if (i % 23 != 0) os << kTags[i % kTags.size()];
    os << ',' << (i % 3 != 0 ? "true" : "false") << '\n';
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const bool json = std::find(args.begin(), args.end(), "--json") != args.end();
  Output output(json, out);

  CommonArgs a;
  CLI::App app{"gridwh: registry, database services and broker for a distributed relational warehouse", "gridwh"};
  app.set_version_flag("--version", "gridwh 1.0.0");
  app.require_subcommand(1);
  app.fallthrough();
  bool json_flag = false;
  app.add_flag("--json", json_flag, "Machine-readable output");

  auto* reg = app.add_subcommand("registry-serve", "Serve the service registry");
  reg->add_option("--store", a.store, "Document store directory")->required()->check(CLI::ExistingDirectory);
  reg->add_option("--listen", a.listen, "host:port to bind")->required();
  reg->add_option("--admin-token", a.admin_token, "Token guarding publish/deregister")
      ->required()
      ->envname("GRIDWH_ADMIN_TOKEN");

  auto* serve = app.add_subcommand("dbs-serve", "Serve one database service");
  serve->add_option("--config", a.config, "Service config JSON")->required()->check(CLI::ExistingFile);

  auto* pub = app.add_subcommand("publish", "Publish a service descriptor");
  pub->add_option("--registry", a.registry, "Registry endpoint URL")->required();
  pub->add_option("--config", a.config, "Service config JSON")->required()->check(CLI::ExistingFile);
  pub->add_option("--admin-token", a.admin_token, "Registry admin token")->required()->envname("GRIDWH_ADMIN_TOKEN");

  auto* find = app.add_subcommand("find", "Locate services holding a dataset");
  find->add_option("--registry", a.registry, "Registry endpoint URL")->required();
  find->add_option("--dataset", a.dataset, "Dataset name (trailing * for prefix)")->required();

  auto* query = app.add_subcommand("query", "Query a dataset through the virtual database");
  query->add_option("--registry", a.registry, "Registry endpoint URL")->required();
  query->add_option("--dataset", a.dataset, "Dataset name")->required();
  query->add_option("--sql", a.sql, "Canonical SQL")->required();
  query->add_option("--token", a.token, "Service access token");
  query->add_option("--timeout-ms", a.timeout_ms, "Per-call timeout")->check(CLI::PositiveNumber);
  query->add_option("--max-attempts", a.max_attempts, "Replicas to try")->check(CLI::PositiveNumber);

  auto* probe = app.add_subcommand("probe", "Measure latency to every registered service");
  probe->add_option("--registry", a.registry, "Registry endpoint URL")->required();
  probe->add_option("--samples", a.samples, "Pings per endpoint")->check(CLI::PositiveNumber);

  auto* demo = app.add_subcommand("demo", "Run a self-contained multi-site demo");
  demo->add_option("--sites", a.sites, "Number of database sites")->check(CLI::PositiveNumber);
  demo->add_option("--fixture", a.fixture, "Shared CSV fixture")->check(CLI::ExistingFile);
  demo->add_option("--delays", a.delays, "Injected per-site delay in ms, comma separated");

  auto usage_failure = [&](const std::string& message) {
    err << message << '\n' << app.help();
    if (json) return output.fail(Fault{FaultCode::bad_request, message, std::nullopt}, err, kExitUsage);
    return kExitUsage;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return usage_failure(e.what());
  }

  try {
    if (reg->parsed()) return cmd_registry_serve(a, output);
    if (serve->parsed()) return cmd_dbs_serve(a, output);
    if (pub->parsed()) return cmd_publish(a, output);
    if (find->parsed()) return cmd_find(a, output);
    if (query->parsed()) return cmd_query(a, output);
    if (probe->parsed()) return cmd_probe(a, output);
    if (demo->parsed()) return cmd_demo(a, output);
    return usage_failure("no command given");
  } catch (const UsageError& e) {
    return usage_failure(e.what());
  } catch (const FaultError& e) {
    return output.fail(e.fault(), err);
  } catch (const dbs::IngestError& e) {
    return output.fail(Fault{FaultCode::bad_request, e.what(), std::nullopt}, err);
  } catch (const std::exception& e) {
    return output.fail(Fault{FaultCode::backend_failure, e.what(), std::nullopt}, err);
  }
}

}  // namespace gridwh::cli
