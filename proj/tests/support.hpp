#pragma once

// Shared helpers for the unit and acceptance suites: temp dirs, in-process
// sites, random generators and a naive reference evaluator for queries.

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gridwh/dbs_service.hpp"
#include "gridwh/registry.hpp"
#include "gridwh/rpc_server.hpp"
#include "gridwh/sql.hpp"
#include "gridwh/table.hpp"
#include "gridwh/value.hpp"
#include "gridwh/wire.hpp"

namespace testkit {

namespace fs = std::filesystem;
using namespace gridwh;

class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
  fs::path path_;
};

// Checked-in 100-row fixture.
fs::path events_csv();
std::vector<dbs::Column> events_schema();

// A port nothing listens on (bound, then released).
int dead_port();
wire::Endpoint dead_endpoint();

std::string slurp(const fs::path& p);
void write_file(const fs::path& p, const std::string& text);

// Registry served over loopback.
struct RegistryHost {
  explicit RegistryHost(const fs::path& store, std::string admin = "admin-secret");
  ~RegistryHost();
  std::unique_ptr<registry::Registry> registry;
  std::unique_ptr<wire::RpcServer> server;
  std::string admin;
  wire::Endpoint endpoint() const { return server->endpoint(); }
};

// A database service holding the events fixture.
dbs::ServiceConfig site_config(const std::string& key, dbs::Dialect dialect, std::int64_t delay_ms = 0);
std::unique_ptr<dbs::DbsService> start_site(const dbs::ServiceConfig& config);
std::unique_ptr<dbs::DbsService> start_site(const std::string& key, dbs::Dialect dialect,
                                            std::int64_t delay_ms = 0);

// Random generation ---------------------------------------------------------

std::string random_utf8(std::mt19937_64& rng, std::size_t max_len);
Value random_scalar(std::mt19937_64& rng);
Value random_value(std::mt19937_64& rng, int max_depth);
Value::Map random_map(std::mt19937_64& rng, int max_depth);
wire::MethodCall random_call(std::mt19937_64& rng);
Fault random_fault(std::mt19937_64& rng);

// Queries over the events fixture (id:int, run:int, e:float, tag:string, good:bool).
dbs::CanonicalQuery random_events_query(std::mt19937_64& rng);
// Arbitrary well-formed queries, including identifiers that need quoting.
dbs::CanonicalQuery random_query(std::mt19937_64& rng);

// Reference evaluator -------------------------------------------------------

// Straightforward filter / sort / cut / project over a loaded table.
dbs::ResultSet naive_execute(const dbs::CanonicalQuery& q, const dbs::Table& table);

}  // namespace testkit
