#include "support.hpp"

#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifndef GRIDWH_TEST_DATA_DIR
#error "GRIDWH_TEST_DATA_DIR must be defined"
#endif

namespace testkit {

TempDir::TempDir() {
  std::random_device rd;
  path_ = fs::temp_directory_path() / ("gridwh-test-" + std::to_string(rd()) + std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path events_csv() { return fs::path(GRIDWH_TEST_DATA_DIR) / "events.csv"; }

std::vector<dbs::Column> events_schema() {
  using T = dbs::ColumnType;
  return {{"id", T::integer}, {"run", T::integer}, {"e", T::real}, {"tag", T::string}, {"good", T::boolean}};
}

int dead_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw std::runtime_error("bind failed");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

wire::Endpoint dead_endpoint() { return wire::Endpoint::from_host_port("127.0.0.1", dead_port()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

RegistryHost::RegistryHost(const fs::path& store, std::string admin_token) : admin(std::move(admin_token)) {
  fs::create_directories(store);
  registry = registry::Registry::open(store, admin);
  server = std::make_unique<wire::RpcServer>(registry::handlers(*registry),
                                             wire::RpcServer::Options{"127.0.0.1", 0, "registry", {}});
  server->start();
}

RegistryHost::~RegistryHost() { server->stop(); }

dbs::ServiceConfig site_config(const std::string& key, dbs::Dialect dialect, std::int64_t delay_ms) {
  dbs::ServiceConfig cfg;
  cfg.serviceKey = key;
  cfg.dialect = dialect;
  cfg.injectedDelayMs = delay_ms;
  cfg.providerName = "test";
  cfg.tables.push_back(dbs::TableSpec{"events", events_schema(), events_csv()});
  return cfg;
}

std::unique_ptr<dbs::DbsService> start_site(const dbs::ServiceConfig& config) {
  auto svc = std::make_unique<dbs::DbsService>(config, dbs::load_tables(config));
  svc->start();
  return svc;
}

std::unique_ptr<dbs::DbsService> start_site(const std::string& key, dbs::Dialect dialect, std::int64_t delay_ms) {
  return start_site(site_config(key, dialect, delay_ms));
}

// ---------------------------------------------------------------------------

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

void append_utf8(std::string& s, char32_t cp) {
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

double random_double(std::mt19937_64& rng) {
  switch (pick(rng, 4)) {
    case 0: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 1: return static_cast<double>(std::uniform_int_distribution<int>(-1000, 1000)(rng));
    case 2: return std::ldexp(std::uniform_real_distribution<double>(0.5, 1.0)(rng),
                              std::uniform_int_distribution<int>(-1000, 1000)(rng)) *
                   (coin(rng) ? 1 : -1);
    default: {
      // any finite normal bit pattern
      for (;;) {
        std::uint64_t bits = rng();
        double d;
        std::memcpy(&d, &bits, sizeof d);
        if (std::isnormal(d)) return d;
      }
    }
  }
}

std::int64_t random_int(std::mt19937_64& rng) {
  switch (pick(rng, 3)) {
    case 0: return std::uniform_int_distribution<std::int64_t>(-100, 100)(rng);
    case 1: return std::numeric_limits<std::int64_t>::min() + static_cast<std::int64_t>(pick(rng, 3));
    default: return static_cast<std::int64_t>(rng());
  }
}

}  // namespace

std::string random_utf8(std::mt19937_64& rng, std::size_t max_len) {
  static constexpr std::string_view kAscii = "abcxyz_ AZ09'\"[]\\/\t\n{}:,-";
  std::size_t len = std::uniform_int_distribution<std::size_t>(0, max_len)(rng);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    switch (pick(rng, 4)) {
      case 0:
      case 1: s += kAscii[pick(rng, kAscii.size())]; break;
      case 2: append_utf8(s, static_cast<char32_t>(std::uniform_int_distribution<int>(0, 0x1F)(rng))); break;
      default: {
        char32_t cp;
        do {
          cp = std::uniform_int_distribution<char32_t>(0x80, 0x10FFFF)(rng);
        } while (cp >= 0xD800 && cp <= 0xDFFF);
        append_utf8(s, cp);
      }
    }
  }
  return s;
}

Value random_scalar(std::mt19937_64& rng) {
  switch (pick(rng, 5)) {
    case 0: return Value();
    case 1: return Value(coin(rng));
    case 2: return Value(random_int(rng));
    case 3: return Value(random_double(rng));
    default: return Value(random_utf8(rng, 12));
  }
}

Value::Map random_map(std::mt19937_64& rng, int max_depth) {
  Value::Map m;
  std::size_t n = pick(rng, 5);
  for (std::size_t i = 0; i < n; ++i) m.insert_or_assign(random_utf8(rng, 6), random_value(rng, max_depth - 1));
  return m;
}

Value random_value(std::mt19937_64& rng, int max_depth) {
  if (max_depth <= 1 || coin(rng, 0.45)) return random_scalar(rng);
  if (coin(rng)) {
    Value::List l;
    std::size_t n = pick(rng, 5);
    for (std::size_t i = 0; i < n; ++i) l.push_back(random_value(rng, max_depth - 1));
    return Value(std::move(l));
  }
  return Value(random_map(rng, max_depth));
}

wire::MethodCall random_call(std::mt19937_64& rng) {
  auto nonempty = [&] {
    auto s = random_utf8(rng, 10);
    return s.empty() ? std::string("x") : s;
  };
  wire::MethodCall c;
  c.id = nonempty();
  c.service = coin(rng, 0.2) ? std::string("registry") : nonempty();
  if (coin(rng)) c.session = random_utf8(rng, 20);
  if (coin(rng)) c.token = random_utf8(rng, 20);
  c.method = nonempty();
  c.params = random_map(rng, 8);  // the params map itself is one level
  return c;
}

Fault random_fault(std::mt19937_64& rng) {
  Fault f;
  f.code = static_cast<FaultCode>(pick(rng, 12));
  f.message = random_utf8(rng, 30);
  if (coin(rng)) f.detail = random_map(rng, 8);
  return f;
}

// ---------------------------------------------------------------------------

namespace {

dbs::CompareOp random_op(std::mt19937_64& rng) { return static_cast<dbs::CompareOp>(pick(rng, 6)); }

Value literal_for(std::mt19937_64& rng, const std::string& column) {
  if (coin(rng, 0.05)) return Value();
  if (column == "id") return Value(std::uniform_int_distribution<std::int64_t>(-5, 105)(rng));
  if (column == "run") return Value(std::uniform_int_distribution<std::int64_t>(999, 1007)(rng));
  if (column == "e") {
    // tenths land on fixture values, integers exercise int/float comparison
    if (coin(rng)) return Value(std::uniform_int_distribution<std::int64_t>(0, 100)(rng));
    return Value(static_cast<double>(std::uniform_int_distribution<int>(0, 1000)(rng)) / 10.0);
  }
  if (column == "tag") {
    static const std::vector<std::string> tags{"mu", "e", "tau", "jet", "", "m", "zz", "Mu"};
    return Value(tags[pick(rng, tags.size())]);
  }
  return Value(coin(rng));
}

}  // namespace

dbs::CanonicalQuery random_events_query(std::mt19937_64& rng) {
  static const std::vector<std::string> cols{"id", "run", "e", "tag", "good"};
  dbs::CanonicalQuery q;
  q.dataset = "events";
  if (coin(rng)) {
    std::vector<std::string> shuffled = cols;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(1 + pick(rng, cols.size()));
    q.projection = shuffled;
  }
  std::size_t npred = pick(rng, 4);
  for (std::size_t i = 0; i < npred; ++i) {
    const auto& col = cols[pick(rng, cols.size())];
    q.predicates.push_back({col, random_op(rng), literal_for(rng, col)});
  }
  if (coin(rng, 0.6)) q.orderBy = dbs::OrderBy{cols[pick(rng, cols.size())], coin(rng)};
  if (coin(rng, 0.6)) q.limit = std::uniform_int_distribution<std::int64_t>(0, 120)(rng);
  return q;
}

dbs::CanonicalQuery random_query(std::mt19937_64& rng) {
  static const std::vector<std::string> idents{
      "events", "t", "_x1", "Select", "order", "limit", "top", "rownum", "col name", "a\"b", "c]d",
      "[x]",    "ü", "from", "1abc",  "e",     "id",    "NULL", "x-y",   "'q'",      "(",   "tab\tc"};
  auto ident = [&] { return idents[pick(rng, idents.size())]; };
  dbs::CanonicalQuery q;
  q.dataset = ident();
  if (coin(rng)) {
    std::vector<std::string> cols;
    std::size_t n = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = ident();
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    q.projection = cols;
  }
  std::size_t npred = pick(rng, 4);
  for (std::size_t i = 0; i < npred; ++i) {
    Value lit;
    switch (pick(rng, 5)) {
      case 0: lit = Value(); break;
      case 1: lit = Value(coin(rng)); break;
      case 2: lit = Value(random_int(rng)); break;
      case 3: lit = Value(random_double(rng)); break;
      default: lit = Value(random_utf8(rng, 8)); break;
    }
    q.predicates.push_back({ident(), random_op(rng), lit});
  }
  if (coin(rng)) q.orderBy = dbs::OrderBy{ident(), coin(rng)};
  if (coin(rng)) q.limit = coin(rng) ? std::uniform_int_distribution<std::int64_t>(0, 50)(rng)
                                     : static_cast<std::int64_t>(rng() >> 1);
  return q;
}

// ---------------------------------------------------------------------------

namespace {

// Numeric view of a cell for ordering; fixture numbers are small enough that
// double is exact.
std::optional<double> numeric(const Value& v) {
  if (v.is_int()) return static_cast<double>(v.as_int());
  if (v.is_real()) return v.as_real();
  return std::nullopt;
}

// -1, 0, 1 for non-null operands of matching families.
int order(const Value& a, const Value& b) {
  if (auto x = numeric(a)) {
    double y = *numeric(b);
    return *x < y ? -1 : (*x > y ? 1 : 0);
  }
  if (a.is_bool()) return (a.as_bool() ? 1 : 0) - (b.as_bool() ? 1 : 0);
  const auto& s = a.as_text();
  const auto& t = b.as_text();
  std::size_t n = std::min(s.size(), t.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto x = static_cast<unsigned char>(s[i]);
    auto y = static_cast<unsigned char>(t[i]);
    if (x != y) return x < y ? -1 : 1;
  }
  return s.size() == t.size() ? 0 : (s.size() < t.size() ? -1 : 1);
}

bool satisfied(const Value& cell, dbs::CompareOp op, const Value& lit) {
  if (cell.is_null() || lit.is_null()) return false;
  int c = order(cell, lit);
  switch (op) {
    case dbs::CompareOp::eq: return c == 0;
    case dbs::CompareOp::ne: return c != 0;
    case dbs::CompareOp::lt: return c < 0;
    case dbs::CompareOp::le: return c <= 0;
    case dbs::CompareOp::gt: return c > 0;
    case dbs::CompareOp::ge: return c >= 0;
  }
  return false;
}

std::size_t index_of(const dbs::Table& t, const std::string& col) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i].name == col) return i;
  }
  throw std::runtime_error("naive_execute: no column " + col);
}

}  // namespace

dbs::ResultSet naive_execute(const dbs::CanonicalQuery& q, const dbs::Table& table) {
  // keep (ingestion index, row) pairs so ties can be broken explicitly
  std::vector<std::pair<std::size_t, const dbs::Row*>> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool ok = true;
    for (const auto& p : q.predicates) {
      if (!satisfied(table.rows[r][index_of(table, p.column)], p.op, p.literal)) ok = false;
    }
    if (ok) kept.emplace_back(r, &table.rows[r]);
  }

  if (q.orderBy) {
    std::size_t c = index_of(table, q.orderBy->column);
    bool asc = q.orderBy->ascending;
    std::sort(kept.begin(), kept.end(), [&](const auto& a, const auto& b) {
      const Value& x = (*a.second)[c];
      const Value& y = (*b.second)[c];
      // rank nulls below everything; descending flips the key, not the tie-break
      int cmp;
      if (x.is_null() && y.is_null()) cmp = 0;
      else if (x.is_null()) cmp = -1;
      else if (y.is_null()) cmp = 1;
      else cmp = order(x, y);
      if (!asc) cmp = -cmp;
      if (cmp != 0) return cmp < 0;
      return a.first < b.first;
    });
  }

  std::size_t n = kept.size();
  if (q.limit) n = std::min<std::size_t>(n, static_cast<std::size_t>(*q.limit));

  std::vector<std::size_t> cols;
  if (q.projection) {
    for (const auto& name : *q.projection) cols.push_back(index_of(table, name));
  } else {
    cols.resize(table.columns.size());
    std::iota(cols.begin(), cols.end(), 0);
  }

  dbs::ResultSet rs;
  for (auto c : cols) rs.columns.push_back(table.columns[c]);
  for (std::size_t i = 0; i < n; ++i) {
    dbs::Row row;
    for (auto c : cols) row.push_back((*kept[i].second)[c]);
    rs.rows.push_back(std::move(row));
  }
  rs.rowCount = static_cast<std::int64_t>(n);
  return rs;
}

}  // namespace testkit
