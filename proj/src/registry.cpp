#include "gridwh/registry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "gridwh/json.hpp"

namespace gridwh::registry {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void bad_request(std::string message) {
  throw FaultError(FaultCode::bad_request, std::move(message));
}

const Value& field(const Value::Map& m, std::string_view key) {
  auto it = m.find(key);
  if (it == m.end()) bad_request("descriptor missing field '" + std::string(key) + "'");
  return it->second;
}

std::string text_field(const Value::Map& m, std::string_view key) { return field(m, key).as_text(); }

std::optional<std::string> optional_text(const Value::Map& m, std::string_view key) {
  auto it = m.find(key);
  if (it == m.end() || it->second.is_null()) return std::nullopt;
  return it->second.as_text();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FaultError(FaultCode::backend_failure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool is_valid_service_key(std::string_view key) {
  if (key.empty() || key.size() > 64) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

void validate(const ServiceDescriptor& d) {
  if (!is_valid_service_key(d.serviceKey)) {
    bad_request("serviceKey '" + d.serviceKey + "' must match [a-z0-9-]{1,64}");
  }
  wire::Endpoint::parse(d.endpoint);
  if (d.datasets.empty()) bad_request("descriptor must list at least one dataset");
  std::set<std::string_view> seen;
  for (const auto& ds : d.datasets) {
    if (ds.name.empty()) bad_request("dataset name must be nonempty");
    if (std::any_of(ds.name.begin(), ds.name.end(), [](unsigned char c) { return std::isspace(c); })) {
      bad_request("dataset name '" + ds.name + "' contains whitespace");
    }
    if (ds.approxRows && *ds.approxRows < 0) bad_request("approxRows must be nonnegative");
    if (!seen.insert(ds.name).second) bad_request("duplicate dataset '" + ds.name + "'");
  }
  if (d.dialect.empty()) bad_request("dialect must be nonempty");
}

Value to_value(const ServiceDescriptor& d) {
  Value::List datasets;
  for (const auto& ds : d.datasets) {
    Value::Map entry{{"name", ds.name}};
    if (ds.approxRows) entry.emplace("approxRows", *ds.approxRows);
    datasets.emplace_back(std::move(entry));
  }
  Value::List ops(d.operations.begin(), d.operations.end());
  return Value::Map{
      {"serviceKey", d.serviceKey},
      {"providerName", d.providerName},
      {"description", d.description},
      {"endpoint", d.endpoint},
      {"datasets", std::move(datasets)},
      {"dialect", d.dialect},
      {"operations", std::move(ops)},
      {"authRequired", d.authRequired},
      {"publishedAt", d.publishedAt},
  };
}

ServiceDescriptor descriptor_from_value(const Value& v) {
  const auto& m = v.as_map();
  ServiceDescriptor d;
  d.serviceKey = text_field(m, "serviceKey");
  d.providerName = optional_text(m, "providerName").value_or("");
  d.description = optional_text(m, "description").value_or("");
  d.endpoint = text_field(m, "endpoint");
  for (const auto& item : field(m, "datasets").as_list()) {
    const auto& e = item.as_map();
    DatasetEntry ds{text_field(e, "name"), std::nullopt};
    if (auto it = e.find("approxRows"); it != e.end() && !it->second.is_null()) ds.approxRows = it->second.as_int();
    d.datasets.push_back(std::move(ds));
  }
  d.dialect = text_field(m, "dialect");
  if (auto it = m.find("operations"); it != m.end() && !it->second.is_null()) {
    for (const auto& op : it->second.as_list()) d.operations.push_back(op.as_text());
  }
  if (auto it = m.find("authRequired"); it != m.end() && !it->second.is_null()) d.authRequired = it->second.as_bool();
  if (auto it = m.find("publishedAt"); it != m.end() && !it->second.is_null()) d.publishedAt = it->second.as_int();
  return d;
}

void validate(const FindQuery& q) {
  if (!q.datasetName && !q.serviceKey) bad_request("find query needs datasetName or serviceKey");
  if (q.datasetName) {
    const auto& name = *q.datasetName;
    auto star = name.find('*');
    if (star != std::string::npos && star != name.size() - 1) {
      bad_request("'*' is only allowed as the last character of datasetName");
    }
  }
}

bool matches(const ServiceDescriptor& d, const FindQuery& q) {
  if (q.serviceKey && d.serviceKey != *q.serviceKey) return false;
  if (q.datasetName) {
    std::string_view pattern = *q.datasetName;
    bool prefix = pattern.ends_with('*');
    if (prefix) pattern.remove_suffix(1);
    bool any = std::any_of(d.datasets.begin(), d.datasets.end(), [&](const DatasetEntry& ds) {
      return prefix ? std::string_view(ds.name).starts_with(pattern) : ds.name == pattern;
    });
    if (!any) return false;
  }
  return true;
}

Value to_value(const FindQuery& q) {
  Value::Map m;
  if (q.datasetName) m.emplace("datasetName", *q.datasetName);
  if (q.serviceKey) m.emplace("serviceKey", *q.serviceKey);
  return m;
}

FindQuery find_query_from_value(const Value& v) {
  const auto& m = v.as_map();
  return FindQuery{optional_text(m, "datasetName"), optional_text(m, "serviceKey")};
}

// ---------------------------------------------------------------------------

Registry::Registry(fs::path store, std::string admin_token, Clock clock)
    : store_(std::move(store)), admin_token_(std::move(admin_token)), clock_(std::move(clock)) {}

std::unique_ptr<Registry> Registry::open(fs::path store, std::string admin_token, Clock clock) {
  std::unique_ptr<Registry> reg(new Registry(std::move(store), std::move(admin_token), std::move(clock)));
  std::error_code ec;
  if (!fs::is_directory(reg->store_, ec)) {
    throw FaultError(FaultCode::backend_failure, "store directory not readable: " + reg->store_.string());
  }
  std::vector<fs::path> docs;
  for (fs::directory_iterator it(reg->store_, ec), end; !ec && it != end; it.increment(ec)) {
    const auto& p = it->path();
    if (!it->is_regular_file()) continue;
    if (p.extension() == ".tmp") {
      fs::remove(p, ec);  // interrupted write; the previous document (if any) is intact
      ec.clear();
      continue;
    }
    if (p.extension() == ".json") docs.push_back(p);
  }
  if (ec) throw FaultError(FaultCode::backend_failure, "cannot list " + reg->store_.string() + ": " + ec.message());
  std::sort(docs.begin(), docs.end());

  for (const auto& p : docs) {
    try {
      auto d = descriptor_from_value(from_json(parse_json_text(read_file(p))));
      validate(d);
      if (p.stem().string() != d.serviceKey) {
        bad_request("document name does not match serviceKey '" + d.serviceKey + "'");
      }
      reg->records_.insert_or_assign(d.serviceKey, std::move(d));
    } catch (const std::exception& e) {
      reg->warnings_.push_back("skipped " + p.filename().string() + ": " + e.what());
    }
  }
  return reg;
}

void Registry::check_token(std::string_view token) const {
  if (token != admin_token_) throw FaultError(FaultCode::access_denied, "invalid admin token");
}

void Registry::persist(const ServiceDescriptor& d) const {
  auto final_path = store_ / (d.serviceKey + ".json");
  auto tmp_path = store_ / (d.serviceKey + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << to_json(to_value(d)).dump(2) << '\n';
    out.flush();
    if (!out) throw FaultError(FaultCode::backend_failure, "cannot write " + tmp_path.string());
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) {
    fs::remove(tmp_path, ec);
    throw FaultError(FaultCode::backend_failure, "cannot commit " + final_path.string());
  }
}

std::string Registry::publish(ServiceDescriptor descriptor, std::string_view admin_token) {
  check_token(admin_token);
  validate(descriptor);
  std::unique_lock lock(mutex_);
  descriptor.publishedAt = epoch_seconds(clock_());
  persist(descriptor);
  auto key = descriptor.serviceKey;
  records_.insert_or_assign(key, std::move(descriptor));
  return key;
}

std::vector<ServiceDescriptor> Registry::find(const FindQuery& query) const {
  validate(query);
  std::shared_lock lock(mutex_);
  std::vector<ServiceDescriptor> out;
  for (const auto& [key, d] : records_) {
    if (matches(d, query)) out.push_back(d);
  }
  return out;  // std::map iteration is already key-ascending
}

void Registry::deregister(std::string_view service_key, std::string_view admin_token) {
  check_token(admin_token);
  std::unique_lock lock(mutex_);
  auto it = records_.find(std::string(service_key));
  if (it == records_.end()) {
    throw FaultError(FaultCode::unknown_service, "no service '" + std::string(service_key) + "'",
                     Value::Map{{"serviceKey", std::string(service_key)}});
  }
  std::error_code ec;
  fs::remove(store_ / (it->first + ".json"), ec);
  if (ec) throw FaultError(FaultCode::backend_failure, "cannot remove document for " + it->first);
  records_.erase(it);
}

Value::Map Registry::info() const {
  std::shared_lock lock(mutex_);
  return {{"uddiVersion", std::string(kUddiVersion)},
          {"serviceCount", static_cast<std::int64_t>(records_.size())}};
}

std::size_t Registry::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------

namespace {

std::string param_text(const wire::MethodCall& call, std::string_view key) {
  auto it = call.params.find(key);
  if (it == call.params.end()) bad_request("missing parameter '" + std::string(key) + "'");
  return it->second.as_text();
}

// Admin token from params, falling back to the envelope header.
std::string admin_token_of(const wire::MethodCall& call) {
  if (auto it = call.params.find("token"); it != call.params.end() && !it->second.is_null()) {
    return it->second.as_text();
  }
  return call.token.value_or("");
}

const Value& param(const wire::MethodCall& call, std::string_view key) {
  auto it = call.params.find(key);
  if (it == call.params.end()) bad_request("missing parameter '" + std::string(key) + "'");
  return it->second;
}

}  // namespace

wire::HandlerTable handlers(Registry& registry) {
  wire::HandlerTable table;
  table.emplace("publish", [&registry](const wire::MethodCall& call) -> wire::Reply {
    auto d = descriptor_from_value(param(call, "descriptor"));
    return Value(registry.publish(std::move(d), admin_token_of(call)));
  });
  table.emplace("find", [&registry](const wire::MethodCall& call) -> wire::Reply {
    auto q = find_query_from_value(param(call, "query"));
    Value::List out;
    for (const auto& d : registry.find(q)) out.push_back(to_value(d));
    return Value(std::move(out));
  });
  table.emplace("deregister", [&registry](const wire::MethodCall& call) -> wire::Reply {
    auto key = param_text(call, "serviceKey");
    registry.deregister(key, admin_token_of(call));
    return Value(Value::Map{{"serviceKey", key}, {"deregistered", true}});
  });
  table.emplace("info", [&registry](const wire::MethodCall&) -> wire::Reply { return Value(registry.info()); });
  return table;
}

}  // namespace gridwh::registry
