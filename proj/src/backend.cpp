#include "gridwh/backend.hpp"

#include "gridwh/fault.hpp"

namespace gridwh::dbs {

DeskBackend::DeskBackend(Dialect dialect, std::shared_ptr<const TableStore> store)
    : dialect_(dialect), store_(std::move(store)) {
  if (!store_) throw FaultError(FaultCode::backend_failure, "desk backend needs a table store");
}

ResultSet DeskBackend::execute(std::string_view sql) const {
  auto q = parse_dialect(sql, dialect_);
  return execute_canonical(q, *store_);
}

}  // namespace gridwh::dbs
