#pragma once

#include <memory>
#include <string_view>

#include "gridwh/sql.hpp"
#include "gridwh/table.hpp"

namespace gridwh::dbs {

/// Vendor seam: executes SQL written in the backend's own dialect.
///
/// An adapter for an external engine implements this interface; the
/// service only ever hands it text produced by translate() for dialect().
class Backend {
public:
  virtual ~Backend() = default;

  virtual Dialect dialect() const = 0;

  /// Throws FaultError: parse-error for foreign or malformed text,
  /// unknown-dataset, bad-request, backend-failure.
  virtual ResultSet execute(std::string_view sql) const = 0;
};

/// Built-in in-memory backend. It parses only its own dialect, recovers the
/// canonical query and runs it against the shared table store.
class DeskBackend final : public Backend {
public:
  DeskBackend(Dialect dialect, std::shared_ptr<const TableStore> store);

  Dialect dialect() const override { return dialect_; }
  ResultSet execute(std::string_view sql) const override;

private:
  Dialect dialect_;
  std::shared_ptr<const TableStore> store_;
};

}  // namespace gridwh::dbs
