#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridwh/sql.hpp"
#include "gridwh/value.hpp"

namespace gridwh::dbs {

enum class ColumnType { string, integer, real, boolean };

std::string_view to_string(ColumnType t);
/// Accepts "string", "int", "float", "bool". Throws FaultError{bad-request}.
ColumnType column_type_from_string(std::string_view s);

struct Column {
  std::string name;
  ColumnType type = ColumnType::string;

  friend bool operator==(const Column&, const Column&) = default;
};

using Row = std::vector<Value>;

/// In-memory relation. Cells hold text/integer/real/boolean matching the
/// column type, or null.
struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<Row> rows;

  std::optional<std::size_t> column_index(std::string_view column) const;
};

/// Read-only warehouse contents, keyed by table name.
using TableStore = std::map<std::string, Table, std::less<>>;

struct ResultSet {
  std::vector<Column> columns;
  std::vector<Row> rows;
  std::int64_t rowCount = 0;

  friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

Value to_value(const ResultSet& rs);
ResultSet result_set_from_value(const Value& v);

/// CSV ingestion failure; `line` is 1-based, header is line 1.
class IngestError : public std::runtime_error {
public:
  IngestError(std::size_t line, std::string column, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::string column_;
};

/// Loads an RFC 4180 style CSV whose header row must list the schema's
/// column names in order. Unquoted empty cells become null; a quoted empty
/// cell in a string column is the empty string.
Table load_table(const std::filesystem::path& csv, std::vector<Column> schema, std::string name);

/// Guesses a schema from the header and cell contents: int, then float,
/// then bool, falling back to string.
std::vector<Column> infer_schema(const std::filesystem::path& csv);

/// WHERE → stable ORDER BY → LIMIT → projection. Any comparison involving
/// null is false. Strings compare bytewise; nulls sort first ascending.
///
/// Throws FaultError: unknown-dataset, or bad-request for an unknown column
/// or a literal whose type cannot be compared with the column.
ResultSet execute_canonical(const CanonicalQuery& q, const TableStore& store);

}  // namespace gridwh::dbs
