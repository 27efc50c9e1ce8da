#include "gridwh/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridwh/fault.hpp"

namespace gridwh::dbs {
namespace {

struct Cell {
  std::string text;
  bool quoted = false;
};

struct Record {
  std::size_t line = 0;  // physical line where the record starts
  std::vector<Cell> cells;
};

std::vector<Record> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(0, "", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();

  std::vector<Record> records;
  Record rec;
  Cell cell;
  std::size_t line = 1;
  bool in_quotes = false;
  bool record_has_content = false;
  rec.line = 1;

  auto end_record = [&] {
    if (record_has_content || !rec.cells.empty()) {
      rec.cells.push_back(std::move(cell));
      records.push_back(std::move(rec));
    }
    rec = Record{};
    cell = Cell{};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          cell.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.text += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!cell.text.empty() || cell.quoted) {
          throw IngestError(line, "", "unexpected quote inside unquoted field");
        }
        cell.quoted = true;
        in_quotes = true;
        record_has_content = true;
        break;
      case ',':
        rec.cells.push_back(std::move(cell));
        cell = Cell{};
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < data.size() && data[i + 1] == '\n') break;
        cell.text += c;
        record_has_content = true;
        break;
      case '\n':
        end_record();
        ++line;
        rec.line = line;
        break;
      default:
        cell.text += c;
        record_has_content = true;
    }
  }
  if (in_quotes) throw IngestError(line, "", "unterminated quoted field");
  end_record();
  return records;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "true" || lower == "1") return true;
  if (lower == "false" || lower == "0") return false;
  return std::nullopt;
}

std::optional<Value> coerce(const Cell& cell, ColumnType type) {
  if (cell.text.empty()) {
    if (cell.quoted && type == ColumnType::string) return Value(std::string());
    return Value();
  }
  switch (type) {
    case ColumnType::string: return Value(cell.text);
    case ColumnType::integer:
      if (auto v = parse_int(cell.text)) return Value(*v);
      return std::nullopt;
    case ColumnType::real:
      if (auto v = parse_real(cell.text)) return Value(*v);
      return std::nullopt;
    case ColumnType::boolean:
      if (auto v = parse_bool(cell.text)) return Value(*v);
      return std::nullopt;
  }
  return std::nullopt;
}

// Three-way comparison of two non-null values of compatible kinds.
int compare_values(const Value& a, const Value& b) {
  if (a.is_text()) {
    int c = a.as_text().compare(b.as_text());  // bytewise
    return (c > 0) - (c < 0);
  }
  if (a.is_bool()) return static_cast<int>(a.as_bool()) - static_cast<int>(b.as_bool());
  if (a.is_int() && b.is_int()) {
    auto x = a.as_int(), y = b.as_int();
    return (x > y) - (x < y);
  }
  long double x = a.is_int() ? static_cast<long double>(a.as_int()) : a.as_real();
  long double y = b.is_int() ? static_cast<long double>(b.as_int()) : b.as_real();
  return (x > y) - (x < y);
}

bool comparable(ColumnType column, const Value& literal) {
  switch (column) {
    case ColumnType::string: return literal.is_text();
    case ColumnType::integer:
    case ColumnType::real: return literal.is_int() || literal.is_real();
    case ColumnType::boolean: return literal.is_bool();
  }
  return false;
}

bool holds(int cmp, CompareOp op) {
  switch (op) {
    case CompareOp::eq: return cmp == 0;
    case CompareOp::ne: return cmp != 0;
    case CompareOp::lt: return cmp < 0;
    case CompareOp::le: return cmp <= 0;
    case CompareOp::gt: return cmp > 0;
    case CompareOp::ge: return cmp >= 0;
  }
  return false;
}

[[noreturn]] void unknown_column(const Table& t, const std::string& column) {
  throw FaultError(FaultCode::bad_request, "no column '" + column + "' in " + t.name,
                   Value::Map{{"dataset", t.name}, {"column", column}});
}

}  // namespace

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::string: return "string";
    case ColumnType::integer: return "int";
    case ColumnType::real: return "float";
    case ColumnType::boolean: return "bool";
  }
  return "string";
}

ColumnType column_type_from_string(std::string_view s) {
  if (s == "string") return ColumnType::string;
  if (s == "int") return ColumnType::integer;
  if (s == "float") return ColumnType::real;
  if (s == "bool") return ColumnType::boolean;
  throw FaultError(FaultCode::bad_request, "unknown column type '" + std::string(s) + "'");
}

std::optional<std::size_t> Table::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

Value to_value(const ResultSet& rs) {
  Value::List cols;
  for (const auto& c : rs.columns) {
    cols.emplace_back(Value::Map{{"name", c.name}, {"type", std::string(to_string(c.type))}});
  }
  Value::List rows;
  rows.reserve(rs.rows.size());
  for (const auto& r : rs.rows) rows.emplace_back(Value::List(r.begin(), r.end()));
  return Value::Map{{"columns", std::move(cols)}, {"rows", std::move(rows)}, {"rowCount", rs.rowCount}};
}

ResultSet result_set_from_value(const Value& v) {
  ResultSet rs;
  auto get = [&](std::string_view key) -> const Value& {
    const Value* f = v.find(key);
    if (!f) throw FaultError(FaultCode::bad_request, "result set missing '" + std::string(key) + "'");
    return *f;
  };
  for (const auto& c : get("columns").as_list()) {
    rs.columns.push_back(Column{c.find("name") ? c.find("name")->as_text() : "",
                                column_type_from_string(c.find("type") ? c.find("type")->as_text() : "")});
  }
  for (const auto& r : get("rows").as_list()) {
    const auto& cells = r.as_list();
    if (cells.size() != rs.columns.size()) throw FaultError(FaultCode::bad_request, "result row arity mismatch");
    rs.rows.emplace_back(cells.begin(), cells.end());
  }
  rs.rowCount = get("rowCount").as_int();
  if (rs.rowCount != static_cast<std::int64_t>(rs.rows.size())) {
    throw FaultError(FaultCode::bad_request, "rowCount does not match rows");
  }
  return rs;
}

IngestError::IngestError(std::size_t line, std::string column, const std::string& message)
    : std::runtime_error(line ? "line " + std::to_string(line) + (column.empty() ? "" : ", column '" + column + "'") +
                                    ": " + message
                              : message),
      line_(line),
      column_(std::move(column)) {}

Table load_table(const std::filesystem::path& csv, std::vector<Column> schema, std::string name) {
  if (schema.empty()) throw IngestError(0, "", "schema must be nonempty");
  auto records = read_csv(csv);
  if (records.empty()) throw IngestError(1, "", "missing header row");

  const auto& header = records.front();
  if (header.cells.size() != schema.size()) {
    throw IngestError(header.line, "", "header has " + std::to_string(header.cells.size()) + " columns, schema has " +
                                           std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (header.cells[i].text != schema[i].name) {
      throw IngestError(header.line, schema[i].name, "header names '" + header.cells[i].text + "'");
    }
  }

  Table table{std::move(name), std::move(schema), {}};
  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.cells.size() != table.columns.size()) {
      throw IngestError(rec.line, "", "expected " + std::to_string(table.columns.size()) + " fields, found " +
                                          std::to_string(rec.cells.size()));
    }
    Row row;
    row.reserve(rec.cells.size());
    for (std::size_t c = 0; c < rec.cells.size(); ++c) {
      const auto& col = table.columns[c];
      auto v = coerce(rec.cells[c], col.type);
      if (!v) {
        throw IngestError(rec.line, col.name,
                          "cannot parse '" + rec.cells[c].text + "' as " + std::string(to_string(col.type)));
      }
      row.push_back(std::move(*v));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<Column> infer_schema(const std::filesystem::path& csv) {
  auto records = read_csv(csv);
  if (records.empty()) throw IngestError(1, "", "missing header row");
  std::vector<Column> schema;
  const auto& header = records.front();
  for (std::size_t c = 0; c < header.cells.size(); ++c) {
    bool any = false, ints = true, reals = true, bools = true;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (c >= records[r].cells.size()) continue;
      const auto& text = records[r].cells[c].text;
      if (text.empty()) continue;
      any = true;
      ints = ints && parse_int(text).has_value();
      reals = reals && parse_real(text).has_value();
      bools = bools && parse_bool(text).has_value();
    }
    ColumnType t = ColumnType::string;
    if (any && ints) t = ColumnType::integer;
    else if (any && reals) t = ColumnType::real;
    else if (any && bools) t = ColumnType::boolean;
    schema.push_back(Column{header.cells[c].text, t});
  }
  return schema;
}

ResultSet execute_canonical(const CanonicalQuery& q, const TableStore& store) {
  auto it = store.find(q.dataset);
  if (it == store.end()) {
    throw FaultError(FaultCode::unknown_dataset, "no dataset '" + q.dataset + "'",
                     Value::Map{{"dataset", q.dataset}});
  }
  const Table& table = it->second;

  struct BoundPredicate {
    std::size_t column;
    CompareOp op;
    const Value* literal;
  };
  std::vector<BoundPredicate> preds;
  for (const auto& p : q.predicates) {
    auto idx = table.column_index(p.column);
    if (!idx) unknown_column(table, p.column);
    const auto& col = table.columns[*idx];
    if (!p.literal.is_null() && !comparable(col.type, p.literal)) {
      throw FaultError(FaultCode::bad_request,
                       "cannot compare " + std::string(to_string(col.type)) + " column '" + col.name + "' with " +
                           std::string(kind_name(p.literal.kind())),
                       Value::Map{{"column", col.name}});
    }
    preds.push_back({*idx, p.op, &p.literal});
  }
  std::optional<std::size_t> order_col;
  if (q.orderBy) {
    order_col = table.column_index(q.orderBy->column);
    if (!order_col) unknown_column(table, q.orderBy->column);
  }
  std::vector<std::size_t> projected;
  if (q.projection) {
    for (const auto& name : *q.projection) {
      auto idx = table.column_index(name);
      if (!idx) unknown_column(table, name);
      projected.push_back(*idx);
    }
  } else {
    for (std::size_t i = 0; i < table.columns.size(); ++i) projected.push_back(i);
  }

  std::vector<const Row*> selected;
  for (const auto& row : table.rows) {
    bool keep = std::all_of(preds.begin(), preds.end(), [&](const BoundPredicate& p) {
      const Value& cell = row[p.column];
      if (cell.is_null() || p.literal->is_null()) return false;
      return holds(compare_values(cell, *p.literal), p.op);
    });
    if (keep) selected.push_back(&row);
  }

  if (order_col) {
    auto col = *order_col;
    // nulls first; descending reverses the comparison so ties keep ingestion order
    auto less = [col](const Row* a, const Row* b) {
      const Value& x = (*a)[col];
      const Value& y = (*b)[col];
      if (x.is_null() || y.is_null()) return x.is_null() && !y.is_null();
      return compare_values(x, y) < 0;
    };
    if (q.orderBy->ascending) {
      std::stable_sort(selected.begin(), selected.end(), less);
    } else {
      std::stable_sort(selected.begin(), selected.end(), [&](const Row* a, const Row* b) { return less(b, a); });
    }
  }

  if (q.limit && static_cast<std::uint64_t>(*q.limit) < selected.size()) {
    selected.resize(static_cast<std::size_t>(*q.limit));
  }

  ResultSet rs;
  for (auto idx : projected) rs.columns.push_back(table.columns[idx]);
  rs.rows.reserve(selected.size());
  for (const Row* row : selected) {
    Row out;
    out.reserve(projected.size());
    for (auto idx : projected) out.push_back((*row)[idx]);
    rs.rows.push_back(std::move(out));
  }
  rs.rowCount = static_cast<std::int64_t>(rs.rows.size());
  return rs;
}

}  // namespace gridwh::dbs
