#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridwh/value.hpp"

namespace gridwh::dbs {

/// SQL dialects with a built-in backend.
///
///   ansi    trailing `LIMIT n`, identifiers quoted as "x"
///   tsql    `SELECT TOP n ...`, identifiers quoted as [x]
///   oracle  `SELECT * FROM (<inner>) WHERE ROWNUM <= n`, identifiers quoted as "x"
///
/// Identifiers are emitted bare when they are plain words and not reserved.
enum class Dialect { ansi, tsql, oracle };

std::string_view to_string(Dialect d);
/// Throws FaultError{dialect-unsupported} for an unknown id.
Dialect dialect_from_string(std::string_view id);

enum class CompareOp { eq, ne, lt, le, gt, ge };

std::string_view to_string(CompareOp op);

struct Predicate {
  std::string column;
  CompareOp op = CompareOp::eq;
  Value literal;  // scalar

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct OrderBy {
  std::string column;
  bool ascending = true;

  friend bool operator==(const OrderBy&, const OrderBy&) = default;
};

/// Dialect-neutral single-table SELECT.
struct CanonicalQuery {
  std::string dataset;
  std::optional<std::vector<std::string>> projection;  // nullopt selects every column
  std::vector<Predicate> predicates;                  // conjunctive
  std::optional<OrderBy> orderBy;
  std::optional<std::int64_t> limit;

  friend bool operator==(const CanonicalQuery&, const CanonicalQuery&) = default;
};

/// Throws FaultError{bad-request} on a structural violation.
void validate(const CanonicalQuery& q);

/// Parses the canonical grammar
///
///   SELECT (cols|*) FROM dataset [WHERE col op literal {AND col op literal}]
///     [ORDER BY col [ASC|DESC]] [LIMIT n]
///
/// Keywords are case-insensitive, identifiers case-sensitive. Errors are
/// FaultError{parse-error} with `offset`, `expected` and `found` detail.
CanonicalQuery parse_query(std::string_view text);

/// Renders q in the dialect. Deterministic.
std::string translate(const CanonicalQuery& q, Dialect dialect);

/// The backend-side parser: accepts only the given dialect's syntax and
/// recovers the canonical query from it.
CanonicalQuery parse_dialect(std::string_view text, Dialect dialect);

/// True when the word collides with a keyword of any built-in dialect.
bool is_reserved_word(std::string_view word);

}  // namespace gridwh::dbs
