#include "gridwh/sql.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "gridwh/fault.hpp"

namespace gridwh::dbs {
namespace {

constexpr std::array<std::string_view, 14> kReserved{
    "SELECT", "FROM", "WHERE", "AND",  "ORDER", "BY",    "ASC",
    "DESC",   "LIMIT", "TOP",  "ROWNUM", "TRUE", "FALSE", "NULL",
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

bool is_word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_bare_word(std::string_view s) {
  if (s.empty() || !is_word_start(s.front())) return false;
  return std::all_of(s.begin(), s.end(), is_word_char);
}

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { word, quoted_ident, string, number, symbol, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // word as written, unescaped identifier/string, number or symbol
  std::size_t offset = 0;
  bool real = false;  // number contains '.' or an exponent
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::end: return "end of input";
    case Tok::string: return "string literal";
    case Tok::quoted_ident: return "quoted identifier";
    default: return "'" + t.text + "'";
  }
}

[[noreturn]] void parse_fail(std::size_t offset, std::string expected, std::string found) {
  throw FaultError(FaultCode::parse_error,
                   "at offset " + std::to_string(offset) + ": expected " + expected + ", found " + found,
                   Value::Map{{"offset", static_cast<std::int64_t>(offset)},
                              {"expected", std::move(expected)},
                              {"found", std::move(found)}});
}

std::vector<Token> lex(std::string_view src, Dialect dialect) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto scan_quoted = [&](char close, std::size_t start) {
    std::string text;
    std::size_t j = start + 1;
    for (;;) {
      if (j >= src.size()) parse_fail(start, std::string("closing ") + close, "end of input");
      if (src[j] == close) {
        if (j + 1 < src.size() && src[j + 1] == close) {
          text += close;
          j += 2;
          continue;
        }
        ++j;
        break;
      }
      text += src[j++];
    }
    i = j;
    return text;
  };

  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.offset = i;
    if (is_word_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_word_char(src[j])) ++j;
      t.kind = Tok::word;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else if (c == '\'') {
      t.kind = Tok::string;
      t.text = scan_quoted('\'', i);
    } else if (c == '"' && dialect != Dialect::tsql) {
      t.kind = Tok::quoted_ident;
      t.text = scan_quoted('"', i);
      if (t.text.empty()) parse_fail(t.offset, "identifier", "empty quoted identifier");
    } else if (c == '[' && dialect == Dialect::tsql) {
      t.kind = Tok::quoted_ident;
      t.text = scan_quoted(']', i);
      if (t.text.empty()) parse_fail(t.offset, "identifier", "empty quoted identifier");
    } else if (is_digit(c) || (c == '-' && i + 1 < src.size() && is_digit(src[i + 1]))) {
      std::size_t j = i + (c == '-' ? 1 : 0);
      while (j < src.size() && is_digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        t.real = true;
        ++j;
        if (j >= src.size() || !is_digit(src[j])) parse_fail(j, "digit", "'" + std::string(1, src[std::min(j, src.size() - 1)]) + "'");
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        t.real = true;
        ++j;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
        if (j >= src.size() || !is_digit(src[j])) parse_fail(j, "exponent digits", j >= src.size() ? "end of input" : "'" + std::string(1, src[j]) + "'");
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      if (j < src.size() && is_word_char(src[j])) parse_fail(j, "end of number", "'" + std::string(1, src[j]) + "'");
      t.kind = Tok::number;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else {
      static constexpr std::array<std::string_view, 4> two{"<=", ">=", "!=", "<>"};
      t.kind = Tok::symbol;
      for (auto sym : two) {
        if (src.substr(i, sym.size()) == sym) {
          t.text = std::string(sym);
          break;
        }
      }
      if (t.text.empty()) {
        if (std::string_view("*,()=<>").find(c) == std::string_view::npos) {
          parse_fail(i, "token", "'" + std::string(1, c) + "'");
        }
        t.text = std::string(1, c);
      }
      i += t.text.size();
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.offset = src.size();
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
  Parser(std::string_view text, Dialect dialect) : dialect_(dialect), tokens_(lex(text, dialect)) {}

  CanonicalQuery parse() {
    CanonicalQuery q;
    if (dialect_ == Dialect::oracle && is_rownum_wrapper()) {
      expect_keyword("SELECT");
      expect_symbol("*");
      expect_keyword("FROM");
      expect_symbol("(");
      q = select_body(false);
      expect_symbol(")");
      expect_keyword("WHERE");
      expect_keyword("ROWNUM");
      expect_symbol("<=");
      q.limit = count("row limit");
    } else {
      q = select_body(dialect_ == Dialect::ansi);
    }
    if (peek().kind != Tok::end) parse_fail(peek().offset, "end of input", describe(peek()));
    return q;
  }

private:
  const Token& peek(std::size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }

  bool at_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Tok::word && iequals(t.text, kw);
  }
  bool at_symbol(std::string_view sym, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Tok::symbol && t.text == sym;
  }

  void expect_keyword(std::string_view kw) {
    if (!at_keyword(kw)) parse_fail(peek().offset, std::string(kw), describe(peek()));
    next();
  }
  void expect_symbol(std::string_view sym) {
    if (!at_symbol(sym)) parse_fail(peek().offset, "'" + std::string(sym) + "'", describe(peek()));
    next();
  }

  // SELECT * FROM ( ...
  bool is_rownum_wrapper() const {
    return at_keyword("SELECT") && at_symbol("*", 1) && at_keyword("FROM", 2) && at_symbol("(", 3);
  }

  std::string identifier(const char* what) {
    const Token& t = peek();
    if (t.kind == Tok::quoted_ident) return next().text;
    if (t.kind == Tok::word && !is_reserved_word(t.text)) return next().text;
    parse_fail(t.offset, what, describe(t));
  }

  std::int64_t count(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::number || t.real || t.text.starts_with('-')) parse_fail(t.offset, what, describe(t));
    std::int64_t n = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), n);
    if (ec != std::errc{}) parse_fail(t.offset, what, "out-of-range number " + t.text);
    next();
    return n;
  }

  Value literal() {
    const Token& t = peek();
    if (t.kind == Tok::string) return Value(next().text);
    if (t.kind == Tok::number) {
      const char* b = t.text.data();
      const char* e = b + t.text.size();
      if (t.real) {
        double d = 0;
        auto [p, ec] = std::from_chars(b, e, d);
        if (ec != std::errc{} || p != e || !std::isfinite(d)) parse_fail(t.offset, "number", "out-of-range number " + t.text);
        next();
        return Value(d);
      }
      std::int64_t n = 0;
      auto [p, ec] = std::from_chars(b, e, n);
      if (ec != std::errc{} || p != e) parse_fail(t.offset, "number", "out-of-range number " + t.text);
      next();
      return Value(n);
    }
    if (at_keyword("TRUE")) { next(); return Value(true); }
    if (at_keyword("FALSE")) { next(); return Value(false); }
    if (at_keyword("NULL")) { next(); return Value(); }
    parse_fail(t.offset, "literal", describe(t));
  }

  CompareOp compare_op() {
    const Token& t = peek();
    if (t.kind == Tok::symbol) {
      CompareOp op;
      if (t.text == "=") op = CompareOp::eq;
      else if (t.text == "!=" || t.text == "<>") op = CompareOp::ne;
      else if (t.text == "<") op = CompareOp::lt;
      else if (t.text == "<=") op = CompareOp::le;
      else if (t.text == ">") op = CompareOp::gt;
      else if (t.text == ">=") op = CompareOp::ge;
      else parse_fail(t.offset, "comparison operator", describe(t));
      next();
      return op;
    }
    parse_fail(t.offset, "comparison operator", describe(t));
  }

  // SELECT [TOP n] proj FROM dataset [WHERE ...] [ORDER BY ...] [LIMIT n]
  CanonicalQuery select_body(bool allow_limit) {
    CanonicalQuery q;
    expect_keyword("SELECT");
    std::optional<std::int64_t> top;
    if (dialect_ == Dialect::tsql && at_keyword("TOP")) {
      next();
      top = count("row count");
    }
    if (at_symbol("*")) {
      next();
    } else {
      std::vector<std::string> cols;
      std::set<std::string> seen;
      for (;;) {
        std::size_t at = peek().offset;
        auto col = identifier("column name or '*'");
        if (!seen.insert(col).second) parse_fail(at, "distinct column", "duplicate column '" + col + "'");
        cols.push_back(std::move(col));
        if (!at_symbol(",")) break;
        next();
      }
      q.projection = std::move(cols);
    }
    expect_keyword("FROM");
    q.dataset = identifier("dataset name");
    if (at_keyword("WHERE")) {
      next();
      for (;;) {
        Predicate p;
        p.column = identifier("column name");
        p.op = compare_op();
        p.literal = literal();
        q.predicates.push_back(std::move(p));
        if (!at_keyword("AND")) break;
        next();
      }
    }
    if (at_keyword("ORDER")) {
      next();
      expect_keyword("BY");
      OrderBy ob;
      ob.column = identifier("column name");
      if (at_keyword("ASC")) {
        next();
      } else if (at_keyword("DESC")) {
        next();
        ob.ascending = false;
      }
      q.orderBy = std::move(ob);
    }
    if (allow_limit && at_keyword("LIMIT")) {
      next();
      q.limit = count("row limit");
    }
    if (top) q.limit = top;
    return q;
  }

  Dialect dialect_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Rendering

std::string quote(std::string_view s, char open, char close) {
  std::string out(1, open);
  for (char c : s) {
    out += c;
    if (c == close) out += close;
  }
  out += close;
  return out;
}

std::string render_ident(std::string_view name, Dialect d) {
  if (is_bare_word(name) && !is_reserved_word(name)) return std::string(name);
  return d == Dialect::tsql ? quote(name, '[', ']') : quote(name, '"', '"');
}

std::string render_real(double d) {
  if (!std::isfinite(d)) throw FaultError(FaultCode::bad_request, "non-finite literal cannot be rendered");
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  std::string s(buf.data(), p);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string render_literal(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::null: return "NULL";
    case Value::Kind::boolean: return v.as_bool() ? "TRUE" : "FALSE";
    case Value::Kind::integer: return std::to_string(v.as_int());
    case Value::Kind::real: return render_real(v.as_real());
    case Value::Kind::text: return quote(v.as_text(), '\'', '\'');
    default: throw FaultError(FaultCode::bad_request, "predicate literal must be a scalar");
  }
}

}  // namespace

std::string_view to_string(Dialect d) {
  switch (d) {
    case Dialect::ansi: return "ansi";
    case Dialect::tsql: return "tsql";
    case Dialect::oracle: return "oracle";
  }
  return "ansi";
}

Dialect dialect_from_string(std::string_view id) {
  if (id == "ansi") return Dialect::ansi;
  if (id == "tsql") return Dialect::tsql;
  if (id == "oracle") return Dialect::oracle;
  throw FaultError(FaultCode::dialect_unsupported, "no built-in dialect '" + std::string(id) + "'",
                   Value::Map{{"dialect", std::string(id)}});
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "=";
}

bool is_reserved_word(std::string_view word) {
  return std::any_of(kReserved.begin(), kReserved.end(), [&](std::string_view kw) { return iequals(kw, word); });
}

void validate(const CanonicalQuery& q) {
  auto fail = [](std::string m) { throw FaultError(FaultCode::bad_request, std::move(m)); };
  if (q.dataset.empty()) fail("dataset must be nonempty");
  if (q.projection) {
    if (q.projection->empty()) fail("projection list must be nonempty");
    std::set<std::string_view> seen;
    for (const auto& c : *q.projection) {
      if (c.empty()) fail("column name must be nonempty");
      if (!seen.insert(c).second) fail("duplicate projected column '" + c + "'");
    }
  }
  for (const auto& p : q.predicates) {
    if (p.column.empty()) fail("column name must be nonempty");
    if (!p.literal.is_scalar()) fail("predicate literal must be a scalar");
  }
  if (q.orderBy && q.orderBy->column.empty()) fail("column name must be nonempty");
  if (q.limit && *q.limit < 0) fail("limit must be nonnegative");
}

CanonicalQuery parse_query(std::string_view text) { return Parser(text, Dialect::ansi).parse(); }

CanonicalQuery parse_dialect(std::string_view text, Dialect dialect) { return Parser(text, dialect).parse(); }

std::string translate(const CanonicalQuery& q, Dialect d) {
  validate(q);
  std::string sql = "SELECT ";
  if (d == Dialect::tsql && q.limit) sql += "TOP " + std::to_string(*q.limit) + " ";
  if (q.projection) {
    for (std::size_t i = 0; i < q.projection->size(); ++i) {
      if (i) sql += ", ";
      sql += render_ident((*q.projection)[i], d);
    }
  } else {
    sql += "*";
  }
  sql += " FROM " + render_ident(q.dataset, d);
  for (std::size_t i = 0; i < q.predicates.size(); ++i) {
    const auto& p = q.predicates[i];
    sql += i ? " AND " : " WHERE ";
    sql += render_ident(p.column, d);
    sql += ' ';
    sql += to_string(p.op);
    sql += ' ';
    sql += render_literal(p.literal);
  }
  if (q.orderBy) {
    sql += " ORDER BY " + render_ident(q.orderBy->column, d) + (q.orderBy->ascending ? " ASC" : " DESC");
  }
  if (q.limit) {
    if (d == Dialect::ansi) sql += " LIMIT " + std::to_string(*q.limit);
    if (d == Dialect::oracle) sql = "SELECT * FROM (" + sql + ") WHERE ROWNUM <= " + std::to_string(*q.limit);
  }
  return sql;
}

}  // namespace gridwh::dbs
