#pragma once

#include <cctype>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "semflow/common/errors.hpp"
#include "semflow/common/text.hpp"
#include "semflow/pattern/ast.hpp"

namespace semflow::pattern {

namespace detail {

/// Recursive-descent parser over the pattern grammar. Keywords are
/// case-insensitive and recognized only when followed by '('.
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  PatternExpr parse() {
    auto e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && text::is_space(src_[pos_])) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended");
    if (src_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string ident() {
    skip_ws();
    const auto start = pos_;
    if (pos_ >= src_.size()) fail("expected an expression but input ended");
    const char c0 = src_[pos_];
    if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_')) fail("expected an identifier");
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
        ++pos_;
      else
        break;
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  std::int64_t integer(bool allow_negative) {
    skip_ws();
    const auto start = pos_;
    bool negative = false;
    if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
      negative = src_[pos_] == '-';
      ++pos_;
    }
    if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      pos_ = start;
      fail("expected an integer");
    }
    std::int64_t v = 0;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      const int d = src_[pos_] - '0';
      if (v > (std::numeric_limits<std::int64_t>::max() - d) / 10) {
        pos_ = start;
        fail("integer out of range");
      }
      v = v * 10 + d;
      ++pos_;
    }
    if (negative && !allow_negative) {
      pos_ = start;
      fail("expected a non-negative integer");
    }
    return negative ? -v : v;
  }

  std::int64_t duration() {
    skip_ws();
    const auto start = pos_;
    const auto amount = integer(/*allow_negative=*/true);
    skip_ws();
    const auto unit_pos = pos_;
    std::string unit;
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_])))
      unit.push_back(src_[pos_++]);
    unit = text::to_lower(unit);
    std::int64_t scale = 0;
    if (unit == "s" || unit == "sec" || unit == "secs")
      scale = 1;
    else if (unit == "min" || unit == "mins")
      scale = 60;
    else if (unit == "h")
      scale = 3600;
    else if (unit == "day" || unit == "days")
      scale = 86400;
    else {
      pos_ = unit_pos;
      fail(unit.empty() ? "expected a duration unit (s, min, h, days)"
                        : "unknown duration unit '" + unit + "'");
    }
    if (amount <= 0)
      throw DurationError("duration must be positive (got " + std::to_string(amount) + " " + unit +
                          " at offset " + std::to_string(start) + ")");
    if (amount > std::numeric_limits<std::int64_t>::max() / scale)
      throw DurationError("duration out of range at offset " + std::to_string(start));
    return amount * scale;
  }

  std::string literal() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '"') {
      ++pos_;
      std::string out;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\\') {
          ++pos_;
          if (pos_ >= src_.size()) break;
        }
        out.push_back(src_[pos_++]);
      }
      if (pos_ >= src_.size()) fail("unterminated string literal");
      ++pos_;
      return out;
    }
    const auto start = pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')
        ++pos_;
      else
        break;
    }
    if (pos_ == start) fail("expected a literal");
    return std::string(src_.substr(start, pos_ - start));
  }

  GuardOp guard_op() {
    skip_ws();
    auto rest = src_.substr(pos_);
    if (rest.starts_with("!=")) {
      pos_ += 2;
      return GuardOp::Ne;
    }
    if (rest.starts_with("\xE2\x89\xA0")) {  // U+2260
      pos_ += 3;
      return GuardOp::Ne;
    }
    if (rest.starts_with("==")) {
      pos_ += 2;
      return GuardOp::Eq;
    }
    if (rest.starts_with("=")) {
      pos_ += 1;
      return GuardOp::Eq;
    }
    if (text::to_lower(rest.substr(0, 8)) == "contains") {
      pos_ += 8;
      return GuardOp::Contains;
    }
    fail("expected a guard operator (=, !=, contains)");
  }

  GuardPredicate guard() {
    expect('{');
    GuardPredicate g;
    do {
      GuardClause c;
      c.key = ident();
      c.op = guard_op();
      c.literal = literal();
      g.clauses.push_back(std::move(c));
    } while (peek(',') && (++pos_, true));
    expect('}');
    return g;
  }

  PatternExpr expr() {
    skip_ws();
    const auto start = pos_;
    auto name = ident();
    if (!peek('(')) {
      PatternExpr a = atom(name);
      if (peek('{')) a.guard = guard();
      return a;
    }
    const auto kw = text::to_lower(name);
    expect('(');
    PatternExpr e;
    if (kw == "seq") {
      std::vector<PatternExpr> elems;
      elems.push_back(expr());
      while (peek(',')) {
        ++pos_;
        elems.push_back(expr());
      }
      e = seq(std::move(elems));
    } else if (kw == "and" || kw == "or") {
      auto l = expr();
      expect(',');
      auto r = expr();
      e = binary(kw == "and" ? Kind::And : Kind::Or, std::move(l), std::move(r));
    } else if (kw == "not") {
      e = not_(expr());
    } else if (kw == "one_or_more") {
      e = one_or_more(expr());
    } else if (kw == "optional") {
      e = optional(expr());
    } else if (kw == "times") {
      auto c = expr();
      expect(',');
      skip_ws();
      const auto at = pos_;
      const auto n = integer(/*allow_negative=*/true);
      if (n < 1 || n > std::numeric_limits<int>::max()) {
        pos_ = at;
        fail("TIMES count must be a positive integer");
      }
      e = times(std::move(c), static_cast<int>(n));
    } else if (kw == "within") {
      auto c = expr();
      expect(',');
      e = within(std::move(c), duration());
    } else {
      pos_ = start;
      fail("unknown operator '" + name + "'");
    }
    expect(')');
    return e;
  }
};

}  // namespace detail

/// Parses pattern text. Durations are normalized to seconds.
inline PatternExpr parse_pattern(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace semflow::pattern
