#pragma once

#include <cctype>
#include <string>

#include "semflow/pattern/ast.hpp"

namespace semflow::pattern {

inline std::string format_duration(std::int64_t seconds) {
  if (seconds % 86400 == 0) return std::to_string(seconds / 86400) + " days";
  if (seconds % 3600 == 0) return std::to_string(seconds / 3600) + " h";
  if (seconds % 60 == 0) return std::to_string(seconds / 60) + " min";
  return std::to_string(seconds) + " s";
}

namespace detail {

inline bool bare_literal(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void format_into(const PatternExpr& e, std::string& out) {
  auto list = [&](const char* kw) {
    out += kw;
    out += '(';
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ", ";
      format_into(e.children[i], out);
    }
  };
  switch (e.kind) {
    case Kind::Atom:
      out += e.event_type;
      if (e.guard) {
        out += '{';
        for (std::size_t i = 0; i < e.guard->clauses.size(); ++i) {
          const auto& c = e.guard->clauses[i];
          if (i) out += ", ";
          out += c.key;
          out += c.op == GuardOp::Eq ? " = " : c.op == GuardOp::Ne ? " != " : " contains ";
          out += bare_literal(c.literal) ? c.literal : quote(c.literal);
        }
        out += '}';
      }
      return;
    case Kind::Seq: list("SEQ"); break;
    case Kind::And: list("AND"); break;
    case Kind::Or: list("OR"); break;
    case Kind::Not: list("NOT"); break;
    case Kind::OneOrMore: list("ONE_OR_MORE"); break;
    case Kind::Optional: list("OPTIONAL"); break;
    case Kind::Times:
      list("TIMES");
      out += ", " + std::to_string(e.count);
      break;
    case Kind::Within:
      list("WITHIN");
      out += ", " + format_duration(e.delta_t);
      break;
  }
  out += ')';
}

}  // namespace detail

/// Canonical text form; `parse_pattern(format_pattern(e)) == e`.
inline std::string format_pattern(const PatternExpr& e) {
  std::string out;
  detail::format_into(e, out);
  return out;
}

}  // namespace semflow::pattern
