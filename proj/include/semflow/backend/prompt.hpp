#pragma once

#include <string>
#include <string_view>

#include "semflow/common/text.hpp"

namespace semflow::prompt {

// Every prompt the library issues has the shape
//
//   TASK: <tag>
//   <instructions / header lines>
//   ---
//   <payload>
//
// The mock backend dispatches on the tag and applies keyword rules to the
// payload only, so instructions never trigger rules.

inline constexpr std::string_view kSeparator = "\n---\n";

struct Parsed {
  std::string tag;
  std::string header;
  std::string payload;
};

inline std::string make(std::string_view tag, std::string_view header, std::string_view payload) {
  std::string s = "TASK: ";
  s += tag;
  s += '\n';
  s += header;
  s += kSeparator;
  s += payload;
  return s;
}

inline Parsed parse(std::string_view p) {
  Parsed out;
  if (p.substr(0, 6) != "TASK: ") {
    out.payload = std::string(p);
    return out;
  }
  const auto nl = p.find('\n');
  out.tag = std::string(text::trim(p.substr(6, nl == std::string_view::npos ? p.size() : nl - 6)));
  if (nl == std::string_view::npos) return out;
  const auto rest = p.substr(nl + 1);
  const auto sep = rest.find(kSeparator);
  if (sep == std::string_view::npos) {
    out.header = std::string(rest);
    return out;
  }
  out.header = std::string(rest.substr(0, sep));
  out.payload = std::string(rest.substr(sep + kSeparator.size()));
  return out;
}

/// Value of the first header line starting with `key` + ":", trimmed.
inline std::string header_value(std::string_view header, std::string_view key) {
  for (const auto& line : text::split(header, '\n')) {
    std::string_view l = line;
    if (l.size() > key.size() && l.substr(0, key.size()) == key && l[key.size()] == ':')
      return std::string(text::trim(l.substr(key.size() + 1)));
  }
  return {};
}

}  // namespace semflow::prompt
