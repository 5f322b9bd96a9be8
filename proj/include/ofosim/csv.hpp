// Deterministic number formatting for CSV/JSON exports.
#pragma once

#include <charconv>
#include <string>

namespace ofosim::csv {

// Shortest round-trip representation; bit-stable across repeat runs.
inline std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline std::string num(int v) { return std::to_string(v); }

}  // namespace ofosim::csv
