#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace cdlab {

// Shortest round-trip text for a double; stable across runs.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

}  // namespace cdlab
