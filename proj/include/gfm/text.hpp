#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "gfm/types.hpp"

namespace gfm {

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Parses the whole of `value` as a number; ConfigError naming `key` otherwise.
template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "'");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view value, char sep = ',') {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto pos = value.find(sep, start);
    const auto piece = trim(value.substr(start, pos == std::string_view::npos ? value.size() - start : pos - start));
    out.push_back(parse_number<T>(key, piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_floating_point_v<T>) out += format_double(items[i]);
    else out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace gfm
