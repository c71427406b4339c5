#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "relstab/errors.hpp"

namespace relstab {

// "key=value" lines; blank lines and '#' comments ignored; whitespace around
// keys and values trimmed. Throws ConfigError on a line without '='.
std::vector<std::pair<std::string, std::string>> parse_key_values(
    std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Shortest decimal that round-trips (std::to_chars).
template <typename T>
std::string format_number(T value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T value{};
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ConfigError("invalid value '" + t + "' for " + std::string(key));
  return value;
}

template <typename T>
std::vector<T> parse_number_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  for (const std::string& item : split(text, ','))
    out.push_back(parse_number<T>(key, item));
  return out;
}

}  // namespace relstab
