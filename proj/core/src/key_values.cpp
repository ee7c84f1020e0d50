#include "csanet/key_values.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csanet/error.hpp"

namespace csanet {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_unsigned(std::string_view text, const std::string& key) {
  text = trim(text);
  Int value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(text) + "'", key);
  }
  return value;
}

template <typename Int>
std::string join(const std::vector<Int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

template <typename Int>
std::vector<Int> parse_list(std::string_view text, const std::string& key) {
  std::vector<Int> out;
  text = trim(text);
  if (text.empty()) return out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_unsigned<Int>(text.substr(0, comma), key));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(line) + "'");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (kv.contains(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key", key);
    kv.entries_.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string KeyValues::to_string() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + "=" + value + "\n";
  return out;
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << to_string();
  if (!out) throw DataError("failed writing " + path.string());
}

void KeyValues::set(const std::string& key, std::string value) {
  for (auto& entry : entries_) {
    if (entry.first == key) {
      entry.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

const std::string* KeyValues::find(std::string_view key) const {
  for (const auto& entry : entries_) {
    if (entry.first == key) return &entry.second;
  }
  return nullptr;
}

std::string encode_value(bool v) { return v ? "true" : "false"; }
std::string encode_value(std::size_t v) { return std::to_string(v); }
std::string encode_value(std::uint32_t v) { return std::to_string(v); }
std::string encode_value(const std::string& v) { return v; }
std::string encode_value(const std::vector<std::size_t>& v) { return join(v); }
std::string encode_value(const std::vector<std::uint32_t>& v) { return join(v); }

std::string encode_value(double v) {
  // Shortest round-trip digits; fixed notation keeps learning rates readable.
  char buf[64];
  const double mag = std::abs(v);
  const bool fixed = mag >= 1e-4 && mag < 1e15;
  const auto [end, ec] = fixed ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                               : std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ConfigError("cannot format number");
  return std::string(buf, end);
}

void decode_value(std::string_view text, bool& out, const std::string& key) {
  text = trim(text);
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    throw ConfigError("expected true or false, got '" + std::string(text) + "'", key);
  }
}

void decode_value(std::string_view text, std::size_t& out, const std::string& key) {
  out = parse_unsigned<std::size_t>(text, key);
}

void decode_value(std::string_view text, std::uint32_t& out, const std::string& key) {
  out = parse_unsigned<std::uint32_t>(text, key);
}

void decode_value(std::string_view text, double& out, const std::string& key) {
  text = trim(text);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || std::isnan(value)) {
    throw ConfigError("expected a number, got '" + std::string(text) + "'", key);
  }
  out = value;
}

void decode_value(std::string_view text, std::string& out, const std::string&) { out = std::string(trim(text)); }

void decode_value(std::string_view text, std::vector<std::size_t>& out, const std::string& key) {
  out = parse_list<std::size_t>(text, key);
}

void decode_value(std::string_view text, std::vector<std::uint32_t>& out, const std::string& key) {
  out = parse_list<std::uint32_t>(text, key);
}

void reject_unknown_keys(const KeyValues& in, const std::set<std::string>& consumed) {
  for (const auto& [key, value] : in.entries()) {
    if (!consumed.count(key)) throw ConfigError("unknown configuration key", key);
  }
}

}  // namespace csanet
