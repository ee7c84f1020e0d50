#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csanet {

// Ordered flat `key=value` document. Lines starting with '#' and blank lines
// are ignored; keys and values are trimmed; nested keys are dotted.
class KeyValues {
 public:
  // Throws ConfigError on malformed lines or duplicate keys.
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

  // Replaces an existing value or appends a new key.
  void set(const std::string& key, std::string value);
  const std::string* find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }
  bool empty() const { return entries_.empty(); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---- value codecs ----------------------------------------------------------
// Doubles use the shortest representation that round-trips exactly; lists
// are comma separated.

std::string encode_value(bool v);
std::string encode_value(std::size_t v);
std::string encode_value(std::uint32_t v);
std::string encode_value(double v);
std::string encode_value(const std::string& v);
std::string encode_value(const std::vector<std::size_t>& v);
std::string encode_value(const std::vector<std::uint32_t>& v);

// Each throws ConfigError naming `key` when `text` does not parse.
void decode_value(std::string_view text, bool& out, const std::string& key);
void decode_value(std::string_view text, std::size_t& out, const std::string& key);
void decode_value(std::string_view text, std::uint32_t& out, const std::string& key);
void decode_value(std::string_view text, double& out, const std::string& key);
void decode_value(std::string_view text, std::string& out, const std::string& key);
void decode_value(std::string_view text, std::vector<std::size_t>& out, const std::string& key);
void decode_value(std::string_view text, std::vector<std::uint32_t>& out, const std::string& key);

// ---- field binding ---------------------------------------------------------
//
// Config structs describe themselves once through a visitor,
//
//   template <class V> void visit(V& v, Config& c) { v("epochs", c.epochs); }
//
// and FieldWriter / FieldReader turn that description into serialization.

class FieldWriter {
 public:
  FieldWriter(KeyValues& out, std::string prefix) : out_(out), prefix_(std::move(prefix)) {}

  template <typename Field>
  void operator()(const char* key, const Field& field) {
    out_.set(prefix_ + key, encode_value(field));
  }

  // Enumerations travel as their names.
  template <typename Enum, typename ToName, typename FromName>
  void enumeration(const char* key, const Enum& field, ToName to_name, FromName) {
    out_.set(prefix_ + key, to_name(field));
  }

  FieldWriter nested(const std::string& sub) const { return FieldWriter(out_, prefix_ + sub + "."); }

 private:
  KeyValues& out_;
  std::string prefix_;
};

// Reads the keys present in `in`, leaving absent fields at their current
// values. Consumed keys are recorded so callers can reject unknown ones.
class FieldReader {
 public:
  FieldReader(const KeyValues& in, std::set<std::string>& consumed, std::string prefix)
      : in_(in), consumed_(consumed), prefix_(std::move(prefix)) {}

  template <typename Field>
  void operator()(const char* key, Field& field) {
    const std::string full = prefix_ + key;
    if (const std::string* text = in_.find(full)) {
      decode_value(*text, field, full);
      consumed_.insert(full);
    }
  }

  template <typename Enum, typename ToName, typename FromName>
  void enumeration(const char* key, Enum& field, ToName, FromName from_name) {
    const std::string full = prefix_ + key;
    if (const std::string* text = in_.find(full)) {
      field = from_name(*text);
      consumed_.insert(full);
    }
  }

  FieldReader nested(const std::string& sub) const { return FieldReader(in_, consumed_, prefix_ + sub + "."); }

 private:
  const KeyValues& in_;
  std::set<std::string>& consumed_;
  std::string prefix_;
};

// Throws ConfigError for the first key of `in` missing from `consumed`.
void reject_unknown_keys(const KeyValues& in, const std::set<std::string>& consumed);

}  // namespace csanet
