#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dga {

// Ordered `key = value` pairs. The text form is line oriented; blank lines and
// lines starting with '#' are ignored, and whitespace around keys and values
// is trimmed. Later assignments to a key replace earlier ones.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view source = "config");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void set_default(const std::string& key, std::string value);
  bool has(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // ConfigError when missing

  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }
  std::string to_text() const;

  friend bool operator==(const KeyValues&, const KeyValues&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string join_sizes(const std::vector<std::size_t>& values);
// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace dga
