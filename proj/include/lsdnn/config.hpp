#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lsdnn {

// Flat key=value experiment configuration. Every key has a default; unknown
// keys are rejected. Keys under "artifact." and "software." are outputs that
// appear in manifests and are skipped when a manifest is loaded back.
class Config {
 public:
  Config();

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma list, may be empty
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  // Lines "key=value"; blank lines and '#' comments ignored.
  void load(const std::filesystem::path& path);
  void parse(const std::string& text, const std::string& origin = "<text>");

  // All keys in sorted order, one "key=value" per line.
  std::string to_text() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lsdnn
