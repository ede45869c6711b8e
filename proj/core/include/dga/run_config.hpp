#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dga/key_values.hpp"
#include "dga/model.hpp"
#include "dga/optim.hpp"
#include "dga/protocol.hpp"
#include "dga/synth.hpp"

namespace dga {

enum class Precision { f32, f64 };

// Every setting a command can read, as `key = value` text. The key set is
// fixed: unknown keys are rejected and every key has a documented default.
// Defaults describe the toy architecture.
class RunConfig {
 public:
  struct Key {
    std::string name;
    std::string default_value;
    std::string doc;
  };
  static const std::vector<Key>& keys();

  RunConfig();  // all defaults

  static RunConfig parse(std::string_view text, std::string_view source = "config");
  static RunConfig load(const std::filesystem::path& path);

  // Throws ConfigError for an unknown key.
  void set(const std::string& key, std::string value);
  const std::string& get(const std::string& key) const;
  const KeyValues& values() const noexcept { return values_; }

  // Effective config with one comment line per key.
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  // Builds every typed view once; throws ConfigError on the first bad value.
  void validate() const;

  ModelConfig model_config(std::size_t num_classes) const;
  InitSpec init_spec() const;
  TrainConfig train_config() const;
  Precision precision() const;
  SynthConfig synth_config() const;
  ProtocolScheme protocol() const;
  std::optional<DepthPlanes> depth_planes() const;
  std::vector<ModelVariant> ablation_variants() const;
  std::vector<std::uint64_t> ablation_seeds() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  KeyValues values_;
};

}  // namespace dga
