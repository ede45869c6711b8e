#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dga/dataset.hpp"
#include "dga/image_io.hpp"

namespace dga {

// What the guidance raster encodes.
enum class GuidanceKind {
  depth,    // 16-bit raw range in millimetres, normalized with the recorded planes
  thermal,  // 8-bit heat map of the same face
};

std::string_view to_string(GuidanceKind k);
GuidanceKind parse_guidance_kind(std::string_view text);

struct VariationShare {
  Variation variation;
  double weight;
};

// `variation:weight` pairs separated by commas, e.g. "neutral:3,pose:2".
std::vector<VariationShare> parse_variation_mix(std::string_view text);
std::string format_variation_mix(const std::vector<VariationShare>& mix);

struct SynthConfig {
  std::size_t ids = 10;
  std::size_t per_id = 20;
  std::size_t extent = 64;
  std::uint64_t seed = 0;
  GuidanceKind guidance = GuidanceKind::depth;
  std::vector<VariationShare> mix{{Variation::neutral, 3},   {Variation::pose, 2},
                                  {Variation::expression, 1}, {Variation::occlusion, 1},
                                  {Variation::illumination, 1}, {Variation::time, 1}};

  void validate() const;
};

// Clipping planes of the synthetic range sensor.
inline constexpr DepthPlanes kSynthDepthPlanes{500.0, 750.0};

// Variation of each of an identity's per_id samples. Counts follow the mix
// weights by largest remainder; at least one neutral sample is kept whenever
// neutral has positive weight. Neutral samples come first.
std::vector<Variation> variation_schedule(const SynthConfig& cfg);

struct SynthSample {
  Image rgb;                   // 8-bit P6
  Image guidance;              // 16-bit raw depth or 8-bit thermal
  std::vector<std::uint8_t> face_mask;  // 1 inside the head outline
  std::size_t identity = 0;
  Variation variation = Variation::neutral;
};

// Renders sample `index` (0 <= index < per_id) of `identity`. Depends only on
// the config, identity and index.
SynthSample render_synthetic(const SynthConfig& cfg, std::size_t identity, std::size_t index);

struct SynthSummary {
  std::filesystem::path manifest;
  std::size_t samples = 0;
};

// Writes rgb/*.ppm, guidance/*.pgm and manifest.tsv under `out_dir`.
SynthSummary synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

// Relative file names used for a sample.
std::string synth_rgb_name(std::size_t identity, std::size_t index);
std::string synth_guidance_name(std::size_t identity, std::size_t index);

}  // namespace dga
