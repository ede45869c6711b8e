#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dga/image_io.hpp"
#include "dga/tensor.hpp"

namespace dga {

enum class Variation { neutral, pose, expression, occlusion, illumination, time };

std::string_view to_string(Variation v);
Variation parse_variation(std::string_view text);
const std::vector<Variation>& all_variations();

// Co-registered rasters in [0, 1]: rgb H x H x 3, guidance H x H x 1.
struct RGBDSample {
  Tensor<float> rgb;
  Tensor<float> guidance;
  std::size_t identity = 0;
  Variation variation = Variation::neutral;
};

// Near/far clipping planes in raw depth units.
struct DepthPlanes {
  double near = 0.0;
  double far = 1.0;
};

// Raw range value -> [0, 1]: outside [near, far] gives 0, inside maps
// linearly with near -> 0 and far -> 1. Throws ConfigError when near >= far.
double normalize_depth(double raw, const DepthPlanes& planes);
Tensor<float> normalize_depth(const Image& raw, const DepthPlanes& planes);

struct ManifestEntry {
  std::size_t identity = 0;  // contiguous 0-based after loading
  Variation variation = Variation::neutral;
  std::string rgb_path;       // relative to the manifest directory
  std::string guidance_path;  // relative to the manifest directory
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  // Planes from a `# depth_planes near=<n> far=<f>` header comment.
  std::optional<DepthPlanes> planes;
  // original_ids[i] is the identity index written in the file for label i.
  std::vector<std::size_t> original_ids;
  bool remapped = false;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<RGBDSample> samples;  // parallel to manifest.entries

  std::size_t num_classes() const { return manifest.original_ids.size(); }
};

// Tab separated `identity<TAB>variation<TAB>rgb_path<TAB>guidance_path`
// lines; '#' lines are comments. Non-contiguous identities are relabeled in
// ascending order. Guidance rasters are depth-normalized when clipping planes
// are known (the `planes` argument overrides the header) and otherwise
// scaled by their maxval.
Dataset load_manifest(const std::filesystem::path& path,
                      std::optional<DepthPlanes> planes = std::nullopt);
DatasetManifest parse_manifest(const std::filesystem::path& path);

std::string manifest_line(const ManifestEntry& e);

}  // namespace dga
