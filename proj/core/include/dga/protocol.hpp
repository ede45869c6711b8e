#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dga/dataset.hpp"

namespace dga {

struct ProbeSet {
  std::string name;  // variation name
  std::vector<std::size_t> indices;
};

// Gallery (training) and probe sample indices into a manifest.
struct ProtocolSplit {
  std::vector<std::size_t> gallery;
  std::vector<ProbeSet> probes;  // in variation order, non-empty sets only

  const ProbeSet* find(std::string_view name) const;
  std::size_t probe_count() const;
};

struct ProtocolScheme {
  enum class Kind { neutral_gallery, ratio };
  Kind kind = Kind::neutral_gallery;
  double ratio = 0.5;  // gallery share per identity
  std::uint64_t seed = 0;
};

// "neutral-gallery" or "ratio:<r>:<seed>".
ProtocolScheme parse_protocol_scheme(std::string_view text);
std::string to_string(const ProtocolScheme& scheme);

// neutral-gallery: every neutral sample goes to the gallery and each other
// variation forms its own probe set. ratio: per identity, a seeded shuffle
// puts round(r * n) samples (clamped to [1, n - 1]) in the gallery and the
// rest in probe sets by variation. Throws DataError when an identity has no
// neutral sample, or ends up without probes.
ProtocolSplit split_protocol(std::span<const ManifestEntry> entries, const ProtocolScheme& scheme);

}  // namespace dga
