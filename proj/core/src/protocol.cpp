#include "dga/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dga/errors.hpp"
#include "dga/key_values.hpp"
#include "dga/random.hpp"

namespace dga {

const ProbeSet* ProtocolSplit::find(std::string_view name) const {
  for (const auto& p : probes)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ProtocolSplit::probe_count() const {
  std::size_t n = 0;
  for (const auto& p : probes) n += p.indices.size();
  return n;
}

ProtocolScheme parse_protocol_scheme(std::string_view text) {
  ProtocolScheme s;
  if (text == "neutral-gallery") return s;
  if (text.substr(0, 6) == "ratio:") {
    const std::string rest(text.substr(6));
    const auto colon = rest.find(':');
    s.kind = ProtocolScheme::Kind::ratio;
    try {
      std::size_t used = 0;
      s.ratio = std::stod(rest.substr(0, colon), &used);
      if (used != (colon == std::string::npos ? rest.size() : colon)) throw std::invalid_argument("");
      if (colon != std::string::npos) s.seed = std::stoull(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad protocol '" + std::string(text) + "', expected ratio:<r>[:<seed>]");
    }
    if (!(s.ratio > 0.0 && s.ratio < 1.0)) throw ConfigError("protocol ratio must lie in (0, 1)");
    return s;
  }
  throw ConfigError("unknown protocol '" + std::string(text) +
                    "', expected neutral-gallery or ratio:<r>:<seed>");
}

std::string to_string(const ProtocolScheme& scheme) {
  if (scheme.kind == ProtocolScheme::Kind::neutral_gallery) return "neutral-gallery";
  return "ratio:" + format_double(scheme.ratio) + ":" + std::to_string(scheme.seed);
}

ProtocolSplit split_protocol(std::span<const ManifestEntry> entries, const ProtocolScheme& scheme) {
  if (entries.empty()) throw DataError("empty dataset");
  std::map<std::size_t, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < entries.size(); ++i) by_identity[entries[i].identity].push_back(i);

  ProtocolSplit split;
  std::vector<std::vector<std::size_t>> probe_by_variation(all_variations().size());
  auto add_probe = [&](std::size_t i) {
    probe_by_variation[static_cast<std::size_t>(entries[i].variation)].push_back(i);
  };

  for (const auto& [identity, indices] : by_identity) {
    std::size_t gallery_before = split.gallery.size();
    std::size_t probes = 0;
    if (scheme.kind == ProtocolScheme::Kind::neutral_gallery) {
      for (std::size_t i : indices) {
        if (entries[i].variation == Variation::neutral) {
          split.gallery.push_back(i);
        } else {
          add_probe(i);
          ++probes;
        }
      }
      if (split.gallery.size() == gallery_before) {
        throw DataError("identity " + std::to_string(identity) +
                        " has no neutral sample for the neutral-gallery protocol");
      }
    } else {
      if (indices.size() < 2) {
        throw DataError("identity " + std::to_string(identity) +
                        " needs at least 2 samples for a ratio split");
      }
      std::vector<std::size_t> order = indices;
      Rng rng(derive_seed(scheme.seed, identity));
      rng.shuffle(order);
      const auto n = static_cast<double>(order.size());
      const auto g = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(scheme.ratio * n)),
                                             1, order.size() - 1);
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g));
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(g), order.end());
      split.gallery.insert(split.gallery.end(), order.begin(),
                           order.begin() + static_cast<std::ptrdiff_t>(g));
      for (std::size_t k = g; k < order.size(); ++k) add_probe(order[k]);
      probes = order.size() - g;
    }
    if (probes == 0) {
      throw DataError("identity " + std::to_string(identity) + " has no probe samples");
    }
  }

  for (std::size_t v = 0; v < probe_by_variation.size(); ++v) {
    if (probe_by_variation[v].empty()) continue;
    std::sort(probe_by_variation[v].begin(), probe_by_variation[v].end());
    split.probes.push_back({std::string(to_string(all_variations()[v])), probe_by_variation[v]});
  }
  std::sort(split.gallery.begin(), split.gallery.end());
  return split;
}

}  // namespace dga
