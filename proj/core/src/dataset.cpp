#include "dga/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dga/parallel.hpp"

namespace dga {

std::string_view to_string(Variation v) {
  switch (v) {
    case Variation::neutral: return "neutral";
    case Variation::pose: return "pose";
    case Variation::expression: return "expression";
    case Variation::occlusion: return "occlusion";
    case Variation::illumination: return "illumination";
    case Variation::time: return "time";
  }
  return "unknown";
}

const std::vector<Variation>& all_variations() {
  static const std::vector<Variation> v{Variation::neutral,   Variation::pose,
                                        Variation::expression, Variation::occlusion,
                                        Variation::illumination, Variation::time};
  return v;
}

Variation parse_variation(std::string_view text) {
  for (Variation v : all_variations())
    if (to_string(v) == text) return v;
  throw DataError("unknown variation '" + std::string(text) + "'");
}

double normalize_depth(double raw, const DepthPlanes& planes) {
  if (!(planes.near < planes.far)) {
    throw ConfigError("depth planes require near < far, got near=" + std::to_string(planes.near) +
                      " far=" + std::to_string(planes.far));
  }
  if (raw < planes.near || raw > planes.far) return 0.0;
  return (raw - planes.near) / (planes.far - planes.near);
}

Tensor<float> normalize_depth(const Image& raw, const DepthPlanes& planes) {
  if (raw.channels != 1) throw DataError("depth raster must have one channel");
  normalize_depth(planes.near, planes);  // validates the planes
  Tensor<float> t(Shape{raw.height, raw.width, 1});
  for (std::size_t i = 0; i < raw.samples.size(); ++i)
    t[i] = static_cast<float>(normalize_depth(raw.samples[i], planes));
  return t;
}

std::string manifest_line(const ManifestEntry& e) {
  return std::to_string(e.identity) + '\t' + std::string(to_string(e.variation)) + '\t' +
         e.rgb_path + '\t' + e.guidance_path;
}

namespace {

std::optional<DepthPlanes> parse_planes_comment(std::string_view line) {
  // "# depth_planes near=<n> far=<f>"
  if (line.find("depth_planes") == std::string_view::npos) return std::nullopt;
  std::istringstream ss{std::string(line)};
  std::string tok;
  std::optional<double> near, far;
  while (ss >> tok) {
    if (tok.rfind("near=", 0) == 0) near = std::stod(tok.substr(5));
    if (tok.rfind("far=", 0) == 0) far = std::stod(tok.substr(4));
  }
  if (!near || !far) return std::nullopt;
  return DepthPlanes{*near, *far};
}

}  // namespace

DatasetManifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> raw_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto p = parse_planes_comment(line)) m.planes = p;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) fail("expected 4 tab-separated fields, got " +
                                 std::to_string(fields.size()));
    ManifestEntry e;
    const std::string& id = fields[0];
    auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), e.identity);
    if (ec != std::errc{} || ptr != id.data() + id.size()) fail("bad identity '" + id + "'");
    try {
      e.variation = parse_variation(fields[1]);
    } catch (const DataError& err) {
      fail(err.what());
    }
    if (fields[2].empty() || fields[3].empty()) fail("empty file path");
    e.rgb_path = fields[2];
    e.guidance_path = fields[3];
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("empty dataset: " + path.string() + " lists no samples");

  std::map<std::size_t, std::size_t> relabel;
  for (const auto& e : m.entries) relabel.emplace(e.identity, 0);
  std::size_t next = 0;
  for (auto& [orig, label] : relabel) {
    label = next++;
    m.original_ids.push_back(orig);
  }
  for (auto& e : m.entries) {
    const std::size_t label = relabel.at(e.identity);
    if (label != e.identity) m.remapped = true;
    e.identity = label;
  }
  return m;
}

Dataset load_manifest(const std::filesystem::path& path, std::optional<DepthPlanes> planes) {
  Dataset ds;
  ds.manifest = parse_manifest(path);
  if (!planes) planes = ds.manifest.planes;
  ds.samples.resize(ds.manifest.entries.size());
  parallel_for(ds.samples.size(), [&](std::size_t i) {
    const ManifestEntry& e = ds.manifest.entries[i];
    const auto rgb_path = ds.manifest.root / e.rgb_path;
    const auto g_path = ds.manifest.root / e.guidance_path;
    if (!std::filesystem::exists(rgb_path)) throw IoError("missing file " + rgb_path.string());
    if (!std::filesystem::exists(g_path)) throw IoError("missing file " + g_path.string());
    const Image rgb = read_pnm(rgb_path);
    const Image g = read_pnm(g_path);
    if (rgb.channels != 3) throw DataError(rgb_path.string() + " is not an RGB (P6) image");
    if (g.channels != 1) throw DataError(g_path.string() + " is not a greyscale (P5) image");
    if (rgb.width != g.width || rgb.height != g.height) {
      throw DataError("rasters of sample " + std::to_string(i) + " differ in extent");
    }
    RGBDSample& s = ds.samples[i];
    s.rgb = to_unit_tensor(rgb);
    s.guidance = planes ? normalize_depth(g, *planes) : to_unit_tensor(g);
    s.identity = e.identity;
    s.variation = e.variation;
  });
  return ds;
}

}  // namespace dga
