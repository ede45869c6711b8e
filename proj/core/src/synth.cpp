#include "dga/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dga/parallel.hpp"
#include "dga/random.hpp"

namespace dga {

std::string_view to_string(GuidanceKind k) { return k == GuidanceKind::depth ? "depth" : "thermal"; }

GuidanceKind parse_guidance_kind(std::string_view text) {
  if (text == "depth") return GuidanceKind::depth;
  if (text == "thermal") return GuidanceKind::thermal;
  throw ConfigError("unknown guidance kind '" + std::string(text) + "'");
}

std::vector<VariationShare> parse_variation_mix(std::string_view text) {
  std::vector<VariationShare> mix;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string_view item = text.substr(pos, comma - pos);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("variation mix item '" + std::string(item) + "' lacks ':weight'");
    }
    VariationShare share{Variation::neutral, 0.0};
    try {
      share.variation = parse_variation(item.substr(0, colon));
      share.weight = std::stod(std::string(item.substr(colon + 1)));
    } catch (const std::exception& e) {
      throw ConfigError("bad variation mix item '" + std::string(item) + "': " + e.what());
    }
    if (share.weight < 0) throw ConfigError("variation weights must be non-negative");
    mix.push_back(share);
    pos = comma + 1;
  }
  return mix;
}

std::string format_variation_mix(const std::vector<VariationShare>& mix) {
  std::string out;
  for (const auto& s : mix) {
    if (!out.empty()) out += ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s.weight);
    out += std::string(to_string(s.variation)) + ':' + buf;
  }
  return out;
}

void SynthConfig::validate() const {
  if (ids < 2) throw ConfigError("synthetic dataset needs at least 2 identities");
  if (per_id < 2) throw ConfigError("synthetic dataset needs at least 2 samples per identity");
  if (extent < 8) throw ConfigError("synthetic extent must be at least 8");
  double total = 0;
  for (const auto& s : mix) total += s.weight;
  if (!(total > 0)) throw ConfigError("variation mix has no positive weight");
}

std::vector<Variation> variation_schedule(const SynthConfig& cfg) {
  cfg.validate();
  double total = 0;
  for (const auto& s : cfg.mix) total += s.weight;
  const auto n = static_cast<double>(cfg.per_id);
  std::vector<std::size_t> counts(cfg.mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < cfg.mix.size(); ++i) {
    const double exact = n * cfg.mix[i].weight / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < cfg.per_id; ++r, ++assigned) ++counts[remainders[r].second];

  // Keep one neutral sample when neutral is part of the mix.
  for (std::size_t i = 0; i < cfg.mix.size(); ++i) {
    if (cfg.mix[i].variation != Variation::neutral || cfg.mix[i].weight <= 0 || counts[i] > 0)
      continue;
    const auto donor = std::max_element(counts.begin(), counts.end()) - counts.begin();
    --counts[static_cast<std::size_t>(donor)];
    ++counts[i];
  }

  std::vector<Variation> schedule;
  for (Variation v : all_variations())
    for (std::size_t i = 0; i < cfg.mix.size(); ++i)
      if (cfg.mix[i].variation == v) schedule.insert(schedule.end(), counts[i], v);
  return schedule;
}

namespace {

// Anisotropic Gaussian bump on the face surface.
struct Bump {
  double cu, cv, su, sv, amp;
  double at(double u, double v) const {
    const double du = (u - cu) / su, dv = (v - cv) / sv;
    return amp * std::exp(-0.5 * (du * du + dv * dv));
  }
};

// Identity-coded face parameters.
struct FaceParams {
  double head_a, head_b, head_depth;
  std::vector<Bump> geometry;  // nose, brows, sockets, cheeks, mouth, chin
  std::size_t mouth = 0, brow_l = 0, brow_r = 0;
  double skin[3];
  std::vector<Bump> albedo_marks;  // darker/lighter skin patches
  std::vector<Bump> heat_spots;    // warm vessels for the thermal channel
};

FaceParams identity_params(std::uint64_t seed, std::size_t identity) {
  Rng rng(derive_seed(seed, 1000 + identity));
  auto r = [&] { return rng.uniform(-1.0, 1.0); };
  FaceParams f;
  f.head_a = 0.60 + 0.08 * r();
  f.head_b = 0.80 + 0.07 * r();
  f.head_depth = 0.55 + 0.10 * r();
  auto& g = f.geometry;
  g.push_back({0.05 * r(), 0.05 + 0.10 * r(), 0.09 + 0.04 * r(), 0.20 + 0.07 * r(),
               0.30 + 0.18 * r()});  // nose
  const double brow_u = 0.24 + 0.06 * r(), brow_v = -0.30 + 0.07 * r();
  const double brow_amp = 0.10 + 0.07 * r();
  f.brow_l = g.size();
  g.push_back({-brow_u, brow_v, 0.14 + 0.03 * r(), 0.05 + 0.015 * r(), brow_amp});
  f.brow_r = g.size();
  g.push_back({brow_u, brow_v + 0.02 * r(), 0.14 + 0.03 * r(), 0.05 + 0.015 * r(), brow_amp});
  const double eye_u = 0.25 + 0.05 * r(), eye_v = -0.14 + 0.05 * r(), eye_amp = -0.10 - 0.06 * r();
  g.push_back({-eye_u, eye_v, 0.10, 0.07, eye_amp});
  g.push_back({eye_u, eye_v, 0.10, 0.07, eye_amp});
  const double cheek_u = 0.34 + 0.06 * r(), cheek_v = 0.16 + 0.08 * r();
  const double cheek_amp = 0.07 + 0.07 * r();
  g.push_back({-cheek_u, cheek_v, 0.14 + 0.04 * r(), 0.12, cheek_amp});
  g.push_back({cheek_u, cheek_v, 0.14 + 0.04 * r(), 0.12, cheek_amp});
  f.mouth = g.size();
  g.push_back({0.03 * r(), 0.46 + 0.06 * r(), 0.20 + 0.05 * r(), 0.05 + 0.02 * r(),
               0.05 + 0.05 * r()});
  g.push_back({0.03 * r(), 0.70 + 0.04 * r(), 0.18, 0.10, 0.06 + 0.05 * r()});  // chin

  f.skin[0] = 0.72 + 0.05 * r();
  f.skin[1] = 0.56 + 0.05 * r();
  f.skin[2] = 0.46 + 0.05 * r();
  for (int i = 0; i < 3; ++i)
    f.albedo_marks.push_back({0.5 * r(), 0.6 * r(), 0.12 + 0.05 * r(), 0.12 + 0.05 * r(),
                              0.10 * r()});
  for (int i = 0; i < 4; ++i)
    f.heat_spots.push_back({0.5 * r(), 0.7 * r(), 0.08 + 0.04 * r(), 0.15 + 0.05 * r(),
                            0.12 + 0.06 * r()});
  return f;
}

// Per-sample nuisance parameters.
struct SampleParams {
  double angle = 0, du = 0, dv = 0, scale = 1;
  double light[3] = {-0.3, -0.4, 1.0};
  double brightness = 1.0;
  double skin_shift = 0.0;
  double noise = 0.01;
  bool occluded = false;
  double occ_u0 = 0, occ_v0 = 0, occ_u1 = 0, occ_v1 = 0;  // pixel-space rectangle
  std::uint64_t noise_seed = 0;
};

double head_height(const FaceParams& f, double u, double v, bool& inside) {
  const double e = 1.0 - (u / f.head_a) * (u / f.head_a) - (v / f.head_b) * (v / f.head_b);
  inside = e > 0.0;
  if (!inside) return 0.0;
  double z = f.head_depth * std::sqrt(e);
  // Features fade out towards the outline.
  const double fade = std::min(1.0, e * 4.0);
  for (const auto& b : f.geometry) z += fade * b.at(u, v);
  return std::max(z, 0.0);
}

}  // namespace

SynthSample render_synthetic(const SynthConfig& cfg, std::size_t identity, std::size_t index) {
  const auto schedule = variation_schedule(cfg);
  if (identity >= cfg.ids || index >= schedule.size()) {
    throw ConfigError("synthetic sample (" + std::to_string(identity) + ", " +
                      std::to_string(index) + ") out of range");
  }
  const Variation variation = schedule[index];
  FaceParams face = identity_params(cfg.seed, identity);

  // Illumination samples reuse the geometry stream of the identity's first
  // neutral sample, so their guidance raster is identical to it.
  std::size_t geometry_index = index;
  if (variation == Variation::illumination) {
    const auto it = std::find(schedule.begin(), schedule.end(), Variation::neutral);
    if (it != schedule.end()) geometry_index = static_cast<std::size_t>(it - schedule.begin());
  }
  const std::uint64_t sample_stream = derive_seed(cfg.seed, 1'000'000 + identity * 10'000);
  Rng geo(derive_seed(sample_stream, geometry_index));
  Rng var(derive_seed(sample_stream, 5000 + index));

  SampleParams sp;
  // Natural head motion present in every capture.
  sp.angle = geo.uniform(-8.0, 8.0) * std::numbers::pi / 180.0;
  sp.du = geo.uniform(-0.05, 0.05);
  sp.dv = geo.uniform(-0.05, 0.05);
  sp.scale = 1.0 + geo.uniform(-0.04, 0.04);
  sp.noise_seed = geo.next();
  // Ambient lighting also drifts between captures.
  sp.light[0] += var.uniform(-0.2, 0.2);
  sp.light[1] += var.uniform(-0.15, 0.15);

  const double H = static_cast<double>(cfg.extent);
  switch (variation) {
    case Variation::neutral:
      break;
    case Variation::pose: {
      const double deg = var.uniform(10.0, 30.0) * (var.uniform() < 0.5 ? -1.0 : 1.0);
      sp.angle = deg * std::numbers::pi / 180.0;
      break;
    }
    case Variation::expression: {
      auto& mouth = face.geometry[face.mouth];
      mouth.amp *= var.uniform(1.6, 2.6);
      mouth.su *= var.uniform(1.2, 1.6);
      mouth.cv += var.uniform(0.0, 0.06);
      const double raise = var.uniform(0.04, 0.10);
      face.geometry[face.brow_l].cv -= raise;
      face.geometry[face.brow_r].cv -= raise * var.uniform(0.6, 1.2);
      face.geometry[face.brow_l].amp *= var.uniform(0.8, 1.4);
      break;
    }
    case Variation::occlusion: {
      sp.occluded = true;
      const double area = var.uniform(0.10, 0.25) * H * H;
      const double aspect = var.uniform(0.5, 2.0);
      const double w = std::min(H, std::sqrt(area * aspect));
      const double h = std::min(H, area / w);
      sp.occ_u0 = var.uniform(0.0, H - w);
      sp.occ_v0 = var.uniform(0.0, H - h);
      sp.occ_u1 = sp.occ_u0 + w;
      sp.occ_v1 = sp.occ_v0 + h;
      break;
    }
    case Variation::illumination:
      sp.brightness = var.uniform(0.4, 1.3);
      break;
    case Variation::time:
      sp.scale *= 1.0 + var.uniform(-0.05, 0.05);
      sp.light[0] = var.uniform(-0.6, 0.6);
      sp.light[1] = var.uniform(-0.6, 0.2);
      sp.skin_shift = var.uniform(-0.06, 0.06);
      sp.noise = 0.02;
      break;
  }
  const double ln = std::sqrt(sp.light[0] * sp.light[0] + sp.light[1] * sp.light[1] +
                              sp.light[2] * sp.light[2]);
  for (double& l : sp.light) l /= ln;

  const std::size_t n = cfg.extent;
  SynthSample out;
  out.identity = identity;
  out.variation = variation;
  out.rgb = Image{n, n, 3, 255, std::vector<std::uint16_t>(n * n * 3)};
  const bool depth = cfg.guidance == GuidanceKind::depth;
  out.guidance = Image{n, n, 1, depth ? 4095u : 255u, std::vector<std::uint16_t>(n * n)};
  out.face_mask.assign(n * n, 0);

  Rng noise(sp.noise_seed);
  Rng rgb_noise(derive_seed(sp.noise_seed, variation == Variation::illumination ? index : 0));
  const double ca = std::cos(sp.angle), sa = std::sin(sp.angle);
  const double step = 2.0 / H;
  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      // Image -> face coordinates: undo translation, rotation and scale.
      const double x = (static_cast<double>(px) + 0.5) * step - 1.0 - sp.du;
      const double y = (static_cast<double>(py) + 0.5) * step - 1.0 - sp.dv;
      const double u = (ca * x + sa * y) / sp.scale;
      const double v = (-sa * x + ca * y) / sp.scale;
      bool inside = false;
      const double z = head_height(face, u, v, inside);
      const std::size_t pix = py * n + px;

      double rgb[3] = {0.12, 0.13, 0.15};
      double g_value;
      if (inside) {
        out.face_mask[pix] = 1;
        bool in_dummy;
        const double h = 1e-3;
        const double dzdu = (head_height(face, u + h, v, in_dummy) -
                             head_height(face, u - h, v, in_dummy)) / (2 * h);
        const double dzdv = (head_height(face, u, v + h, in_dummy) -
                             head_height(face, u, v - h, in_dummy)) / (2 * h);
        // Normal in image space: rotate the surface gradient with the face.
        const double gx = ca * dzdu - sa * dzdv, gy = sa * dzdu + ca * dzdv;
        const double nn = std::sqrt(gx * gx + gy * gy + 1.0);
        const double lambert =
            std::max(0.0, (-gx * sp.light[0] - gy * sp.light[1] + sp.light[2]) / nn);
        const double shade = 0.25 + 0.75 * lambert;
        double mark = 0;
        for (const auto& b : face.albedo_marks) mark += b.at(u, v);
        for (int c = 0; c < 3; ++c) rgb[c] = shade * (face.skin[c] + sp.skin_shift + mark);
        // Darker brows and redder lips.
        const double brow = face.geometry[face.brow_l].at(u, v) + face.geometry[face.brow_r].at(u, v);
        const double lip = face.geometry[face.mouth].at(u, v) / std::max(1e-6, face.geometry[face.mouth].amp);
        for (int c = 0; c < 3; ++c) rgb[c] -= 1.5 * brow;
        rgb[0] += 0.10 * lip;
        rgb[1] -= 0.08 * lip;

        if (depth) {
          g_value = 700.0 - 120.0 * z;
        } else {
          double heat = 0.72 + 0.12 * (1.0 - std::abs(v));
          for (const auto& b : face.heat_spots) heat += b.at(u, v);
          heat -= 0.35 * face.geometry[0].at(u, v);  // cool nose tip
          g_value = heat;
        }
      } else {
        g_value = depth ? 2000.0 : 0.10;
      }

      const double fx = static_cast<double>(px) + 0.5, fy = static_cast<double>(py) + 0.5;
      if (sp.occluded && fx >= sp.occ_u0 && fx < sp.occ_u1 && fy >= sp.occ_v0 && fy < sp.occ_v1) {
        rgb[0] = 0.30;
        rgb[1] = 0.32;
        rgb[2] = 0.38;
        g_value = depth ? 560.0 : 0.30;
      }

      for (int c = 0; c < 3; ++c) {
        const double val = std::clamp(rgb[c] * sp.brightness + sp.noise * rgb_noise.normal(),
                                      0.0, 1.0);
        out.rgb.samples[pix * 3 + static_cast<std::size_t>(c)] =
            static_cast<std::uint16_t>(std::lround(val * 255.0));
      }
      if (depth) {
        const double mm = std::clamp(g_value + 1.5 * noise.normal(), 0.0, 4095.0);
        out.guidance.samples[pix] = static_cast<std::uint16_t>(std::lround(mm));
      } else {
        const double t = std::clamp(g_value + 0.01 * noise.normal(), 0.0, 1.0);
        out.guidance.samples[pix] = static_cast<std::uint16_t>(std::lround(t * 255.0));
      }
    }
  }
  return out;
}

std::string synth_rgb_name(std::size_t identity, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "rgb/id%03zu_s%03zu.ppm", identity, index);
  return buf;
}

std::string synth_guidance_name(std::size_t identity, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "guidance/id%03zu_s%03zu.pgm", identity, index);
  return buf;
}

SynthSummary synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  const auto schedule = variation_schedule(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "rgb", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "guidance", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t total = cfg.ids * cfg.per_id;
  parallel_for(total, [&](std::size_t k) {
    const std::size_t id = k / cfg.per_id, idx = k % cfg.per_id;
    const SynthSample s = render_synthetic(cfg, id, idx);
    write_pnm(out_dir / synth_rgb_name(id, idx), s.rgb);
    write_pnm(out_dir / synth_guidance_name(id, idx), s.guidance);
  });

  SynthSummary summary;
  summary.manifest = out_dir / "manifest.tsv";
  std::ofstream m(summary.manifest, std::ios::trunc);
  if (!m) throw IoError("cannot write " + summary.manifest.string());
  m << "# dga synthetic dataset\n"
    << "# ids=" << cfg.ids << " per_id=" << cfg.per_id << " extent=" << cfg.extent
    << " seed=" << cfg.seed << " guidance=" << to_string(cfg.guidance)
    << " mix=" << format_variation_mix(cfg.mix) << '\n';
  if (cfg.guidance == GuidanceKind::depth) {
    m << "# depth_planes near=" << kSynthDepthPlanes.near << " far=" << kSynthDepthPlanes.far
      << '\n';
  }
  for (std::size_t id = 0; id < cfg.ids; ++id) {
    for (std::size_t idx = 0; idx < cfg.per_id; ++idx) {
      m << manifest_line({id, schedule[idx], synth_rgb_name(id, idx), synth_guidance_name(id, idx)})
        << '\n';
    }
  }
  if (!m) throw IoError("failed writing " + summary.manifest.string());
  summary.samples = total;
  return summary;
}

}  // namespace dga
