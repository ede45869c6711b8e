#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dga/dataset.hpp"
#include "dga/image_io.hpp"
#include "dga/protocol.hpp"
#include "dga/synth.hpp"
#include "support.hpp"

using namespace dga;
using dga::test::slurp;
using dga::test::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

Image solid(std::size_t w, std::size_t h, std::size_t c, std::uint16_t v, std::uint32_t maxval = 255) {
  return Image{w, h, c, maxval, std::vector<std::uint16_t>(w * h * c, v)};
}

std::vector<ManifestEntry> entries(std::size_t ids, const std::vector<Variation>& per_id) {
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < ids; ++i)
    for (Variation v : per_id) out.push_back({i, v, "r", "g"});
  return out;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("normalize_depth") {
  const DepthPlanes p{50, 200};
  CHECK(normalize_depth(50, p) == 0.0);
  CHECK(normalize_depth(200, p) == 1.0);
  CHECK(normalize_depth(125, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normalize_depth(300, p) == 0.0);
  CHECK(normalize_depth(10, p) == 0.0);
  double prev = 0.0;
  for (int raw = 50; raw <= 200; ++raw) {
    const double v = normalize_depth(raw, p);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK_THROWS_AS(normalize_depth(1, DepthPlanes{5, 5}), ConfigError);
  CHECK_THROWS_AS(normalize_depth(1, DepthPlanes{6, 5}), ConfigError);

  const Image raw{3, 1, 1, 4095, {50, 125, 300}};
  const auto t = normalize_depth(raw, p);
  CHECK(t.shape() == Shape{1, 3, 1});
  CHECK(t[0] == 0.0f);
  CHECK(t[1] == 0.5f);
  CHECK(t[2] == 0.0f);
}

TEST_CASE("netpbm round trips") {
  TempDir dir;
  Image rgb{3, 2, 3, 255, {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255, 9, 8, 7, 6, 5, 4}};
  write_pnm(dir / "a.ppm", rgb);
  CHECK(read_pnm(dir / "a.ppm") == rgb);
  CHECK(slurp(dir / "a.ppm").substr(0, 2) == "P6");

  Image deep{2, 2, 1, 4095, {0, 4095, 256, 1}};
  write_pnm(dir / "d.pgm", deep);
  CHECK(read_pnm(dir / "d.pgm") == deep);
  const std::string bytes = slurp(dir / "d.pgm");
  // Big-endian two-byte samples: 256 -> 0x01 0x00.
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 4]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 0x00);

  const auto t = to_unit_tensor(deep);
  CHECK(t[1] == 1.0f);
  CHECK(from_unit_tensor(t, 4095) == deep);

  write_text(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(read_pnm(dir / "bad.pgm"), IoError);
  write_text(dir / "cut.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(read_pnm(dir / "cut.pgm"), IoError);
  CHECK_THROWS_AS(read_pnm(dir / "none.pgm"), IoError);
  // Header comments are allowed.
  write_text(dir / "c.pgm", std::string("P5\n# note\n2 1\n255\n") + "\x05\x06");
  CHECK(read_pnm(dir / "c.pgm").samples == std::vector<std::uint16_t>{5, 6});
}

TEST_CASE("manifest loading") {
  TempDir dir;
  write_pnm(dir / "r0.ppm", solid(4, 4, 3, 255));
  write_pnm(dir / "g0.pgm", solid(4, 4, 1, 51));
  write_pnm(dir / "r1.ppm", solid(4, 4, 3, 0));
  write_pnm(dir / "g1.pgm", solid(4, 4, 1, 0));

  write_text(dir / "empty.tsv", "# nothing here\n\n");
  CHECK_THROWS_AS(load_manifest(dir / "empty.tsv"), DataError);

  write_text(dir / "one.tsv", "0\tneutral\tr0.ppm\tg0.pgm\n");
  const Dataset one = load_manifest(dir / "one.tsv");
  REQUIRE(one.samples.size() == 1);
  CHECK(one.samples[0].identity == 0);
  CHECK(one.samples[0].rgb.shape() == Shape{4, 4, 3});
  CHECK(one.samples[0].guidance[0] == doctest::Approx(0.2f));
  CHECK_FALSE(one.manifest.remapped);

  write_text(dir / "gap.tsv",
             "7\tneutral\tr0.ppm\tg0.pgm\n3\tpose\tr1.ppm\tg1.pgm\n7\tocclusion\tr1.ppm\tg1.pgm\n");
  const Dataset gap = load_manifest(dir / "gap.tsv");
  CHECK(gap.manifest.remapped);
  CHECK(gap.manifest.original_ids == std::vector<std::size_t>{3, 7});
  CHECK(gap.samples[0].identity == 1);
  CHECK(gap.samples[1].identity == 0);
  CHECK(gap.num_classes() == 2);
  CHECK(gap.samples[1].variation == Variation::pose);

  write_text(dir / "planes.tsv", "# depth_planes near=0 far=102\n0\tneutral\tr0.ppm\tg0.pgm\n");
  const Dataset pl = load_manifest(dir / "planes.tsv");
  CHECK(pl.manifest.planes.has_value());
  CHECK(pl.samples[0].guidance[0] == doctest::Approx(0.5f));
  const Dataset over = load_manifest(dir / "planes.tsv", DepthPlanes{0, 204});
  CHECK(over.samples[0].guidance[0] == doctest::Approx(0.25f));

  write_text(dir / "bad.tsv", "0\tneutral\tr0.ppm\tg0.pgm\n0\tneutral\tr0.ppm\n");
  try {
    load_manifest(dir / "bad.tsv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  write_text(dir / "var.tsv", "0\tsmiling\tr0.ppm\tg0.pgm\n");
  CHECK_THROWS_AS(load_manifest(dir / "var.tsv"), DataError);
  write_text(dir / "id.tsv", "x\tneutral\tr0.ppm\tg0.pgm\n");
  CHECK_THROWS_AS(load_manifest(dir / "id.tsv"), DataError);
  write_text(dir / "missing.tsv", "0\tneutral\tnope.ppm\tg0.pgm\n");
  CHECK_THROWS_AS(load_manifest(dir / "missing.tsv"), IoError);
  write_text(dir / "swap.tsv", "0\tneutral\tg0.pgm\tr0.ppm\n");
  CHECK_THROWS_AS(load_manifest(dir / "swap.tsv"), DataError);
  write_text(dir / "magic.ppm", "GIF89a");
  write_text(dir / "magic.tsv", "0\tneutral\tmagic.ppm\tg0.pgm\n");
  CHECK_THROWS_AS(load_manifest(dir / "magic.tsv"), IoError);
  CHECK_THROWS_AS(load_manifest(dir / "absent.tsv"), IoError);

  CHECK(manifest_line({2, Variation::time, "a.ppm", "b.pgm"}) == "2\ttime\ta.ppm\tb.pgm");
}

TEST_CASE("variation mix and schedule") {
  const auto mix = parse_variation_mix("neutral:3,pose:2");
  REQUIRE(mix.size() == 2);
  CHECK(mix[1].variation == Variation::pose);
  CHECK(format_variation_mix(mix) == "neutral:3,pose:2");
  CHECK_THROWS_AS(parse_variation_mix("neutral"), ConfigError);
  CHECK_THROWS_AS(parse_variation_mix("neutral:-1"), ConfigError);
  CHECK_THROWS_AS(parse_variation_mix("blur:1"), Error);

  SynthConfig cfg;
  cfg.per_id = 8;
  cfg.mix = mix;
  const auto s = variation_schedule(cfg);
  CHECK(std::count(s.begin(), s.end(), Variation::neutral) == 5);
  CHECK(std::count(s.begin(), s.end(), Variation::pose) == 3);
  CHECK(s.front() == Variation::neutral);

  cfg.mix = parse_variation_mix("neutral:1,pose:100");
  const auto t = variation_schedule(cfg);
  CHECK(std::count(t.begin(), t.end(), Variation::neutral) >= 1);
  CHECK(t.size() == 8);

  SynthConfig bad;
  bad.ids = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.per_id = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.mix = parse_variation_mix("neutral:0");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic rendering properties") {
  SynthConfig cfg;
  cfg.ids = 4;
  cfg.per_id = 9;
  cfg.seed = 5;
  const auto sched = variation_schedule(cfg);
  const std::size_t neutral = 0;
  const std::size_t illum =
      static_cast<std::size_t>(std::find(sched.begin(), sched.end(), Variation::illumination) -
                               sched.begin());
  REQUIRE(illum < sched.size());
  for (std::size_t id = 0; id < cfg.ids; ++id) {
    const auto n = render_synthetic(cfg, id, neutral);
    const auto il = render_synthetic(cfg, id, illum);
    CHECK(il.guidance == n.guidance);
    CHECK_FALSE(il.rgb == n.rgb);
    CHECK(n.rgb.channels == 3);
    CHECK(n.guidance.maxval == 4095);
    CHECK(render_synthetic(cfg, id, 3).rgb == render_synthetic(cfg, id, 3).rgb);
  }
  // Distinct identities differ in their guidance rasters.
  for (std::size_t a = 0; a < cfg.ids; ++a) {
    for (std::size_t b = a + 1; b < cfg.ids; ++b) {
      const auto ga = render_synthetic(cfg, a, 0).guidance.samples;
      const auto gb = render_synthetic(cfg, b, 0).guidance.samples;
      int diff = 0;
      for (std::size_t i = 0; i < ga.size(); ++i) diff = std::max(diff, std::abs(ga[i] - gb[i]));
      CHECK(diff > 0);
    }
  }
  CHECK_THROWS_AS(render_synthetic(cfg, 4, 0), ConfigError);

  // Occlusion reaches both modalities.
  const auto occ_idx = static_cast<std::size_t>(
      std::find(sched.begin(), sched.end(), Variation::occlusion) - sched.begin());
  const auto occ = render_synthetic(cfg, 0, occ_idx);
  std::size_t occluder = 0;
  for (auto v : occ.guidance.samples) occluder += std::abs(int(v) - 560) <= 8 ? 1 : 0;
  CHECK(occluder >= static_cast<std::size_t>(0.10 * 64 * 64) - 1);

  // Face mask is non-empty but leaves background.
  std::size_t face = 0;
  for (auto m : occ.face_mask) face += m;
  CHECK(face > 0);
  CHECK(face < occ.face_mask.size());

  cfg.guidance = GuidanceKind::thermal;
  const auto th = render_synthetic(cfg, 0, 0);
  CHECK(th.guidance.maxval == 255);
  CHECK(th.guidance.channels == 1);
}

TEST_CASE("synth_generate: counts, determinism, round trip") {
  TempDir a, b;
  SynthConfig cfg;  // 10 ids x 20
  cfg.seed = 9;
  const auto sa = synth_generate(cfg, a.path());
  CHECK(sa.samples == 200);
  synth_generate(cfg, b.path());
  CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
  for (std::size_t id : {0, 9}) {
    for (std::size_t k : {0, 7, 19}) {
      CHECK(slurp(a / synth_rgb_name(id, k)) == slurp(b / synth_rgb_name(id, k)));
      CHECK(slurp(a / synth_guidance_name(id, k)) == slurp(b / synth_guidance_name(id, k)));
    }
  }

  const Dataset ds = load_manifest(a / "manifest.tsv");
  REQUIRE(ds.samples.size() == 200);
  CHECK(ds.num_classes() == 10);
  REQUIRE(ds.manifest.planes.has_value());
  CHECK(ds.manifest.planes->near == kSynthDepthPlanes.near);
  const auto r = render_synthetic(cfg, 3, 5);
  const auto& s = ds.samples[3 * 20 + 5];
  CHECK(s.identity == 3);
  CHECK(s.rgb == to_unit_tensor(r.rgb));
  CHECK(s.guidance == normalize_depth(r.guidance, kSynthDepthPlanes));
  CHECK(read_pnm(a / synth_rgb_name(3, 5)) == r.rgb);
  CHECK(read_pnm(a / synth_guidance_name(3, 5)) == r.guidance);

  SynthConfig other = cfg;
  other.seed = 10;
  const auto o = render_synthetic(other, 3, 5);
  CHECK_FALSE(o.rgb == r.rgb);
}

TEST_CASE("synth_generate: unwritable output") {
  TempDir dir;
  write_text(dir / "file", "x");
  SynthConfig cfg;
  cfg.ids = 2;
  cfg.per_id = 2;
  CHECK_THROWS_AS(synth_generate(cfg, dir / "file" / "sub"), IoError);
}

TEST_CASE("protocol: neutral gallery") {
  const std::vector<Variation> per_id{Variation::neutral,    Variation::neutral,
                                      Variation::pose,       Variation::pose,
                                      Variation::expression, Variation::occlusion,
                                      Variation::occlusion,  Variation::time};
  const auto e = entries(10, per_id);
  const ProtocolSplit s = split_protocol(e, {});
  CHECK(s.gallery.size() == 20);
  CHECK(s.probe_count() == 60);
  REQUIRE(s.find("pose") != nullptr);
  for (std::size_t i : s.find("pose")->indices) CHECK(e[i].variation == Variation::pose);
  CHECK(s.find("illumination") == nullptr);
  std::vector<std::string> names;
  for (const auto& p : s.probes) names.push_back(p.name);
  CHECK(names == std::vector<std::string>{"pose", "expression", "occlusion", "time"});

  std::vector<bool> seen(e.size(), false);
  for (std::size_t i : s.gallery) seen[i] = true;
  for (const auto& p : s.probes)
    for (std::size_t i : p.indices) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

  auto no_neutral = e;
  for (auto& x : no_neutral)
    if (x.identity == 4) x.variation = Variation::pose;
  CHECK_THROWS_AS(split_protocol(no_neutral, {}), DataError);
  CHECK_THROWS_AS(split_protocol(entries(3, {Variation::neutral}), {}), DataError);
  CHECK_THROWS_AS(split_protocol(std::vector<ManifestEntry>{}, {}), DataError);
}

TEST_CASE("protocol: ratio") {
  const auto e = entries(5, {Variation::neutral, Variation::pose, Variation::time,
                             Variation::occlusion, Variation::neutral, Variation::pose});
  const auto scheme = parse_protocol_scheme("ratio:0.5:3");
  CHECK(scheme.kind == ProtocolScheme::Kind::ratio);
  CHECK(scheme.seed == 3);
  const auto s = split_protocol(e, scheme);
  CHECK(s.gallery.size() == 15);
  CHECK(s.probe_count() == 15);
  const auto again = split_protocol(e, scheme);
  CHECK(again.gallery == s.gallery);
  std::vector<std::size_t> per_id(5, 0);
  for (std::size_t i : s.gallery) ++per_id[e[i].identity];
  for (std::size_t c : per_id) CHECK(c == 3);

  CHECK(to_string(parse_protocol_scheme("neutral-gallery")) == "neutral-gallery");
  CHECK(parse_protocol_scheme(to_string(scheme)).ratio == 0.5);
  CHECK_THROWS_AS(parse_protocol_scheme("ratio:1.5"), ConfigError);
  CHECK_THROWS_AS(parse_protocol_scheme("ratio:abc"), ConfigError);
  CHECK_THROWS_AS(parse_protocol_scheme("random"), ConfigError);
}

}
