#include "doctest.h"
#include "dga/backbone.hpp"
#include "dga/model.hpp"
#include "support.hpp"

using namespace dga;
using dga::test::random_tensor;

namespace {

BackboneConfig toy_backbone() {
  BackboneConfig cfg;
  cfg.input_extent = 64;
  cfg.block_widths = {8, 16, 32};
  cfg.convs_per_block = {1, 1, 1};
  return cfg;
}

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("full-scale feature geometry") {
  const BackboneConfig full;
  CHECK(full.feature_extent() == 7);
  CHECK(full.rgb_width() == 512);
  CHECK(full.guidance_width() == 1472);
  const ModelShapes s = infer_shapes(ModelConfig::full_scale(509));
  CHECK(s.f_rgb == Shape{7, 7, 512});
  CHECK(s.f_guidance == Shape{7, 7, 1472});
}

TEST_CASE("five-block stream on 224 inputs") {
  // Narrow widths keep the full 224 -> 7 geometry cheap to run.
  BackboneConfig cfg;
  cfg.block_widths = {2, 2, 3, 3, 4};
  cfg.convs_per_block = {2, 2, 3, 3, 3};
  Backbone<float> bb(cfg, {});
  Tape<float> tape;
  const auto f = bb.extract(tape, tape.constant(Tensor<float>({224, 224, 3}, 0.3f)),
                            tape.constant(Tensor<float>({224, 224, 1}, 0.6f)));
  CHECK(f.f_rgb.shape() == Shape{7, 7, 4});
  CHECK(f.f_guidance.shape() == Shape{7, 7, 14});
}

TEST_CASE("toy extraction shapes and determinism") {
  const auto cfg = toy_backbone();
  Backbone<double> a(cfg, {}), b(cfg, {});
  Rng rng(1);
  const auto rgb = random_tensor(rng, {64, 64, 3}, 0, 1);
  const auto g = random_tensor(rng, {64, 64, 1}, 0, 1);
  Tape<double> t1, t2;
  const auto fa = a.extract(t1, t1.constant(rgb), t1.constant(g));
  const auto fb = b.extract(t2, t2.constant(rgb), t2.constant(g));
  CHECK(fa.f_rgb.shape() == Shape{8, 8, 32});
  CHECK(fa.f_guidance.shape() == Shape{8, 8, 56});
  CHECK(fa.f_rgb.value() == fb.f_rgb.value());
  CHECK(fa.f_guidance.value() == fb.f_guidance.value());
}

TEST_CASE("guidance concatenation order") {
  const auto cfg = toy_backbone();
  ConvStream<double> stream(cfg, 1, {}, "guidance");
  Rng rng(2);
  Tape<double> tape;
  const auto blocks = stream.forward_blocks(tape, tape.constant(random_tensor(rng, {64, 64, 1}, 0, 1)));
  REQUIRE(blocks.size() == 3);
  const auto cat = concat_block_features(blocks, 8).value();
  const auto b1 = avgpool2d(blocks[0], 4).value();  // 32x32x8 -> 8x8x8
  const auto b3 = blocks[2].value();
  for (std::size_t p = 0; p < 64; ++p) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(cat[p * 56 + c] == b1[p * 8 + c]);
    for (std::size_t c = 0; c < 32; ++c) CHECK(cat[p * 56 + 24 + c] == b3[p * 32 + c]);
  }
}

TEST_CASE("guidance stream mirrors the block structure") {
  const auto cfg = toy_backbone();
  Backbone<double> bb(cfg, {});
  Tape<double> tape;
  const auto ch = bb.extract_guidance(tape, tape.constant(Tensor<double>({64, 64, 1}, 0.2)));
  CHECK(ch.shape()[2] == 8 + 16 + 32);
  CHECK(bb.param_count() == ConvStream<double>::count(cfg, 3) + ConvStream<double>::count(cfg, 1));
}

TEST_CASE("extent and config errors") {
  const auto cfg = toy_backbone();
  Backbone<double> bb(cfg, {});
  Tape<double> tape;
  CHECK_THROWS_AS(bb.extract_rgb(tape, tape.constant(Tensor<double>({32, 32, 3}))), ShapeError);
  CHECK_THROWS_AS(bb.extract_rgb(tape, tape.constant(Tensor<double>({64, 64, 1}))), ShapeError);
  CHECK_THROWS_AS(bb.extract_guidance(tape, tape.constant(Tensor<double>({64, 64, 2}))),
                  ShapeError);

  auto bad = cfg;
  bad.convs_per_block = {1, 1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.input_extent = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.block_widths = {8, 0, 32};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  Backbone<double> rgb_only(cfg, {}, false);
  CHECK_FALSE(rgb_only.has_guidance());
  CHECK_THROWS_AS(rgb_only.extract_guidance(tape, tape.constant(Tensor<double>({64, 64, 1}))),
                  ConfigError);
}

TEST_CASE("three-channel guidance replicates a single-channel raster") {
  auto cfg = toy_backbone();
  cfg.guidance_channels = 3;
  Backbone<double> bb(cfg, {});
  Rng rng(4);
  const auto g1 = random_tensor(rng, {64, 64, 1}, 0, 1);
  Tensor<double> g3({64, 64, 3});
  for (std::size_t i = 0; i < 64 * 64; ++i)
    for (std::size_t c = 0; c < 3; ++c) g3[i * 3 + c] = g1[i];
  Tape<double> tape;
  CHECK(bb.extract_guidance(tape, tape.constant(g1)).value() ==
        bb.extract_guidance(tape, tape.constant(g3)).value());
}

TEST_CASE("substituting the guidance modality changes no shapes") {
  const auto cfg = toy_backbone();
  Backbone<double> bb(cfg, {});
  Rng rng(5);
  Tape<double> tape;
  const auto depth = bb.extract_guidance(tape, tape.constant(random_tensor(rng, {64, 64, 1}, 0, 1)));
  const auto thermal =
      bb.extract_guidance(tape, tape.constant(random_tensor(rng, {64, 64, 1}, 0.2, 0.4)));
  CHECK(depth.shape() == thermal.shape());
}

}
