#include <cmath>

#include "doctest.h"
#include "dga/optim.hpp"
#include "dga/synth.hpp"
#include "dga/train.hpp"
#include "support.hpp"

using namespace dga;
using dga::test::TempDir;

namespace {

std::vector<RGBDSample> tiny_set(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RGBDSample> out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      RGBDSample s;
      s.rgb = Tensor<float>({64, 64, 3});
      s.guidance = Tensor<float>({64, 64, 1});
      for (float& v : s.rgb.data()) v = static_cast<float>(rng.uniform());
      for (float& v : s.guidance.data()) v = static_cast<float>(rng.uniform());
      s.identity = c;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("optim") {

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor<double> p = Tensor<double>::from({3}, {1, -2, 3});
  const Tensor<double> before = p;
  const Tensor<double> g({3}, 0.0);
  Adam<double> adam;
  std::vector<Tensor<double>*> ps{&p};
  std::vector<const Tensor<double>*> gs{&g};
  for (int i = 0; i < 3; ++i) adam.step(ps, gs, 0.1);
  CHECK(p == before);
  CHECK(adam.steps() == 3);
}

TEST_CASE("adam: first step on a unit gradient moves by lr") {
  for (double lr : {1e-5, 1e-3, 0.5}) {
    Tensor<double> p({1}, 0.0);
    const Tensor<double> g({1}, 1.0);
    Adam<double> adam;
    std::vector<Tensor<double>*> ps{&p};
    std::vector<const Tensor<double>*> gs{&g};
    adam.step(ps, gs, lr);
    // m_hat = 1, v_hat = 1: delta = lr / (1 + eps).
    CHECK(std::abs(std::abs(p[0]) - lr) < 1e-6 * lr);
    CHECK(p[0] < 0.0);
  }
}

TEST_CASE("adam: symmetry, lr zero, moment shapes") {
  Tensor<double> a = Tensor<double>::from({2}, {0.5, 0.5});
  Tensor<double> b = Tensor<double>::from({2}, {0.5, 0.5});
  const Tensor<double> ga = Tensor<double>::from({2}, {0.3, -0.7});
  Adam<double> adam;
  std::vector<Tensor<double>*> ps{&a, &b};
  std::vector<const Tensor<double>*> gs{&ga, &ga};
  for (int i = 0; i < 4; ++i) adam.step(ps, gs, 0.01);
  CHECK(a == b);
  CHECK(adam.first_moments()[0].shape() == a.shape());
  CHECK(adam.second_moments()[1].shape() == b.shape());

  const Tensor<double> keep = a;
  adam.step(ps, gs, 0.0);
  CHECK(a == keep);

  const Tensor<double> wrong({3}, 1.0);
  std::vector<const Tensor<double>*> bad{&wrong, &ga};
  CHECK_THROWS_AS(adam.step(ps, bad, 0.1), ShapeError);
  std::vector<const Tensor<double>*> short_list{&ga};
  CHECK_THROWS_AS(adam.step(ps, short_list, 0.1), ShapeError);
  CHECK_THROWS_AS(adam.step(ps, gs, -1.0), ConfigError);
}

TEST_CASE("adam matches a scalar reference implementation") {
  Tensor<double> p = Tensor<double>::from({1}, {0.2});
  double ref = 0.2, m = 0, v = 0;
  Adam<double> adam;
  std::vector<Tensor<double>*> ps{&p};
  for (int t = 1; t <= 5; ++t) {
    const double g = 0.1 * t - 0.25;
    const Tensor<double> gt = Tensor<double>::from({1}, {g});
    std::vector<const Tensor<double>*> gs{&gt};
    adam.step(ps, gs, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("learning-rate schedule") {
  const TrainConfig cfg;  // lr0 1e-5, decay 0.9
  CHECK(lr_schedule(cfg, 0) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_schedule(cfg, 1) == doctest::Approx(9e-6).epsilon(1e-12));
  CHECK(lr_schedule(cfg, 2) == doctest::Approx(8.1e-6).epsilon(1e-12));
  for (std::size_t e = 0; e < 50; ++e) CHECK(lr_schedule(cfg, e + 1) < lr_schedule(cfg, e));
  CHECK(cfg.batch_size == 30);

  TrainConfig bad;
  bad.decay = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.lr0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("train memorizes a single sample") {
  const auto data = tiny_set(3, 1, 1);
  const std::vector<RGBDSample> one{data[2]};
  Model<float> m(ModelConfig::toy(3));
  TrainConfig cfg;
  cfg.lr0 = 1e-3;
  cfg.epochs = 15;
  cfg.batch_size = 1;
  const auto h = train(m, one, cfg);
  REQUIRE(h.size() == 15);
  CHECK(h.back().train_acc == 1.0);
  CHECK(h.back().loss_total < h.front().loss_total);
}

TEST_CASE("train is deterministic and keeps the last short batch") {
  const auto data = tiny_set(3, 3, 2);
  TrainConfig cfg;
  cfg.lr0 = 1e-3;
  cfg.epochs = 3;
  cfg.batch_size = 4;  // 9 samples: batches of 4, 4, 1
  cfg.seed = 5;
  Model<float> a(ModelConfig::toy(3));
  Model<float> b(ModelConfig::toy(3));
  const auto ha = train(a, data, cfg);
  const auto hb = train(b, data, cfg);
  CHECK(ha == hb);
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(*a.parameters()[i].tensor == *b.parameters()[i].tensor);

  Model<float> c(ModelConfig::toy(3));
  cfg.seed = 6;
  CHECK_FALSE(train(c, data, cfg) == ha);

  for (const auto& e : ha) {
    REQUIRE(e.loss_rgb.has_value());
    CHECK(e.loss_total == doctest::Approx(*e.loss_rgb + *e.loss_guidance + e.loss_attention));
  }
}

TEST_CASE("train is independent of the worker count") {
  const auto data = tiny_set(2, 3, 3);
  TrainConfig cfg;
  cfg.lr0 = 1e-3;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  auto run = [&](const char* threads) {
    ::setenv("DGA_THREADS", threads, 1);
    Model<float> m(ModelConfig::toy(2));
    auto h = train(m, data, cfg);
    ::unsetenv("DGA_THREADS");
    return h;
  };
  CHECK(run("1") == run("3"));
}

TEST_CASE("train errors") {
  Model<float> m(ModelConfig::toy(2));
  CHECK_THROWS_AS(train(m, std::vector<RGBDSample>{}, TrainConfig{}), DataError);
  auto data = tiny_set(3, 1, 4);
  CHECK_THROWS_AS(train(m, data, TrainConfig{}), DataError);
}

TEST_CASE("metrics CSV") {
  std::vector<EpochMetrics> h(2);
  h[0] = {0, 0.001, 2.5, 1.0, 0.75, 0.75, 0.5};
  h[1] = {1, 0.0009, 2.0, std::nullopt, std::nullopt, 2.0, 0.25};
  const std::string csv = metrics_csv(h);
  CHECK(csv ==
        "epoch,lr,loss_total,loss_rgb,loss_guidance,loss_attention,train_acc\n"
        "0,0.001,2.5,1,0.75,0.75,0.5\n"
        "1,0.00089999999999999998,2,,,2,0.25\n");
  TempDir dir;
  write_metrics_csv(dir / "m.csv", h);
  CHECK(dga::test::slurp(dir / "m.csv") == csv);
}

TEST_CASE("loss falls over the first epochs on the toy synthetic set") {
  TempDir dir;
  SynthConfig sc;
  sc.seed = 3;
  synth_generate(sc, dir.path());
  const Dataset ds = load_manifest(dir / "manifest.tsv");
  REQUIRE(ds.samples.size() == 200);
  Model<float> m(ModelConfig::toy(ds.num_classes()));
  TrainConfig cfg;
  cfg.lr0 = 3e-3;
  cfg.batch_size = 10;
  cfg.epochs = 6;
  const auto h = train(m, ds.samples, cfg);
  for (const auto& e : h) CHECK(std::isfinite(e.loss_total));
  CHECK(h[5].loss_total < h[0].loss_total);
}

}
