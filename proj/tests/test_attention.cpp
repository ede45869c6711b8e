#include <cmath>

#include "doctest.h"
#include "dga/attention.hpp"
#include "support.hpp"

using namespace dga;
using dga::test::max_grad_error;
using dga::test::random_tensor;

namespace {

double map_sum(const Tensor<double>& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("dot pooling shapes and identities") {
  const PoolingConfig pc{PoolingMode::dot, 64, 256};
  AttentionModule<float> full(pc, 512, 1472, true, {});
  Rng rng(1);
  Tape<float> ft;
  const auto frgb = ft.constant(random_tensor(rng, {7, 7, 512}).cast<float>());
  const auto fg = ft.constant(random_tensor(rng, {7, 7, 1472}).cast<float>());
  const auto pooled = full.pool(ft, frgb, fg);
  CHECK(pooled.shape() == Shape{7, 7, 64});
  CHECK(full.attend(ft, pooled).shape() == Shape{7, 7, 1});

  Dense<double> w1(5, 4, DenseActivation::tanh, {}, "w1");
  Dense<double> w2(6, 4, DenseActivation::tanh, {}, "w2");
  w1.bias.fill(0.0);
  w2.bias.fill(0.0);
  Tape<double> tape;
  const auto a = tape.constant(random_tensor(rng, {3, 3, 5}));
  const auto b = tape.constant(random_tensor(rng, {3, 3, 6}));
  const auto zero = pool_dot(tape, tape.constant(Tensor<double>({3, 3, 5})), b, w1, w2);
  CHECK(zero.value() == Tensor<double>({3, 3, 4}, 0.0));
  CHECK(pool_dot(tape, a, b, w1, w2).value() == pool_dot(tape, b, a, w2, w1).value());
  CHECK_THROWS_AS(pool_dot(tape, a, tape.constant(Tensor<double>({2, 2, 6})), w1, w2), ShapeError);
}

TEST_CASE("bilinear pooling") {
  Rng rng(2);
  Dense<double> w1(3, 2, DenseActivation::tanh, {}, "w1");
  Dense<double> w2(3, 2, DenseActivation::tanh, {}, "w2");
  Dense<double> w3(2, 2, DenseActivation::tanh, {}, "w3");
  w1.bias.fill(0.0);
  w2.bias.fill(0.0);
  w3.bias.fill(0.0);
  Tape<double> tape;
  const auto z = tape.constant(Tensor<double>({2, 2, 3}));
  CHECK(pool_bilinear(tape, z, z, w1, w2, w3).value() == Tensor<double>({2, 2, 2}, 0.0));
  const auto big = tape.constant(random_tensor(rng, {4, 4, 3}, -50, 50));
  for (double v : pool_bilinear(tape, big, big, w1, w2, w3).value().data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }

  Dense<double> u1(1, 1, DenseActivation::tanh, {}, "u1");
  Dense<double> u2(1, 1, DenseActivation::tanh, {}, "u2");
  Dense<double> u3(1, 1, DenseActivation::tanh, {}, "u3");
  for (auto* d : {&u1, &u2, &u3}) {
    d->weight.fill(1.0);
    d->bias.fill(0.0);
  }
  const auto half = tape.constant(Tensor<double>({1, 1, 1}, 0.5));
  const double v = pool_bilinear(tape, half, half, u1, u2, u3).value().item();
  const double t = std::tanh(0.5);
  CHECK(v == doctest::Approx(std::tanh(t * t)).epsilon(1e-15));
  CHECK(v == doctest::Approx(0.2094).epsilon(1e-3));
}

TEST_CASE("refinement normalization") {
  const PoolingConfig pc{PoolingMode::dot, 6, 5};
  AttentionModule<double> m(pc, 4, 7, true, {});
  Tape<double> tape;
  // Spatially constant pooled input -> uniform attention.
  Tensor<double> flat({5, 5, 6});
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = 0.1 * static_cast<double>(i % 6);
  const auto u = m.attend(tape, tape.constant(flat)).value();
  CHECK(u.shape() == Shape{5, 5, 1});
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 25.0).epsilon(1e-14));

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto a = m.attend(tape, tape.constant(random_tensor(rng, {5, 5, 6}, -3, 3))).value();
    CHECK(std::abs(map_sum(a) - 1.0) < 1e-12);
    for (double v : a.data()) CHECK(v > 0.0);
  }
  CHECK_THROWS_AS(m.attend(tape, tape.constant(Tensor<double>({5, 5, 5}))), ShapeError);

  // Shape law: output is M x M x 1 whatever C and K are.
  for (std::size_t c : {1, 3, 9}) {
    AttentionModule<double> mm({PoolingMode::dot, c, 2 * c + 1}, 4, 7, true, {});
    CHECK(mm.attend(tape, tape.constant(Tensor<double>({3, 3, c}, 0.2))).shape() ==
          Shape{3, 3, 1});
  }
}

TEST_CASE("float attention stays normalized within 1e-6") {
  AttentionModule<float> m({PoolingMode::dot, 8, 16}, 32, 56, true, {});
  Rng rng(4);
  Tape<float> tape;
  for (int i = 0; i < 20; ++i) {
    const auto pooled = m.pool(tape, tape.constant(random_tensor(rng, {8, 8, 32}).cast<float>()),
                               tape.constant(random_tensor(rng, {8, 8, 56}).cast<float>()));
    const auto a = m.attend(tape, pooled).value();
    double s = 0.0;
    for (float v : a.data()) {
      s += v;
      CHECK(v > 0.0f);
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("attention responds to both streams") {
  AttentionModule<double> m({PoolingMode::dot, 4, 5}, 3, 6, true, {});
  Rng rng(5);
  const auto frgb = random_tensor(rng, {4, 4, 3});
  const auto fg = random_tensor(rng, {4, 4, 6});
  Tape<double> tape;
  const auto vr = tape.variable(frgb);
  const auto vg = tape.variable(fg);
  const auto a = m.attend(tape, m.pool(tape, vr, vg));
  const auto g = tape.backward(dga::test::probe(tape, a));
  for (const auto* p : {&m.w_rgb.weight, &m.w_guidance.weight, &m.shared->weight}) {
    const auto* gp = g.find(*p);
    REQUIRE(gp != nullptr);
    CHECK(std::abs(gp->data()[0]) + std::abs(gp->data()[1]) > 0.0);
  }
  auto other = fg;
  other[0] += 0.5;
  Tape<double> t2;
  CHECK_FALSE(m.attend(t2, m.pool(t2, t2.constant(frgb), t2.constant(other))).value() ==
              a.value());
}

TEST_CASE("pooling and refinement gradients") {
  AttentionModule<double> dot({PoolingMode::dot, 3, 4}, 2, 3, true, {});
  AttentionModule<double> bil({PoolingMode::bilinear, 3, 4}, 2, 3, false, {});
  Rng rng(6);
  const double e1 = max_grad_error(
      [&](Tape<double>& t, const auto& v) {
        return dga::test::probe(t, dot.attend(t, dot.pool(t, v[0], v[1])));
      },
      {random_tensor(rng, {2, 2, 2}), random_tensor(rng, {2, 2, 3})});
  const double e2 = max_grad_error(
      [&](Tape<double>& t, const auto& v) { return dga::test::probe(t, bil.pool(t, v[0], v[1])); },
      {random_tensor(rng, {2, 2, 2}), random_tensor(rng, {2, 2, 3})});
  CHECK(e1 < 1e-6);
  CHECK(e2 < 1e-6);
  Tape<double> t3;
  CHECK_THROWS_AS(bil.attend(t3, t3.constant(Tensor<double>({2, 2, 3}))), ConfigError);
}

TEST_CASE("parameter counts and config") {
  const PoolingConfig pc{PoolingMode::dot, 64, 256};
  AttentionModule<float> m(pc, 512, 1472, true, {});
  std::vector<NamedParam<float>> ps;
  m.collect(ps);
  CHECK(count_params(ps) == AttentionModule<float>::count(pc, 512, 1472, true));
  CHECK(AttentionModule<float>::count(pc, 512, 1472, true) ==
        (512 * 64 + 64) + (1472 * 64 + 64) + (64 * 256 + 256) + (256 + 1));
  CHECK_THROWS_AS((PoolingConfig{PoolingMode::dot, 0, 4}.validate()), ConfigError);
  CHECK(parse_pooling_mode("bilinear") == PoolingMode::bilinear);
  CHECK_THROWS_AS(parse_pooling_mode("sum"), ConfigError);
}

}
