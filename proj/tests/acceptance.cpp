// Acceptance checks: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dga/ablate.hpp"
#include "dga/checkpoint.hpp"
#include "dga/dataset.hpp"
#include "dga/eval.hpp"
#include "dga/gradcam.hpp"
#include "dga/gradcheck.hpp"
#include "dga/image_io.hpp"
#include "dga/model.hpp"
#include "dga/protocol.hpp"
#include "dga/synth.hpp"
#include "dga/train.hpp"
#include "support.hpp"

using namespace dga;
using dga::test::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

// Dataset of criterion 6, shared with criterion 9.
struct Trained {
  SynthConfig synth;
  Dataset data;
  std::optional<Model<float>> model;
  std::vector<EpochMetrics> history;
};
Trained g_trained;

TrainConfig toy_train_config() {
  TrainConfig tc;
  tc.lr0 = 3e-3;
  tc.batch_size = 5;
  tc.epochs = 50;
  tc.seed = 0;
  return tc;
}

Outcome c1_shapes() {
  const auto s = infer_shapes(ModelConfig::full_scale(509));
  const bool ok = s.f_rgb == Shape{7, 7, 512} && s.f_guidance == Shape{7, 7, 1472} &&
                  s.pooled == Shape{7, 7, 64} && s.attention == Shape{7, 7, 1};
  return {ok, "F_rgb " + shape_text(s.f_rgb) + ", F_d " + shape_text(s.f_guidance) +
                  ", pooled " + shape_text(s.pooled) + ", attention " +
                  shape_text(s.attention)};
}

Outcome c2_params() {
  const std::size_t n = count_model_params(ModelConfig::full_scale(509));
  return {n >= 128'000'000 && n <= 136'000'000, fmt("%zu parameters", n)};
}

Outcome c3_gradcheck() {
  GradcheckConfig cfg;
  cfg.entries_per_tensor = 64;
  const auto r = run_gradcheck(cfg);
  return {r.max_rel_error < 1e-4,
          fmt("max rel error %.3g over %zu entries in %zu tensors (%zu non-smooth replaced)",
              r.max_rel_error, r.entries_checked, r.worst.size(), r.entries_nonsmooth)};
}

Outcome c4_attention() {
  const Model<float> model(ModelConfig::toy(5), InitSpec{.seed = 4});
  Rng rng(123);
  double worst = 0.0;
  float min_weight = 1.0f;
  for (int i = 0; i < 1000; ++i) {
    Tensor<float> rgb({64, 64, 3}), g({64, 64, 1});
    for (float& v : rgb.data()) v = static_cast<float>(rng.uniform());
    for (float& v : g.data()) v = static_cast<float>(rng.uniform());
    Tape<float> tape;
    const auto out = model.forward(tape, rgb, g, Mode::eval);
    double sum = 0.0;
    for (float v : out.attention->value().data()) {
      sum += v;
      min_weight = std::min(min_weight, v);
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {worst <= 1e-6 && min_weight > 0.0f,
          fmt("max |sum - 1| %.3g, min weight %.3g", worst, static_cast<double>(min_weight))};
}

Outcome c5_loss() {
  const Model<double> model(ModelConfig::toy(6), InitSpec{.seed = 8});
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Tape<double> tape;
    const auto out = model.forward(tape, dga::test::random_tensor(rng, {64, 64, 3}, 0, 1),
                                   dga::test::random_tensor(rng, {64, 64, 1}, 0, 1), Mode::train);
    const std::size_t label = static_cast<std::size_t>(i) % 6;
    const auto terms = loss_total(out, label, true);
    if (!terms.rgb || !terms.guidance) return {false, "auxiliary losses missing"};
    const double total = terms.total.value()[0];
    const double parts = loss_identity(*out.aux_rgb_logits, label).value()[0] +
                         loss_identity(*out.aux_guidance_logits, label).value()[0] +
                         loss_attention(out.logits, label).value()[0];
    worst = std::max(worst, std::abs(total - parts));
  }
  return {worst < 1e-9, fmt("max |L_total - parts| %.3g over 20 samples", worst)};
}

Outcome c6_convergence(const std::filesystem::path& dir) {
  auto& t = g_trained;
  t.synth.ids = 10;
  t.synth.per_id = 20;
  t.synth.seed = 7;
  synth_generate(t.synth, dir / "c6");
  t.data = load_manifest(dir / "c6" / "manifest.tsv");

  const TrainConfig tc = toy_train_config();
  t.model.emplace(ModelConfig::toy(t.data.num_classes()), InitSpec{.seed = 0});
  t.history = train(*t.model, std::span<const RGBDSample>(t.data.samples), tc);
  double best = 0.0;
  std::optional<std::size_t> first;
  for (const auto& m : t.history) {
    if (m.train_acc > best) best = m.train_acc;
    if (!first && m.train_acc >= 0.95) first = m.epoch + 1;
  }

  Model<float> again(ModelConfig::toy(t.data.num_classes()), InitSpec{.seed = 0});
  const auto rerun = train(again, std::span<const RGBDSample>(t.data.samples), tc);
  const bool same = metrics_csv(rerun) == metrics_csv(t.history);

  return {best >= 0.95 && same,
          fmt("best train acc %.3f, %s, rerun trace %s", best,
              first ? ("0.95 reached in epoch " + std::to_string(*first)).c_str()
                    : "0.95 never reached",
              same ? "identical" : "differs")};
}

Outcome c7_ablation(const std::filesystem::path& dir) {
  SynthConfig sc;
  sc.ids = 10;
  sc.per_id = 20;
  sc.seed = 7;
  sc.mix = parse_variation_mix("neutral:8,pose:6,occlusion:6");
  synth_generate(sc, dir / "c7");
  const Dataset ds = load_manifest(dir / "c7" / "manifest.tsv");
  const auto split = split_protocol(ds.manifest.entries, {});

  AblationConfig ac;
  ac.base = ModelConfig::toy(ds.num_classes());
  ac.train.lr0 = 3e-3;
  ac.train.batch_size = 5;
  ac.train.epochs = 40;
  ac.seeds = {0, 1, 2, 3, 4};
  std::size_t inversions = 0;
  std::vector<double> per_seed[3];
  const auto result = ablate(ac, std::span<const RGBDSample>(ds.samples), split,
                             [&](const AblationRun& run) {
                               const auto& v = ac.variants;
                               const auto at = std::find(v.begin(), v.end(), run.variant) - v.begin();
                               per_seed[at].push_back(run.report.average);
                             });
  for (std::size_t s = 0; s < ac.seeds.size(); ++s) {
    if (per_seed[2][s] < per_seed[1][s] || per_seed[1][s] < per_seed[0][s] - 0.02) {
      ++inversions;
      std::printf("  note: seed %zu ordering inverted (proposed %.3f, model_a %.3f, baseline %.3f)\n",
                  s, per_seed[2][s], per_seed[1][s], per_seed[0][s]);
    }
  }
  double mean[3] = {0, 0, 0};
  for (const auto& row : result.rows) {
    if (row.probe_set != "average") continue;
    if (row.variant == ModelVariant::baseline) mean[0] = row.mean_acc;
    if (row.variant == ModelVariant::model_a) mean[1] = row.mean_acc;
    if (row.variant == ModelVariant::proposed) mean[2] = row.mean_acc;
  }
  return {mean[2] >= mean[1] && mean[1] >= mean[0] - 0.02,
          fmt("mean probe acc proposed %.3f, model_a %.3f, baseline %.3f (%zu single-seed "
              "inversions)",
              mean[2], mean[1], mean[0], inversions)};
}

Outcome c8_thermal(const std::filesystem::path& dir) {
  SynthConfig sc;
  sc.ids = 4;
  sc.per_id = 6;
  sc.seed = 3;
  sc.guidance = GuidanceKind::thermal;
  synth_generate(sc, dir / "c8");
  const Dataset ds = load_manifest(dir / "c8" / "manifest.tsv");
  if (ds.manifest.planes) return {false, "thermal manifest carries depth planes"};

  Model<float> model(ModelConfig::toy(ds.num_classes()), InitSpec{.seed = 1});
  TrainConfig tc = toy_train_config();
  tc.epochs = 5;
  tc.batch_size = 6;
  const auto history = train(model, std::span<const RGBDSample>(ds.samples), tc);
  bool finite = true;
  for (const auto& m : history) finite = finite && std::isfinite(m.loss_total);
  const auto split = split_protocol(ds.manifest.entries, {});
  const auto report = rank1(model, split, std::span<const RGBDSample>(ds.samples));
  return {finite && history.size() == 5 && std::isfinite(report.average),
          fmt("%zu epochs, final loss %.4f, probe average %.3f", history.size(),
              history.back().loss_total, report.average)};
}

Outcome c9_gradcam() {
  const auto& t = g_trained;
  if (!t.model) return {false, "criterion 6 model unavailable"};
  const std::size_t extent = t.synth.extent;
  std::size_t inside = 0, probes = 0;
  for (std::size_t k = 0; k < t.data.samples.size() && probes < 50; k += 4, ++probes) {
    const auto& sample = t.data.samples[k];
    const auto map = grad_cam(*t.model, sample, sample.identity);
    const std::size_t m = map.shape()[0];
    const std::size_t cell = argmax(map);
    const std::size_t f = extent / m;
    const std::size_t py = (cell / m) * f + f / 2, px = (cell % m) * f + f / 2;
    const auto rendered = render_synthetic(t.synth, k / t.synth.per_id, k % t.synth.per_id);
    if (rendered.face_mask[py * extent + px]) ++inside;
  }
  const double share = static_cast<double>(inside) / static_cast<double>(probes);
  return {probes == 50 && share >= 0.8,
          fmt("heatmap maximum inside the face for %zu of %zu probes", inside, probes)};
}

Outcome c10_round_trips(const std::filesystem::path& dir) {
  const Model<float> model(ModelConfig::toy(7), InitSpec{.seed = 11});
  write_checkpoint(dir / "m.ckpt", model);
  const auto loaded = read_checkpoint<float>(dir / "m.ckpt");
  const auto a = model.parameters();
  const auto b = loaded.parameters();
  bool params_ok = a.size() == b.size();
  for (std::size_t i = 0; params_ok && i < a.size(); ++i) {
    const auto x = a[i].tensor->data(), y = b[i].tensor->data();
    params_ok = a[i].name == b[i].name && a[i].tensor->shape() == b[i].tensor->shape() &&
                std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
  }

  SynthConfig sc;
  sc.ids = 3;
  sc.per_id = 6;
  sc.seed = 21;
  synth_generate(sc, dir / "c10");
  const Dataset ds = load_manifest(dir / "c10" / "manifest.tsv");
  bool rasters_ok = ds.samples.size() == sc.ids * sc.per_id;
  for (std::size_t k = 0; rasters_ok && k < ds.samples.size(); ++k) {
    const auto s = render_synthetic(sc, k / sc.per_id, k % sc.per_id);
    const auto& e = ds.manifest.entries[k];
    rasters_ok = read_pnm(ds.manifest.root / e.rgb_path) == s.rgb &&
                 read_pnm(ds.manifest.root / e.guidance_path) == s.guidance &&
                 ds.samples[k].rgb.data().size() == s.rgb.samples.size();
    const auto expect = normalize_depth(s.guidance, kSynthDepthPlanes);
    const auto got = ds.samples[k].guidance.data(), want = expect.data();
    rasters_ok = rasters_ok && std::memcmp(got.data(), want.data(), got.size_bytes()) == 0;
  }
  return {params_ok && rasters_ok,
          fmt("%zu parameter tensors %s, %zu samples %s", a.size(),
              params_ok ? "bit-exact" : "differ", ds.samples.size(),
              rasters_ok ? "byte-exact" : "differ")};
}

}  // namespace

int main() {
  TempDir dir;
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "full-scale shapes", 1, c1_shapes},
      {2, "full-scale parameter count", 1, c2_params},
      {3, "gradient check", 300, c3_gradcheck},
      {4, "attention normalization", 30, c4_attention},
      {5, "loss decomposition", 10, c5_loss},
      {6, "toy convergence", 300, [&] { return c6_convergence(dir.path()); }},
      {7, "ablation ordering", 1800, [&] { return c7_ablation(dir.path()); }},
      {8, "thermal guidance", 300, [&] { return c8_thermal(dir.path()); }},
      {9, "grad-cam in face region", 120, c9_gradcam},
      {10, "round trips", 60, [&] { return c10_round_trips(dir.path()); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; exceeded %.0f s limit", c.limit_s);
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s: %s (%s) [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed ? 1 : 0;
}
