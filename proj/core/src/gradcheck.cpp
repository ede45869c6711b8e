#include "dga/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dga/errors.hpp"
#include "dga/random.hpp"

namespace dga {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

double central_difference(const std::function<double()>& f, Tensor<double>& x, std::size_t index,
                          double eps) {
  const double saved = x[index];
  x[index] = saved + eps;
  const double up = f();
  x[index] = saved - eps;
  const double down = f();
  x[index] = saved;
  return (up - down) / (2.0 * eps);
}

namespace {

Tensor<double> random_raster(Rng& rng, Shape shape) {
  Tensor<double> t(std::move(shape), 0.0);
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

void check_variant(ModelVariant variant, const GradcheckConfig& cfg, GradcheckReport& report) {
  ModelConfig mc = ModelConfig::toy(cfg.num_classes, variant);
  InitSpec init;
  init.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(variant));
  Model<double> model(mc, init);

  Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(variant)));
  const std::size_t h = mc.backbone.input_extent;
  const Tensor<double> rgb = random_raster(rng, {h, h, mc.backbone.rgb_channels});
  const Tensor<double> guidance = random_raster(rng, {h, h, 1});
  const std::size_t label = rng.below(cfg.num_classes);

  struct Probe {
    double loss;
    std::uint64_t signature;
  };
  auto evaluate = [&] {
    Tape<double> tape;
    tape.track_branches(true);
    const auto out = model.forward(tape, rgb, guidance, Mode::train);
    const double loss = loss_total(out, label, mc.modality_loss).total.value().item();
    return Probe{loss, tape.branch_signature()};
  };
  const std::uint64_t base_signature = evaluate().signature;

  Tape<double> tape;
  const auto out = model.forward(tape, rgb, guidance, Mode::train);
  const GradStore<double> grads = tape.backward(loss_total(out, label, mc.modality_loss).total);

  for (auto& p : model.parameters()) {
    const Tensor<double>* g = grads.find(*p.tensor);
    if (!g) throw AutodiffError("parameter " + p.name + " received no gradient");
    Tensor<double>& x = *p.tensor;
    const std::size_t n = x.size();

    // Smooth entry check: nullopt when the interval crosses a switch.
    auto check = [&](std::size_t i) -> std::optional<GradcheckEntry> {
      const double saved = x[i];
      x[i] = saved + cfg.eps;
      const Probe up = evaluate();
      x[i] = saved - cfg.eps;
      const Probe down = evaluate();
      x[i] = saved;
      if (up.signature != base_signature || down.signature != base_signature) {
        ++report.entries_nonsmooth;
        return std::nullopt;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * cfg.eps);
      ++report.entries_checked;
      return GradcheckEntry{variant, p.name, i, (*g)[i], numeric,
                            relative_error((*g)[i], numeric)};
    };

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto gd = g->data();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(gd[a]) > std::abs(gd[b]);
    });

    std::vector<GradcheckEntry> results;
    const bool exhaustive = cfg.entries_per_tensor == 0 || cfg.entries_per_tensor >= n;
    if (exhaustive) {
      for (std::size_t i = 0; i < n; ++i)
        if (auto r = check(i)) results.push_back(*r);
    } else {
      // Largest gradient first, falling back to the next largest.
      for (std::size_t k = 0; k < std::min<std::size_t>(n, 8); ++k) {
        if (auto r = check(order[k])) {
          results.push_back(*r);
          break;
        }
      }
      std::size_t attempts = 0;
      std::size_t found = 0;
      while (found < cfg.entries_per_tensor && attempts < 4 * cfg.entries_per_tensor) {
        ++attempts;
        if (auto r = check(rng.below(n))) {
          results.push_back(*r);
          ++found;
        }
      }
    }

    GradcheckEntry worst{variant, p.name, 0, 0.0, 0.0, 0.0};
    if (results.empty()) {
      worst.rel_error = std::numeric_limits<double>::infinity();
    } else {
      worst = *std::max_element(results.begin(), results.end(),
                                [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
    }
    report.max_rel_error = std::max(report.max_rel_error, worst.rel_error);
    report.worst.push_back(worst);
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw ConfigError("gradcheck eps must be positive");
  GradcheckReport report;
  for (ModelVariant v : cfg.variants) check_variant(v, cfg, report);
  return report;
}

}  // namespace dga
