#include "dga/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dga/errors.hpp"
#include "dga/parallel.hpp"
#include "dga/train.hpp"

namespace dga {

EvalReport rank1(const LogitsFn& logits, std::size_t num_classes, const ProtocolSplit& split,
                 std::span<const RGBDSample> samples) {
  std::vector<std::size_t> wanted;
  for (const auto& p : split.probes) {
    for (std::size_t i : p.indices) {
      if (i >= samples.size()) throw DataError("probe index " + std::to_string(i) + " out of range");
      if (samples[i].identity >= num_classes) {
        throw ConfigError("probe identity " + std::to_string(samples[i].identity) +
                          " outside the model's " + std::to_string(num_classes) + " classes");
      }
      wanted.push_back(i);
    }
  }
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

  std::vector<std::size_t> predicted(samples.size(), 0);
  parallel_for(wanted.size(), [&](std::size_t k) {
    const Tensor<double> l = logits(samples[wanted[k]]);
    if (l.size() != num_classes) {
      throw ConfigError("model produces " + std::to_string(l.size()) + " logits, expected " +
                        std::to_string(num_classes));
    }
    predicted[wanted[k]] = argmax(l);
  });

  EvalReport report;
  report.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (const auto& p : split.probes) {
    ProbeResult r{p.name, 0, p.indices.size(), 0.0};
    for (std::size_t i : p.indices) {
      const std::size_t truth = samples[i].identity;
      if (predicted[i] == truth) ++r.correct;
      ++report.confusion[truth][predicted[i]];
    }
    r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    report.sets.push_back(r);
  }
  double sum = 0.0;
  for (const auto& r : report.sets) sum += r.accuracy;
  report.average = report.sets.empty() ? 0.0 : sum / static_cast<double>(report.sets.size());
  return report;
}

template <typename T>
Tensor<T> predict_logits(const Model<T>& model, const RGBDSample& sample) {
  Tape<T> tape;
  const auto out = model.forward(tape, sample.rgb.cast<T>(), sample.guidance.cast<T>(), Mode::eval);
  return out.logits.value();
}

template <typename T>
EvalReport rank1(const Model<T>& model, const ProtocolSplit& split,
                 std::span<const RGBDSample> samples) {
  return rank1([&](const RGBDSample& s) { return predict_logits(model, s).template cast<double>(); },
               model.config().num_classes, split, samples);
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "probe_set,correct,total,accuracy\n";
  char buf[128];
  std::size_t correct = 0, total = 0;
  for (const auto& r : report.sets) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.17g\n", r.probe_set.c_str(), r.correct, r.total,
                  r.accuracy);
    out += buf;
    correct += r.correct;
    total += r.total;
  }
  std::snprintf(buf, sizeof buf, "average,%zu,%zu,%.17g\n", correct, total, report.average);
  out += buf;
  return out;
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::trunc);
  f << eval_report_csv(report);
  if (!f) throw IoError("cannot write " + path.string());
}

template <typename T>
Image attention_image(const Tensor<T>& attention, std::size_t extent) {
  const Shape& s = attention.shape();
  if (s.size() < 2 || (s.size() == 3 && s[2] != 1) || s.size() > 3) {
    throw ShapeError("attention map must be M x M x 1, got " + to_string(s));
  }
  const std::size_t h = s[0], w = s[1];
  const auto data = attention.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  std::vector<std::uint16_t> px(h * w);
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (*hi == *lo) {
      px[i] = 128;
    } else {
      const double v = (static_cast<double>(data[i]) - static_cast<double>(*lo)) /
                       (static_cast<double>(*hi) - static_cast<double>(*lo));
      px[i] = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  if (extent == 0) return Image{w, h, 1, 255, std::move(px)};
  Image up{extent, extent, 1, 255, std::vector<std::uint16_t>(extent * extent)};
  for (std::size_t y = 0; y < extent; ++y)
    for (std::size_t x = 0; x < extent; ++x)
      up.samples[y * extent + x] = px[(y * h / extent) * w + (x * w / extent)];
  return up;
}

template <typename T>
Image export_attention(const Model<T>& model, const RGBDSample& sample,
                       const std::filesystem::path& path, bool upsample) {
  if (!model.config().has_attention()) {
    throw ConfigError("variant " + std::string(to_string(model.config().variant)) +
                      " has no attention map");
  }
  Tape<T> tape;
  const auto out =
      model.forward(tape, sample.rgb.cast<T>(), sample.guidance.cast<T>(), Mode::eval);
  Image img = attention_image(out.attention->value(),
                              upsample ? model.config().backbone.input_extent : 0);
  write_pnm(path, img);
  return img;
}

template <typename T>
void export_embeddings(const Model<T>& model, std::span<const RGBDSample> samples,
                       const std::filesystem::path& path) {
  std::vector<Tensor<T>> rows(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    Tape<T> tape;
    const auto out =
        model.forward(tape, samples[i].rgb.cast<T>(), samples[i].guidance.cast<T>(), Mode::eval);
    rows[i] = out.embedding.value();
  });
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "identity";
  const std::size_t width = rows.empty() ? 0 : rows.front().size();
  for (std::size_t j = 0; j < width; ++j) f << ",e" << j;
  f << '\n';
  char buf[40];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f << samples[i].identity;
    for (T v : rows[i].data()) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

#define DGA_EVAL_INSTANTIATE(T)                                                              \
  template EvalReport rank1(const Model<T>&, const ProtocolSplit&, std::span<const RGBDSample>); \
  template Tensor<T> predict_logits(const Model<T>&, const RGBDSample&);                        \
  template Image attention_image(const Tensor<T>&, std::size_t);                                \
  template Image export_attention(const Model<T>&, const RGBDSample&,                           \
                                  const std::filesystem::path&, bool);                          \
  template void export_embeddings(const Model<T>&, std::span<const RGBDSample>,                 \
                                  const std::filesystem::path&);
DGA_EVAL_INSTANTIATE(float)
DGA_EVAL_INSTANTIATE(double)
#undef DGA_EVAL_INSTANTIATE

}  // namespace dga
