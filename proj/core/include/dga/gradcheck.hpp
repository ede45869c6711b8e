#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dga/model.hpp"

namespace dga {

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Central difference (f(x + eps) - f(x - eps)) / 2 eps along entry `index` of
// `x`; `x` is restored afterwards.
double central_difference(const std::function<double()>& f, Tensor<double>& x, std::size_t index,
                          double eps);

struct GradcheckConfig {
  double eps = 1e-5;
  // Seeded entries checked per parameter tensor, in addition to the entry
  // with the largest analytic gradient. 0 checks every entry.
  std::size_t entries_per_tensor = 6;
  std::uint64_t seed = 0;
  std::size_t num_classes = 5;
  std::vector<ModelVariant> variants{ModelVariant::proposed, ModelVariant::model_b,
                                     ModelVariant::model_a, ModelVariant::cross_modal,
                                     ModelVariant::baseline};
};

struct GradcheckEntry {
  ModelVariant variant;
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> worst;  // worst entry of every parameter tensor
  std::size_t entries_checked = 0;
  // Entries whose +-eps interval crosses a relu or max-pool switch; central
  // differences do not estimate a derivative there, so they are replaced.
  std::size_t entries_nonsmooth = 0;
  double max_rel_error = 0.0;
};

// Compares the analytic gradient of the total loss with central differences
// for every parameter tensor of each variant's toy configuration, at 64-bit.
// Each tensor contributes its largest-gradient smooth entry plus
// `entries_per_tensor` seeded smooth entries; a tensor without any smooth
// entry is reported with an infinite error.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace dga
