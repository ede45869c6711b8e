#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "dga/autodiff.hpp"
#include "dga/gradcheck.hpp"
#include "dga/ops.hpp"
#include "dga/random.hpp"
#include "dga/tensor.hpp"

namespace dga::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dga_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

inline Tensor<double> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Largest relative error between taped gradients and central differences of
// `f` over every entry of every input.
inline double max_grad_error(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                             double eps = 1e-5) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  const GradStore<double> grads = tape.backward(f(tape, vars));

  auto evaluate = [&] {
    Tape<double> t;
    std::vector<Var<double>> vs;
    for (const auto& x : inputs) vs.push_back(t.constant(x));
    return f(t, vs).value().item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double>& g = grads[vars[k]];
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double numeric = central_difference(evaluate, inputs[k], i, eps);
      worst = std::max(worst, relative_error(g[i], numeric));
    }
  }
  return worst;
}

// Scalar probe of a tensor output: sum(out * w) with fixed random weights.
inline Var<double> probe(Tape<double>& tape, const Var<double>& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, tape.constant(random_tensor(rng, out.shape()))));
}

}  // namespace dga::test
