#include "dga/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dga {
namespace {

template <typename T>
using Args = typename Tape<T>::BackwardArgs;

std::string shapes(const Shape& a, const Shape& b) { return to_string(a) + " and " + to_string(b); }

// Maps every flat index of `a` to the flat index of a trailing-axis broadcast `b`.
// Returns an empty vector when the shapes are identical.
std::vector<std::size_t> broadcast_index(const Shape& a, const Shape& b) {
  if (a == b) return {};
  if (b.size() > a.size()) throw ShapeError("cannot broadcast " + shapes(b, a));
  const std::size_t offset = a.size() - b.size();
  Shape bfull(a.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] != a[offset + i] && b[i] != 1) {
      throw ShapeError("elementwise shape mismatch: " + shapes(a, b));
    }
    bfull[offset + i] = b[i];
  }
  std::vector<std::size_t> bstride(a.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = a.size(); i-- > 0;) {
    bstride[i] = bfull[i] == 1 ? 0 : s;
    s *= bfull[i];
  }
  const std::size_t n = element_count(a);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(a.size(), 0);
  std::size_t boff = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = boff;
    for (std::size_t ax = a.size(); ax-- > 0;) {
      ++idx[ax];
      boff += bstride[ax];
      if (idx[ax] < a[ax]) break;
      boff -= bstride[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                     to_string(s));
  }
}

}  // namespace

template <typename T>
Var<T> elementwise(ElementwiseOp op, const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  auto map = broadcast_index(av.shape(), bv.shape());
  Tensor<T> out(av.shape());
  const std::size_t n = av.size();
  auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
  switch (op) {
    case ElementwiseOp::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[bi(i)];
      break;
    case ElementwiseOp::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[bi(i)];
      break;
    case ElementwiseOp::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[bi(i)];
      break;
  }
  return a.tape().record(std::move(out), {a, b}, [op, map = std::move(map)](const Args<T>& g) {
    auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
    const Tensor<T>& go = g.grad_out;
    const std::size_t n = go.size();
    Tensor<T>* ga = g.input_grads[0];
    Tensor<T>* gb = g.input_grads[1];
    if (op == ElementwiseOp::mul) {
      const Tensor<T>& av = g.input(0);
      const Tensor<T>& bv = g.input(1);
      if (ga)
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += go[i] * bv[bi(i)];
      if (gb)
        for (std::size_t i = 0; i < n; ++i) (*gb)[bi(i)] += go[i] * av[i];
      return;
    }
    const T sign = op == ElementwiseOp::sub ? T{-1} : T{1};
    if (ga)
      for (std::size_t i = 0; i < n; ++i) (*ga)[i] += go[i];
    if (gb)
      for (std::size_t i = 0; i < n; ++i) (*gb)[bi(i)] += sign * go[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (T& v : out.data()) v *= factor;
  return a.tape().record(std::move(out), {a}, [factor](const Args<T>& g) {
    Tensor<T>& ga = *g.input_grads[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g.grad_out[i];
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0)) {
    throw ShapeError("matmul shape mismatch: " + shapes(av.shape(), bv.shape()));
  }
  const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
  Tensor<T> out(Shape{m, n});
  const T* A = av.data().data();
  const T* B = bv.data().data();
  T* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = A[i * k + p];
      if (aip == T{0}) continue;
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return a.tape().record(std::move(out), {a, b}, [m, k, n](const Args<T>& g) {
    const T* G = g.grad_out.data().data();
    const T* A = g.input(0).data().data();
    const T* B = g.input(1).data().data();
    if (Tensor<T>* ga = g.input_grads[0]) {
      T* dA = ga->data().data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = B + p * n;
          T acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (Tensor<T>* gb = g.input_grads[1]) {
      T* dB = gb->data().data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = A[i * k + p];
          if (aip == T{0}) continue;
          T* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernels, const Var<T>& bias) {
  const Tensor<T>& x = input.value();
  const Tensor<T>& kv = kernels.value();
  const Tensor<T>& bv = bias.value();
  require_rank(x.shape(), 3, "conv2d input");
  require_rank(kv.shape(), 4, "conv2d kernels");
  const std::size_t H = x.extent(0), W = x.extent(1), Ci = x.extent(2);
  const std::size_t kh = kv.extent(0), kw = kv.extent(1), Co = kv.extent(3);
  if (kv.extent(2) != Ci) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(x.shape()) + " vs kernels " +
                     to_string(kv.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("conv2d kernel extents must be odd, got " + to_string(kv.shape()));
  }
  if (bv.size() != Co) {
    throw ShapeError("conv2d bias " + to_string(bv.shape()) + " does not match " +
                     std::to_string(Co) + " output channels");
  }
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);

  Tensor<T> out(Shape{H, W, Co});
  const T* in = x.data().data();
  const T* K = kv.data().data();
  const T* B = bv.data().data();
  T* O = out.data().data();
  for (std::ptrdiff_t y = 0; y < sH; ++y) {
    for (std::ptrdiff_t xx = 0; xx < sW; ++xx) {
      T* orow = O + (y * sW + xx) * Co;
      std::copy(B, B + Co, orow);
      for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(kh); ++ky) {
        const std::ptrdiff_t iy = y + ky - ph;
        if (iy < 0 || iy >= sH) continue;
        for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(kw); ++kx) {
          const std::ptrdiff_t ix = xx + kx - pw;
          if (ix < 0 || ix >= sW) continue;
          const T* px = in + (iy * sW + ix) * Ci;
          const T* kbase = K + (ky * static_cast<std::ptrdiff_t>(kw) + kx) * Ci * Co;
          for (std::size_t c = 0; c < Ci; ++c) {
            const T v = px[c];
            const T* krow = kbase + c * Co;
            for (std::size_t o = 0; o < Co; ++o) orow[o] += v * krow[o];
          }
        }
      }
    }
  }

  return input.tape().record(
      std::move(out), {input, kernels, bias}, [=](const Args<T>& g) {
        const T* G = g.grad_out.data().data();
        const T* in = g.input(0).data().data();
        const T* K = g.input(1).data().data();
        T* dIn = g.input_grads[0] ? g.input_grads[0]->data().data() : nullptr;
        T* dK = g.input_grads[1] ? g.input_grads[1]->data().data() : nullptr;
        T* dB = g.input_grads[2] ? g.input_grads[2]->data().data() : nullptr;
        for (std::ptrdiff_t y = 0; y < sH; ++y) {
          for (std::ptrdiff_t xx = 0; xx < sW; ++xx) {
            const T* grow = G + (y * sW + xx) * Co;
            if (dB)
              for (std::size_t o = 0; o < Co; ++o) dB[o] += grow[o];
            if (!dIn && !dK) continue;
            for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(kh); ++ky) {
              const std::ptrdiff_t iy = y + ky - ph;
              if (iy < 0 || iy >= sH) continue;
              for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(kw); ++kx) {
                const std::ptrdiff_t ix = xx + kx - pw;
                if (ix < 0 || ix >= sW) continue;
                const std::ptrdiff_t poff = (iy * sW + ix) * static_cast<std::ptrdiff_t>(Ci);
                const std::ptrdiff_t koff =
                    (ky * static_cast<std::ptrdiff_t>(kw) + kx) * static_cast<std::ptrdiff_t>(Ci * Co);
                for (std::size_t c = 0; c < Ci; ++c) {
                  const std::ptrdiff_t kr = koff + static_cast<std::ptrdiff_t>(c * Co);
                  if (dK) {
                    const T v = in[poff + static_cast<std::ptrdiff_t>(c)];
                    T* dkrow = dK + kr;
                    for (std::size_t o = 0; o < Co; ++o) dkrow[o] += v * grow[o];
                  }
                  if (dIn) {
                    const T* krow = K + kr;
                    T acc{0};
                    for (std::size_t o = 0; o < Co; ++o) acc += krow[o] * grow[o];
                    dIn[poff + static_cast<std::ptrdiff_t>(c)] += acc;
                  }
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> maxpool2d(const Var<T>& input, std::size_t k) {
  const Tensor<T>& x = input.value();
  require_rank(x.shape(), 3, "maxpool2d");
  const std::size_t H = x.extent(0), W = x.extent(1), C = x.extent(2);
  if (k == 0 || H % k != 0 || W % k != 0) {
    throw ShapeError("maxpool2d window " + std::to_string(k) + " does not divide extent " +
                     to_string(x.shape()));
  }
  const std::size_t oh = H / k, ow = W / k;
  Tensor<T> out(Shape{oh, ow, C});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t xx = 0; xx < ow; ++xx) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = ((y * k) * W + xx * k) * C + c;
        T bestv = x[best];
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t i = ((y * k + dy) * W + xx * k + dx) * C + c;
            if (x[i] > bestv) {
              bestv = x[i];
              best = i;
            }
          }
        }
        const std::size_t o = (y * ow + xx) * C + c;
        out[o] = bestv;
        argmax[o] = best;
      }
    }
  }
  if (input.tape().tracking_branches())
    for (std::size_t a : argmax) input.tape().note_branch(a);
  return input.tape().record(std::move(out), {input},
                             [argmax = std::move(argmax)](const Args<T>& g) {
                               Tensor<T>& gi = *g.input_grads[0];
                               for (std::size_t o = 0; o < argmax.size(); ++o)
                                 gi[argmax[o]] += g.grad_out[o];
                             });
}

template <typename T>
Var<T> avgpool2d(const Var<T>& input, std::size_t window) {
  const Tensor<T>& x = input.value();
  require_rank(x.shape(), 3, "avgpool2d");
  const std::size_t H = x.extent(0), W = x.extent(1), C = x.extent(2);
  if (window == 0 || H % window != 0 || W % window != 0) {
    throw ShapeError("avgpool2d window " + std::to_string(window) + " does not divide extent " +
                     to_string(x.shape()));
  }
  if (window == 1) return input;
  const std::size_t oh = H / window, ow = W / window;
  const T inv = T{1} / static_cast<T>(window * window);
  Tensor<T> out(Shape{oh, ow, C});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t xx = 0; xx < W; ++xx) {
      const T* px = &x[(y * W + xx) * C];
      T* po = &out[((y / window) * ow + xx / window) * C];
      for (std::size_t c = 0; c < C; ++c) po[c] += px[c];
    }
  for (T& v : out.data()) v *= inv;
  return input.tape().record(std::move(out), {input}, [=](const Args<T>& g) {
    Tensor<T>& gi = *g.input_grads[0];
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) {
        const T* go = &g.grad_out[((y / window) * ow + xx / window) * C];
        T* pg = &gi[(y * W + xx) * C];
        for (std::size_t c = 0; c < C; ++c) pg[c] += go[c] * inv;
      }
  });
}

template <typename T>
Var<T> activation(ActivationKind kind, const Var<T>& x, int axis) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  const std::size_t n = xv.size();
  switch (kind) {
    case ActivationKind::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
      if (x.tape().tracking_branches())
        for (std::size_t i = 0; i < n; ++i) x.tape().note_branch(xv[i] > T{0} ? i : ~i);
      return x.tape().record(std::move(out), {x}, [](const Args<T>& g) {
        Tensor<T>& gi = *g.input_grads[0];
        const Tensor<T>& xin = g.input(0);
        for (std::size_t i = 0; i < gi.size(); ++i)
          if (xin[i] > T{0}) gi[i] += g.grad_out[i];
      });
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(xv[i]);
      return x.tape().record(std::move(out), {x}, [](const Args<T>& g) {
        Tensor<T>& gi = *g.input_grads[0];
        for (std::size_t i = 0; i < gi.size(); ++i)
          gi[i] += g.grad_out[i] * (T{1} - g.out[i] * g.out[i]);
      });
    case ActivationKind::softmax:
      break;
  }

  const auto rank = static_cast<int>(xv.rank());
  const int ax = axis < 0 ? axis + rank : axis;
  if (rank == 0 || ax < 0 || ax >= rank) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for shape " +
                     to_string(xv.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= xv.extent(static_cast<std::size_t>(i));
  for (int i = ax + 1; i < rank; ++i) inner *= xv.extent(static_cast<std::size_t>(i));
  const std::size_t len = xv.extent(static_cast<std::size_t>(ax));
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total{0};
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  return x.tape().record(std::move(out), {x}, [=](const Args<T>& g) {
    Tensor<T>& gi = *g.input_grads[0];
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        T dot{0};
        for (std::size_t j = 0; j < len; ++j)
          dot += g.grad_out[base + j * inner] * g.out[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = base + j * inner;
          gi[i] += g.out[i] * (g.grad_out[i] - dot);
        }
      }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  return x.tape().record(Tensor<T>::scalar(total), {x}, [](const Args<T>& g) {
    Tensor<T>& gi = *g.input_grads[0];
    const T go = g.grad_out[0];
    for (T& v : gi.data()) v += go;
  });
}

template <typename T>
Var<T> spatial_sum(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 3, "spatial_sum");
  const std::size_t P = xv.extent(0) * xv.extent(1), C = xv.extent(2);
  Tensor<T> out(Shape{C});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t c = 0; c < C; ++c) out[c] += xv[p * C + c];
  return x.tape().record(std::move(out), {x}, [P, C](const Args<T>& g) {
    Tensor<T>& gi = *g.input_grads[0];
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t c = 0; c < C; ++c) gi[p * C + c] += g.grad_out[c];
  });
}

template <typename T>
Var<T> spatial_mean(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 3, "spatial_mean");
  return scale(spatial_sum(x), T{1} / static_cast<T>(xv.extent(0) * xv.extent(1)));
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [](const Args<T>& g) {
    Tensor<T>& gi = *g.input_grads[0];
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g.grad_out[i];
  });
}

template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_last of zero tensors");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw ShapeError("concat_last of rank-0 tensors");
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw ShapeError("concat_last leading extents differ: " + shapes(first, s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = element_count(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor<T> out(out_shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&pv[r * widths[k]], widths[k], &out[r * total + off]);
    off += widths[k];
  }
  return parts.front().tape().record(std::move(out), parts, [=](const Args<T>& g) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (Tensor<T>* gk = g.input_grads[k]) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c)
            (*gk)[r * widths[k] + c] += g.grad_out[r * total + off + c];
      }
      off += widths[k];
    }
  });
}

template <typename T>
Var<T> pick(const Var<T>& x, std::size_t index) {
  const Tensor<T>& xv = x.value();
  if (index >= xv.size()) {
    throw ShapeError("pick index " + std::to_string(index) + " out of range for " +
                     to_string(xv.shape()));
  }
  return x.tape().record(Tensor<T>::scalar(xv[index]), {x}, [index](const Args<T>& g) {
    (*g.input_grads[0])[index] += g.grad_out[0];
  });
}

template <typename T>
Tensor<T> softmax_values(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : logits.data()) mx = std::max(mx, v);
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (T& v : out.data()) v /= total;
  return out;
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::size_t label) {
  const Tensor<T>& z = logits.value();
  if (label >= z.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(z.size()) + " classes");
  }
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : z.data()) mx = std::max(mx, v);
  T total{0};
  for (T v : z.data()) total += std::exp(v - mx);
  const T loss = mx + std::log(total) - z[label];
  return logits.tape().record(Tensor<T>::scalar(loss), {logits}, [label](const Args<T>& g) {
    Tensor<T> p = softmax_values(g.input(0));
    Tensor<T>& gi = *g.input_grads[0];
    const T go = g.grad_out[0];
    for (std::size_t i = 0; i < gi.size(); ++i)
      gi[i] += go * (p[i] - (i == label ? T{1} : T{0}));
  });
}

#define DGA_INSTANTIATE_OPS(T)                                                   \
  template Var<T> elementwise(ElementwiseOp, const Var<T>&, const Var<T>&);      \
  template Var<T> scale(const Var<T>&, T);                                       \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                          \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&);           \
  template Var<T> maxpool2d(const Var<T>&, std::size_t);                         \
  template Var<T> avgpool2d(const Var<T>&, std::size_t);                         \
  template Var<T> activation(ActivationKind, const Var<T>&, int);                \
  template Var<T> sum(const Var<T>&);                                            \
  template Var<T> spatial_sum(const Var<T>&);                                    \
  template Var<T> spatial_mean(const Var<T>&);                                   \
  template Var<T> reshape(const Var<T>&, Shape);                                 \
  template Var<T> concat_last(const std::vector<Var<T>>&);                       \
  template Var<T> pick(const Var<T>&, std::size_t);                              \
  template Var<T> cross_entropy(const Var<T>&, std::size_t);                     \
  template Tensor<T> softmax_values(const Tensor<T>&);

DGA_INSTANTIATE_OPS(float)
DGA_INSTANTIATE_OPS(double)

#undef DGA_INSTANTIATE_OPS

}  // namespace dga
