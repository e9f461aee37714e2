#include "taillight/autodiff/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gemm.hpp"

namespace taillight {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

const char* precision_name(Precision p) { return p == Precision::kTrain ? "train" : "test"; }

Precision parse_precision(const std::string& name) {
  if (name == "train" || name == "float" || name == "f32") return Precision::kTrain;
  if (name == "test" || name == "double" || name == "f64") return Precision::kTest;
  throw ConfigError("unknown precision '" + name + "' (expected train or test)");
}

namespace {

std::atomic<bool> g_finite_check{false};
std::atomic<bool> g_kink_tracking{false};
std::atomic<std::uint64_t> g_kink_signature{0};

template <typename T>
using Buffer = std::vector<T>;
template <typename T>
using BufferPtr = std::shared_ptr<Buffer<T>>;
template <typename T>
using Grads = std::span<std::vector<T>* const>;

template <typename T>
void check_finite(const char* op, const Buffer<T>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string("non-finite value produced by ") + op + " at flat index " +
                         std::to_string(i));
    }
  }
}

template <typename T, typename MakeBackward>
Tensor<T> emit(const char* op, Shape shape, BufferPtr<T> values, std::span<const Tensor<T>* const> inputs,
               MakeBackward&& make_backward) {
  if (g_finite_check.load(std::memory_order_relaxed)) check_finite(op, *values);
  Tape<T>* tape = nullptr;
  for (const auto* in : inputs) {
    if (in->attached()) {
      tape = in->tape();
      break;
    }
  }
  std::shared_ptr<const Buffer<T>> frozen = std::move(values);
  if (tape == nullptr) return Tensor<T>(std::move(shape), std::move(frozen));
  return tape->record(std::move(shape), frozen, inputs, make_backward(frozen));
}

template <typename T, typename MakeBackward>
Tensor<T> emit(const char* op, Shape shape, BufferPtr<T> values, std::initializer_list<const Tensor<T>*> inputs,
               MakeBackward&& make_backward) {
  return emit<T>(op, std::move(shape), std::move(values),
                 std::span<const Tensor<T>* const>(inputs.begin(), inputs.size()),
                 std::forward<MakeBackward>(make_backward));
}

template <typename T>
void require_defined(const Tensor<T>& x, const char* op) {
  if (!x.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
  return strides;
}

// Strides of `src` expressed in the index space of `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& src, const Shape& out) {
  const auto src_strides = contiguous_strides(src);
  std::vector<std::size_t> strides(out.size(), 0);
  const std::size_t offset = out.size() - src.size();
  for (std::size_t d = 0; d < src.size(); ++d) {
    strides[offset + d] = src[d] == 1 ? 0 : src_strides[d];
  }
  return strides;
}

// Calls f(out_flat, a_flat, b_flat) for every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  const std::size_t rank = out.size();
  const std::size_t n = numel(out);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  const char* name = kind == BinaryKind::kAdd ? "add" : kind == BinaryKind::kSub ? "sub" : "mul";
  require_defined(a, name);
  require_defined(b, name);
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto n = numel(out_shape);
  auto out = std::make_shared<Buffer<T>>(n);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out->data();
  const bool same = a.shape() == b.shape();
  auto sa = same ? std::vector<std::size_t>{} : broadcast_strides(a.shape(), out_shape);
  auto sb = same ? std::vector<std::size_t>{} : broadcast_strides(b.shape(), out_shape);

  auto apply = [kind](T x, T y) {
    switch (kind) {
      case BinaryKind::kAdd: return x + y;
      case BinaryKind::kSub: return x - y;
      default: return x * y;
    }
  };
  if (same) {
    for (std::size_t i = 0; i < n; ++i) po[i] = apply(pa[i], pb[i]);
  } else {
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      po[o] = apply(pa[ia], pb[ib]);
    });
  }

  auto shape_copy = out_shape;
  return emit<T>(name, std::move(out_shape), out, {&a, &b}, [&](const auto&) -> BackwardFn<T> {
    return [av = a.buffer(), bv = b.buffer(), shape = std::move(shape_copy), sa = std::move(sa),
            sb = std::move(sb), same, kind](std::span<const T> g, Grads<T> grads) {
      auto* ga = grads[0];
      auto* gb = grads[1];
      const T sign_b = kind == BinaryKind::kSub ? T(-1) : T(1);
      if (same) {
        const std::size_t n = g.size();
        if (kind == BinaryKind::kMul) {
          if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * (*bv)[i];
          if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i] * (*av)[i];
        } else {
          if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
          if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] += sign_b * g[i];
        }
        return;
      }
      for_each_broadcast(shape, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        if (kind == BinaryKind::kMul) {
          if (ga) (*ga)[ia] += g[o] * (*bv)[ib];
          if (gb) (*gb)[ib] += g[o] * (*av)[ia];
        } else {
          if (ga) (*ga)[ia] += g[o];
          if (gb) (*gb)[ib] += sign_b * g[o];
        }
      });
    };
  });
}

enum class UnaryKind { kTanh, kSigmoid, kRelu, kAbs };

template <typename T>
Tensor<T> unary(const Tensor<T>& x, UnaryKind kind) {
  static constexpr const char* kNames[] = {"tanh", "sigmoid", "relu", "abs"};
  const char* name = kNames[static_cast<int>(kind)];
  require_defined(x, name);
  const std::size_t n = x.size();
  auto out = std::make_shared<Buffer<T>>(n);
  const T* px = x.data();
  T* po = out->data();
  switch (kind) {
    case UnaryKind::kTanh:
      for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
      break;
    case UnaryKind::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        po[i] = px[i] >= 0 ? T(1) / (T(1) + std::exp(-px[i])) : std::exp(px[i]) / (T(1) + std::exp(px[i]));
      }
      break;
    case UnaryKind::kRelu:
      for (std::size_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
      if (g_kink_tracking.load(std::memory_order_relaxed)) {
        std::uint64_t h = 1469598103934665603ULL;
        for (std::size_t i = 0; i < n; ++i) h = (h ^ static_cast<std::uint64_t>(px[i] > T(0))) * 1099511628211ULL;
        auto sig = g_kink_signature.load();
        g_kink_signature.store(sig * 0x9E3779B97F4A7C15ULL + h);
      }
      break;
    case UnaryKind::kAbs:
      for (std::size_t i = 0; i < n; ++i) po[i] = std::abs(px[i]);
      break;
  }
  return emit<T>(name, x.shape(), out, {&x}, [&](const auto& y) -> BackwardFn<T> {
    return [xv = x.buffer(), y, kind](std::span<const T> g, Grads<T> grads) {
      auto* gx = grads[0];
      if (!gx) return;
      const std::size_t n = g.size();
      const T* py = y->data();
      const T* px = xv->data();
      switch (kind) {
        case UnaryKind::kTanh:
          for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g[i] * (T(1) - py[i] * py[i]);
          break;
        case UnaryKind::kSigmoid:
          for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g[i] * py[i] * (T(1) - py[i]);
          break;
        case UnaryKind::kRelu:
          for (std::size_t i = 0; i < n; ++i) {
            if (px[i] > T(0)) (*gx)[i] += g[i];
          }
          break;
        case UnaryKind::kAbs:
          for (std::size_t i = 0; i < n; ++i) {
            if (px[i] > T(0)) {
              (*gx)[i] += g[i];
            } else if (px[i] < T(0)) {
              (*gx)[i] -= g[i];
            }
          }
          break;
      }
    };
  });
}

// [outer, n, inner] view of a softmax axis.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  if (axis < 0) {
    s.n = numel(shape);
    return s;
  }
  const auto a = static_cast<std::size_t>(axis);
  if (a >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + to_string(shape));
  }
  for (std::size_t d = 0; d < a; ++d) s.outer *= shape[d];
  s.n = shape[a];
  for (std::size_t d = a + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

// col[(c*kh+ki)*kw+kj, oy*wo+ox] = in[c, oy*s-p+ki, ox*s-p+kj]
template <typename T>
void im2col(const T* in, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* col) {
  const std::size_t plane = ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((ci * kh + ki) * kw + kj) * plane;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                ix < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = inside ? in[(ci * h + iy) * w + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* in) {
  const std::size_t plane = ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((ci * kh + ki) * kw + kj) * plane;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            in[(ci * h + iy) * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

void set_finite_check(bool enabled) { g_finite_check.store(enabled); }
bool finite_check_enabled() { return g_finite_check.load(); }
void set_kink_tracking(bool enabled) { g_kink_tracking.store(enabled); }
std::uint64_t kink_signature() { return g_kink_signature.load(); }
void reset_kink_signature() { g_kink_signature.store(0); }

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b) + ": extents " +
                       std::to_string(da) + " and " + std::to_string(db) + " at axis " + std::to_string(i));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require_defined(x, "reshape");
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  if (!x.attached()) return Tensor<T>(std::move(shape), x.buffer());
  const Tensor<T>* inputs[] = {&x};
  return x.tape()->record(std::move(shape), x.buffer(), inputs, [](std::span<const T> g, Grads<T> grads) {
    if (auto* gx = grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  require_defined(x, "broadcast_to");
  if (broadcast_shape(x.shape(), shape) != shape) {
    throw ShapeError("cannot broadcast " + to_string(x.shape()) + " to " + to_string(shape));
  }
  return add(x, Tensor<T>::zeros(shape));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kAdd);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kSub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kMul);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  require_defined(x, "scale");
  auto out = std::make_shared<Buffer<T>>(x.values().begin(), x.values().end());
  for (auto& v : *out) v *= factor;
  return emit<T>("scale", x.shape(), out, {&x}, [&](const auto&) -> BackwardFn<T> {
    return [factor](std::span<const T> g, Grads<T> grads) {
      if (auto* gx = grads[0]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += factor * g[i];
      }
    };
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool ta, bool tb) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul needs rank-2 operands, got " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t m = ta ? a.dim(1) : a.dim(0);
  const std::size_t k = ta ? a.dim(0) : a.dim(1);
  const std::size_t kb = tb ? b.dim(1) : b.dim(0);
  const std::size_t n = tb ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul inner extents differ: " + std::to_string(k) + " vs " + std::to_string(kb) + " (" +
                     to_string(a.shape()) + " x " + to_string(b.shape()) + ")");
  }
  auto out = std::make_shared<Buffer<T>>(m * n);
  detail::gemm(ta, tb, m, n, k, a.data(), b.data(), T(0), out->data());
  return emit<T>("matmul", Shape{m, n}, out, {&a, &b}, [&](const auto&) -> BackwardFn<T> {
    return [av = a.buffer(), bv = b.buffer(), ta, tb, m, n, k](std::span<const T> g, Grads<T> grads) {
      const T* A = av->data();
      const T* B = bv->data();
      const T* G = g.data();
      if (auto* ga = grads[0]) {
        if (!ta) {
          detail::gemm(false, !tb, m, k, n, G, B, T(1), ga->data());
        } else {
          detail::gemm(tb, true, k, m, n, B, G, T(1), ga->data());
        }
      }
      if (auto* gb = grads[1]) {
        if (!tb) {
          detail::gemm(!ta, false, k, n, m, A, G, T(1), gb->data());
        } else {
          detail::gemm(true, ta, n, k, m, G, A, T(1), gb->data());
        }
      }
    };
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_defined(x, "linear");
  if (weight.rank() != 2) throw ShapeError("linear weight must be rank 2, got " + to_string(weight.shape()));
  const bool vector_input = x.rank() == 1;
  Tensor<T> rows = vector_input ? reshape(x, Shape{1, x.dim(0)}) : x;
  if (rows.rank() != 2 || rows.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  Tensor<T> y = matmul(rows, weight, false, true);
  if (bias.defined()) {
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
      throw ShapeError("linear: bias " + to_string(bias.shape()) + " does not match weight " +
                       to_string(weight.shape()));
    }
    y = add(y, bias);
  }
  return vector_input ? reshape(y, Shape{weight.dim(0)}) : y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, UnaryKind::kTanh);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, UnaryKind::kSigmoid);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, UnaryKind::kRelu);
}
template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(x, UnaryKind::kAbs);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  require_defined(x, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  auto out = std::make_shared<Buffer<T>>(x.size());
  const T* px = x.data();
  T* po = out->data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) peak = std::max(peak, px[base + j * s.inner]);
      T total = 0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const T e = std::exp(px[base + j * s.inner] - peak);
        po[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) po[base + j * s.inner] /= total;
    }
  }
  return emit<T>("softmax", x.shape(), out, {&x}, [&](const auto& y) -> BackwardFn<T> {
    return [y, s](std::span<const T> g, Grads<T> grads) {
      auto* gx = grads[0];
      if (!gx) return;
      const T* py = y->data();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.n * s.inner + i;
          T dot = 0;
          for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * py[base + j * s.inner];
          for (std::size_t j = 0; j < s.n; ++j) {
            const std::size_t at = base + j * s.inner;
            (*gx)[at] += py[at] * (g[at] - dot);
          }
        }
      }
    };
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  require_defined(x, "sum");
  T total = 0;
  for (T v : x.values()) total += v;
  auto out = std::make_shared<Buffer<T>>(1, total);
  return emit<T>("sum", Shape{}, out, {&x}, [&](const auto&) -> BackwardFn<T> {
    return [](std::span<const T> g, Grads<T> grads) {
      if (auto* gx = grads[0]) {
        for (auto& v : *gx) v += g[0];
      }
    };
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  require_defined(x, "mean");
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdims) {
  require_defined(x, "sum");
  Shape kept = x.shape();
  for (auto a : axes) {
    if (a >= x.rank()) throw ShapeError("sum: axis " + std::to_string(a) + " invalid for " + to_string(x.shape()));
    kept[a] = 1;
  }
  Shape out_shape;
  if (keepdims) {
    out_shape = kept;
  } else {
    for (std::size_t d = 0; d < x.rank(); ++d) {
      if (std::find(axes.begin(), axes.end(), d) == axes.end()) out_shape.push_back(x.dim(d));
    }
  }
  auto out = std::make_shared<Buffer<T>>(numel(kept), T(0));
  auto so = broadcast_strides(kept, x.shape());
  std::vector<std::size_t> unused(x.rank(), 0);
  const T* px = x.data();
  for_each_broadcast(x.shape(), so, unused, [&](std::size_t i, std::size_t io, std::size_t) { (*out)[io] += px[i]; });
  return emit<T>("sum", std::move(out_shape), out, {&x}, [&](const auto&) -> BackwardFn<T> {
    return [shape = x.shape(), so = std::move(so), unused = std::move(unused)](std::span<const T> g, Grads<T> grads) {
      auto* gx = grads[0];
      if (!gx) return;
      for_each_broadcast(shape, so, unused, [&](std::size_t i, std::size_t io, std::size_t) { (*gx)[i] += g[io]; });
    };
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdims) {
  std::size_t count = 1;
  for (auto a : axes) count *= x.dim(a);
  return scale(sum(x, axes, keepdims), T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis " + std::to_string(axis) + " invalid for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat");
    bool ok = p.rank() == first.size();
    for (std::size_t d = 0; ok && d < first.size(); ++d) ok = d == axis || p.dim(d) == first[d];
    if (!ok) throw ShapeError("concat: " + to_string(p.shape()) + " incompatible with " + to_string(first));
    out_shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.dim(axis) * inner);
  const std::size_t row = out_shape[axis] * inner;
  auto out = std::make_shared<Buffer<T>>(outer * row);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const T* src = parts[i].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * widths[i], widths[i], out->data() + o * row + offset);
    }
    offset += widths[i];
  }
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return emit<T>("concat", std::move(out_shape), out, std::span<const Tensor<T>* const>(inputs),
                 [&](const auto&) -> BackwardFn<T> {
                   return [widths, outer, row](std::span<const T> g, Grads<T> grads) {
                     std::size_t offset = 0;
                     for (std::size_t i = 0; i < widths.size(); ++i) {
                       if (auto* gp = grads[i]) {
                         for (std::size_t o = 0; o < outer; ++o) {
                           for (std::size_t j = 0; j < widths[i]; ++j) (*gp)[o * widths[i] + j] += g[o * row + offset + j];
                         }
                       }
                       offset += widths[i];
                     }
                   };
                 });
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  Shape out_shape{parts.size()};
  for (auto d : parts.front().shape()) out_shape.push_back(d);
  const std::size_t each = parts.front().size();
  auto out = std::make_shared<Buffer<T>>(parts.size() * each);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_defined(parts[i], "stack");
    if (parts[i].shape() != parts.front().shape()) {
      throw ShapeError("stack: " + to_string(parts[i].shape()) + " differs from " + to_string(parts.front().shape()));
    }
    std::copy_n(parts[i].data(), each, out->data() + i * each);
  }
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return emit<T>("stack", std::move(out_shape), out, std::span<const Tensor<T>* const>(inputs),
                 [&](const auto&) -> BackwardFn<T> {
                   return [each](std::span<const T> g, Grads<T> grads) {
                     for (std::size_t i = 0; i < grads.size(); ++i) {
                       if (auto* gp = grads[i]) {
                         for (std::size_t j = 0; j < each; ++j) (*gp)[j] += g[i * each + j];
                       }
                     }
                   };
                 });
}

template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t index) {
  require_defined(x, "select");
  if (x.rank() == 0 || index >= x.dim(0)) {
    throw ShapeError("select index " + std::to_string(index) + " out of range for " + to_string(x.shape()));
  }
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t each = numel(out_shape);
  auto out = std::make_shared<Buffer<T>>(x.data() + index * each, x.data() + (index + 1) * each);
  return emit<T>("select", std::move(out_shape), out, {&x}, [&](const auto&) -> BackwardFn<T> {
    return [each, index](std::span<const T> g, Grads<T> grads) {
      if (auto* gx = grads[0]) {
        for (std::size_t j = 0; j < each; ++j) (*gx)[index * each + j] += g[j];
      }
    };
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride, std::size_t pad) {
  require_defined(input, "conv2d");
  require_defined(kernel, "conv2d");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be [C_out,C_in,kH,kW], got " + to_string(kernel.shape()));
  if (input.rank() != 3 && input.rank() != 4) {
    throw ShapeError("conv2d: input must be [C,H,W] or [N,C,H,W], got " + to_string(input.shape()));
  }
  const bool batched = input.rank() == 4;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t c = input.dim(batched ? 1 : 0);
  const std::size_t h = input.dim(batched ? 2 : 1);
  const std::size_t w = input.dim(batched ? 3 : 2);
  const std::size_t oc = kernel.dim(0);
  const std::size_t kh = kernel.dim(2);
  const std::size_t kw = kernel.dim(3);
  if (kernel.dim(1) != c) {
    throw ShapeError("conv2d: input has C_in=" + std::to_string(c) + " but kernel " + to_string(kernel.shape()) +
                     " expects C_in=" + std::to_string(kernel.dim(1)));
  }
  if (h + 2 * pad < kh || w + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel " + to_string(kernel.shape()) + " larger than padded input " +
                     to_string(input.shape()));
  }
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t ckk = c * kh * kw;
  const std::size_t plane = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;

  // Patch matrices are kept for the backward pass; pointwise convolutions
  // read the input directly.
  auto cols = std::make_shared<Buffer<T>>(pointwise ? 0 : batch * ckk * plane);
  auto out = std::make_shared<Buffer<T>>(batch * oc * plane);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = input.data() + b * c * h * w;
    const T* col = src;
    if (!pointwise) {
      T* dst = cols->data() + b * ckk * plane;
      im2col(src, c, h, w, kh, kw, stride, pad, ho, wo, dst);
      col = dst;
    }
    detail::gemm(false, false, oc, plane, ckk, kernel.data(), col, T(0), out->data() + b * oc * plane);
  }
  Shape out_shape = batched ? Shape{batch, oc, ho, wo} : Shape{oc, ho, wo};
  return emit<T>("conv2d", std::move(out_shape), out, {&input, &kernel}, [&](const auto&) -> BackwardFn<T> {
    return [cols, in = input.buffer(), kv = kernel.buffer(), pointwise, batch, c, h, w, oc, kh, kw, stride, pad, ho,
            wo, ckk, plane](std::span<const T> g, Grads<T> grads) {
      auto* gin = grads[0];
      auto* gk = grads[1];
      std::vector<T> dcol(gin && !pointwise ? ckk * plane : 0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* gy = g.data() + b * oc * plane;
        const T* col = pointwise ? in->data() + b * c * h * w : cols->data() + b * ckk * plane;
        if (gk) detail::gemm(false, true, oc, ckk, plane, gy, col, T(1), gk->data());
        if (gin) {
          T* gsrc = gin->data() + b * c * h * w;
          if (pointwise) {
            detail::gemm(true, false, ckk, plane, oc, kv->data(), gy, T(1), gsrc);
          } else {
            detail::gemm(true, false, ckk, plane, oc, kv->data(), gy, T(0), dcol.data());
            col2im(dcol.data(), c, h, w, kh, kw, stride, pad, ho, wo, gsrc);
          }
        }
      }
    };
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<T>& target) {
  require_defined(logits, "softmax_cross_entropy");
  if (logits.rank() != 1 || target.size() != logits.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(logits.shape()) + " vs target of length " +
                     std::to_string(target.size()));
  }
  const std::size_t n = logits.size();
  const T* z = logits.data();
  const T peak = *std::max_element(z, z + n);
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(z[i] - peak);
  const T lse = peak + std::log(total);
  T loss = 0;
  T mass = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] != T(0)) loss -= target[i] * (z[i] - lse);
    mass += target[i];
  }
  auto out = std::make_shared<Buffer<T>>(1, loss);
  return emit<T>("softmax_cross_entropy", Shape{}, out, {&logits}, [&](const auto&) -> BackwardFn<T> {
    return [zv = logits.buffer(), target, lse, mass](std::span<const T> g, Grads<T> grads) {
      auto* gz = grads[0];
      if (!gz) return;
      for (std::size_t i = 0; i < target.size(); ++i) {
        (*gz)[i] += g[0] * (std::exp((*zv)[i] - lse) * mass - target[i]);
      }
    };
  });
}

template <typename T>
std::vector<std::size_t> top_k_indices(std::span<const T> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

template <typename T>
Tensor<T> mean_top_k(const Tensor<T>& x, std::size_t k) {
  require_defined(x, "mean_top_k");
  if (x.rank() != 1) throw ShapeError("mean_top_k expects a vector, got " + to_string(x.shape()));
  if (k == 0 || k > x.size()) throw ShapeError("mean_top_k: k=" + std::to_string(k) + " out of range");
  auto picked = top_k_indices<T>(x.values(), k);
  T total = 0;
  for (auto i : picked) total += x[i];
  auto out = std::make_shared<Buffer<T>>(1, total / static_cast<T>(k));
  return emit<T>("mean_top_k", Shape{}, out, {&x}, [&](const auto&) -> BackwardFn<T> {
    return [picked, k](std::span<const T> g, Grads<T> grads) {
      if (auto* gx = grads[0]) {
        for (auto i : picked) (*gx)[i] += g[0] / static_cast<T>(k);
      }
    };
  });
}

#define TAILLIGHT_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> scale(const Tensor<T>&, T);                                                      \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> tanh(const Tensor<T>&);                                                          \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                          \
  template Tensor<T> abs(const Tensor<T>&);                                                           \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                           \
  template Tensor<T> mean(const Tensor<T>&);                                                          \
  template Tensor<T> sum(const Tensor<T>&, const std::vector<std::size_t>&, bool);                    \
  template Tensor<T> mean(const Tensor<T>&, const std::vector<std::size_t>&, bool);                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                              \
  template Tensor<T> stack(const std::vector<Tensor<T>>&);                                            \
  template Tensor<T> select(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const std::vector<T>&);                  \
  template Tensor<T> mean_top_k(const Tensor<T>&, std::size_t);                                       \
  template std::vector<std::size_t> top_k_indices(std::span<const T>, std::size_t);

TAILLIGHT_INSTANTIATE_OPS(float)
TAILLIGHT_INSTANTIATE_OPS(double)

}  // namespace taillight
