#include "laid/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "laid/error.hpp"

namespace laid::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "Conv2d";
    case LayerKind::DepthwiseConv2d: return "DepthwiseConv2d";
    case LayerKind::PointwiseConv2d: return "PointwiseConv2d";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool2d: return "MaxPool2d";
    case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::Linear: return "Linear";
    case LayerKind::BatchNorm2d: return "BatchNorm2d";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Layer specs

LayerSpec LayerSpec::conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                            std::size_t pad) {
  return {LayerKind::Conv2d, in, out, k, stride, pad};
}
LayerSpec LayerSpec::depthwise(std::size_t channels, std::size_t k, std::size_t stride,
                               std::size_t pad) {
  return {LayerKind::DepthwiseConv2d, channels, channels, k, stride, pad};
}
LayerSpec LayerSpec::pointwise(std::size_t in, std::size_t out) {
  return {LayerKind::PointwiseConv2d, in, out, 1, 1, 0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::ReLU, 0, 0, 1, 1, 0}; }
LayerSpec LayerSpec::maxpool(std::size_t k, std::size_t stride, std::size_t pad) {
  return {LayerKind::MaxPool2d, 0, 0, k, stride, pad};
}
LayerSpec LayerSpec::global_avg_pool() { return {LayerKind::GlobalAvgPool, 0, 0, 1, 1, 0}; }
LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  return {LayerKind::Linear, in, out, 1, 1, 0};
}
LayerSpec LayerSpec::batchnorm(std::size_t channels) {
  return {LayerKind::BatchNorm2d, channels, channels, 1, 1, 0};
}

std::size_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::Conv2d: return kernel * kernel * in * out + out;
    case LayerKind::DepthwiseConv2d: return kernel * kernel * in + in;
    case LayerKind::PointwiseConv2d:
    case LayerKind::Linear: return in * out + out;
    case LayerKind::BatchNorm2d: return 2 * in;
    default: return 0;
  }
}

std::size_t LayerSpec::buffer_count() const {
  return kind == LayerKind::BatchNorm2d ? 2 * in : 0;
}

void LayerSpec::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorKind::Dimension, std::string(to_string(kind)) + ": " + what);
  };
  if (kernel < 1) fail("kernel must be >= 1");
  if (stride < 1) fail("stride must be >= 1");
  switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::PointwiseConv2d:
    case LayerKind::Linear:
      if (in == 0 || out == 0) fail("channel counts must be positive");
      break;
    case LayerKind::DepthwiseConv2d:
    case LayerKind::BatchNorm2d:
      if (in == 0 || in != out) fail("channel count must be positive and preserved");
      break;
    case LayerKind::MaxPool2d:
      if (padding * 2 > kernel) fail("padding larger than half the kernel");
      break;
    default:
      break;
  }
}

namespace {

std::size_t conv_out(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad,
                     LayerKind kind) {
  if (n + 2 * pad < k) {
    throw Error(ErrorKind::Dimension, std::string(to_string(kind)) + ": kernel " +
                                          std::to_string(k) + " larger than padded input " +
                                          std::to_string(n + 2 * pad));
  }
  return (n + 2 * pad - k) / stride + 1;
}

}  // namespace

Shape LayerSpec::output_shape(Shape input) const {
  validate();
  auto need_channels = [&](std::size_t c) {
    if (input.c != c) {
      throw Error(ErrorKind::Dimension, std::string(to_string(kind)) + ": expected " +
                                            std::to_string(c) + " input channels, got " +
                                            std::to_string(input.c));
    }
  };
  switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::DepthwiseConv2d:
      need_channels(in);
      return {out, conv_out(input.h, kernel, stride, padding, kind),
              conv_out(input.w, kernel, stride, padding, kind)};
    case LayerKind::PointwiseConv2d:
      need_channels(in);
      return {out, input.h, input.w};
    case LayerKind::ReLU:
      return input;
    case LayerKind::BatchNorm2d:
      need_channels(in);
      return input;
    case LayerKind::MaxPool2d:
      return {input.c, conv_out(input.h, kernel, stride, padding, kind),
              conv_out(input.w, kernel, stride, padding, kind)};
    case LayerKind::GlobalAvgPool:
      return {input.c, 1, 1};
    case LayerKind::Linear:
      if (input.size() != in) {
        throw Error(ErrorKind::Dimension, "Linear: expected " + std::to_string(in) +
                                              " input features, got " +
                                              std::to_string(input.size()));
      }
      return {out, 1, 1};
  }
  throw Error(ErrorKind::Dimension, "unknown layer kind");
}

// ---------------------------------------------------------------------------
// Graph

NetworkGraph::NetworkGraph(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorKind::Dimension, "network has no layers");
  std::size_t p = 0, b = 0;
  const LayerSpec* last_mixing = nullptr;
  for (const LayerSpec& l : layers_) {
    l.validate();
    param_offsets_.push_back(p);
    buffer_offsets_.push_back(b);
    p += l.param_count();
    b += l.buffer_count();
    if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::PointwiseConv2d ||
        l.kind == LayerKind::Linear) {
      last_mixing = &l;
    }
  }
  if (last_mixing == nullptr || last_mixing->out != 2) {
    throw Error(ErrorKind::Dimension, "final projection must have exactly 2 outputs");
  }
  params_.assign(p, 0.0f);
  buffers_.assign(b, 0.0f);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind == LayerKind::BatchNorm2d) {
      const std::size_t c = layers_[i].in;
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(param_offsets_[i]), c, 1.0f);
      std::fill_n(buffers_.begin() + static_cast<std::ptrdiff_t>(buffer_offsets_[i] + c), c, 1.0f);
    }
  }
}

Shape NetworkGraph::output_shape(Shape input) const {
  for (const LayerSpec& l : layers_) input = l.output_shape(input);
  return input;
}

void NetworkGraph::init(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    float* p = params_.data() + param_offsets_[i];
    std::size_t fan_in = 0, weights = 0;
    switch (l.kind) {
      case LayerKind::Conv2d:
        fan_in = l.in * l.kernel * l.kernel;
        weights = fan_in * l.out;
        break;
      case LayerKind::DepthwiseConv2d:
        fan_in = l.kernel * l.kernel;
        weights = fan_in * l.in;
        break;
      case LayerKind::PointwiseConv2d:
      case LayerKind::Linear:
        fan_in = l.in;
        weights = l.in * l.out;
        break;
      case LayerKind::BatchNorm2d: {
        std::fill_n(p, l.in, 1.0f);
        std::fill_n(p + l.in, l.in, 0.0f);
        float* buf = buffers_.data() + buffer_offsets_[i];
        std::fill_n(buf, l.in, 0.0f);
        std::fill_n(buf + l.in, l.in, 1.0f);
        continue;
      }
      default:
        continue;
    }
    Rng layer_rng = rng.child(i);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t k = 0; k < weights; ++k) {
      p[k] = static_cast<float>(layer_rng.uniform(-bound, bound));
    }
    std::fill_n(p + weights, l.param_count() - weights, 0.0f);
  }
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Output indices o with 0 <= o*stride + off - pad < n, as [lo, hi).
struct Range {
  std::size_t lo, hi;
};
Range valid_range(std::size_t n_out, std::size_t n_in, std::size_t off, std::size_t stride,
                  std::size_t pad) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto start = static_cast<std::ptrdiff_t>(off) - static_cast<std::ptrdiff_t>(pad);
  std::ptrdiff_t lo = 0;
  if (start < 0) lo = (-start + s - 1) / s;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(n_in) - 1 - start);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n_out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Shared direct convolution; `depthwise` couples input and output channel.
template <typename T>
void conv_forward(const LayerSpec& l, bool depthwise, Shape is, Shape os, const T* in, const T* w,
                  const T* b, T* out) {
  const std::size_t k = l.kernel;
  for (std::size_t co = 0; co < os.c; ++co) {
    T* o = out + co * os.h * os.w;
    std::fill_n(o, os.h * os.w, b[co]);
    const std::size_t ci_begin = depthwise ? co : 0;
    const std::size_t ci_end = depthwise ? co + 1 : is.c;
    for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
      const T* x = in + ci * is.h * is.w;
      const T* wk = depthwise ? w + co * k * k : w + (co * is.c + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(os.h, is.h, ky, l.stride, l.padding);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range rx = valid_range(os.w, is.w, kx, l.stride, l.padding);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * l.stride + ky - l.padding;
            // Unsigned wrap in `base` cancels once ox * stride is added.
            const std::size_t base = iy * is.w + kx - l.padding;
            T* orow = o + oy * os.w;
            if (l.stride == 1) {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * x[base + ox];
            } else {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                orow[ox] += wv * x[base + ox * l.stride];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& l, bool depthwise, Shape is, Shape os, const T* in,
                   const T* w, const T* g, T* gw, T* gb, T* gin) {
  const std::size_t k = l.kernel;
  for (std::size_t co = 0; co < os.c; ++co) {
    const T* go = g + co * os.h * os.w;
    T sum = 0;
    for (std::size_t i = 0; i < os.h * os.w; ++i) sum += go[i];
    gb[co] += sum;
    const std::size_t ci_begin = depthwise ? co : 0;
    const std::size_t ci_end = depthwise ? co + 1 : is.c;
    for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
      const T* x = in + ci * is.h * is.w;
      T* gx = gin ? gin + ci * is.h * is.w : nullptr;
      const std::size_t widx = depthwise ? co * k * k : (co * is.c + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(os.h, is.h, ky, l.stride, l.padding);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range rx = valid_range(os.w, is.w, kx, l.stride, l.padding);
          const T wv = w[widx + ky * k + kx];
          T acc = 0;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * l.stride + ky - l.padding;
            const std::size_t base = iy * is.w + kx - l.padding;
            const T* grow = go + oy * os.w;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              acc += grow[ox] * x[base + ox * l.stride];
            }
            if (gx) {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                gx[base + ox * l.stride] += wv * grow[ox];
              }
            }
          }
          gw[widx + ky * k + kx] += acc;
        }
      }
    }
  }
}

// out[co][p] = b[co] + sum_ci w[co][ci] in[ci][p]; also serves Linear with p = 1.
template <typename T>
void dense_forward(std::size_t cin, std::size_t cout, std::size_t plane, const T* in, const T* w,
                   const T* b, T* out) {
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out + co * plane;
    std::fill_n(o, plane, b[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T wv = w[co * cin + ci];
      const T* x = in + ci * plane;
      for (std::size_t p = 0; p < plane; ++p) o[p] += wv * x[p];
    }
  }
}

template <typename T>
void dense_backward(std::size_t cin, std::size_t cout, std::size_t plane, const T* in,
                    const T* w, const T* g, T* gw, T* gb, T* gin) {
  for (std::size_t co = 0; co < cout; ++co) {
    const T* go = g + co * plane;
    T sum = 0;
    for (std::size_t p = 0; p < plane; ++p) sum += go[p];
    gb[co] += sum;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in + ci * plane;
      T acc = 0;
      for (std::size_t p = 0; p < plane; ++p) acc += go[p] * x[p];
      gw[co * cin + ci] += acc;
      if (gin) {
        const T wv = w[co * cin + ci];
        T* gx = gin + ci * plane;
        for (std::size_t p = 0; p < plane; ++p) gx[p] += wv * go[p];
      }
    }
  }
}

template <typename T>
void check_finite(const std::vector<T>& v, std::size_t layer, LayerKind kind) {
  for (T x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::Numeric, "non-finite activation after layer " +
                                          std::to_string(layer) + " (" +
                                          std::string(to_string(kind)) + ")");
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> run_forward(const NetworkGraph& net, std::span<const T> params,
                           std::span<T> buffers, std::span<const T> input, std::size_t n,
                           Shape in_shape, Mode mode, Activations<T>* cache) {
  if (n == 0) throw Error(ErrorKind::Parameter, "empty batch");
  if (input.size() != n * in_shape.size()) {
    throw Error(ErrorKind::Dimension, "batch data length does not match its shape");
  }
  if (params.size() != net.params().size()) {
    throw Error(ErrorKind::Dimension, "parameter span does not match the graph");
  }
  const auto& layers = net.layers();
  if (cache) {
    *cache = Activations<T>{};
    cache->n = n;
    cache->mode = mode;
    cache->argmax.resize(layers.size());
    cache->bn_xhat.resize(layers.size());
    cache->bn_inv_std.resize(layers.size());
  }

  std::vector<T> cur(input.begin(), input.end());
  Shape s = in_shape;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerSpec& l = layers[li];
    const Shape os = l.output_shape(s);
    const T* p = params.data() + net.param_offset(li);
    std::vector<T> next(n * os.size());
    switch (l.kind) {
      case LayerKind::Conv2d:
      case LayerKind::DepthwiseConv2d: {
        const bool dw = l.kind == LayerKind::DepthwiseConv2d;
        const std::size_t nw = dw ? l.kernel * l.kernel * l.in : l.kernel * l.kernel * l.in * l.out;
        for (std::size_t b = 0; b < n; ++b) {
          conv_forward(l, dw, s, os, cur.data() + b * s.size(), p, p + nw,
                       next.data() + b * os.size());
        }
        break;
      }
      case LayerKind::PointwiseConv2d:
      case LayerKind::Linear: {
        const std::size_t plane = l.kind == LayerKind::Linear ? 1 : s.h * s.w;
        for (std::size_t b = 0; b < n; ++b) {
          dense_forward(l.in, l.out, plane, cur.data() + b * s.size(), p, p + l.in * l.out,
                        next.data() + b * os.size());
        }
        break;
      }
      case LayerKind::ReLU:
        for (std::size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] > T(0) ? cur[i] : T(0);
        break;
      case LayerKind::MaxPool2d: {
        std::vector<std::uint32_t> arg(next.size());
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t c = 0; c < s.c; ++c) {
            const T* x = cur.data() + b * s.size() + c * s.h * s.w;
            const std::size_t obase = b * os.size() + c * os.h * os.w;
            for (std::size_t oy = 0; oy < os.h; ++oy) {
              for (std::size_t ox = 0; ox < os.w; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                std::uint32_t best_i = 0;
                for (std::size_t ky = 0; ky < l.kernel; ++ky) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                                            static_cast<std::ptrdiff_t>(l.padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.h)) continue;
                  for (std::size_t kx = 0; kx < l.kernel; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                                              static_cast<std::ptrdiff_t>(l.padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.w)) continue;
                    const auto idx = static_cast<std::uint32_t>(iy * static_cast<std::ptrdiff_t>(s.w) + ix);
                    if (x[idx] > best) {
                      best = x[idx];
                      best_i = idx;
                    }
                  }
                }
                next[obase + oy * os.w + ox] = best;
                arg[obase + oy * os.w + ox] = best_i;
              }
            }
          }
        }
        if (cache) cache->argmax[li] = std::move(arg);
        break;
      }
      case LayerKind::GlobalAvgPool: {
        const std::size_t plane = s.h * s.w;
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t c = 0; c < s.c; ++c) {
            const T* x = cur.data() + b * s.size() + c * plane;
            T acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += x[i];
            next[b * s.c + c] = acc / static_cast<T>(plane);
          }
        }
        break;
      }
      case LayerKind::BatchNorm2d: {
        const std::size_t plane = s.h * s.w;
        const std::size_t count = n * plane;
        const T* gamma = p;
        const T* beta = p + s.c;
        T* running = buffers.empty() ? nullptr : buffers.data() + net.buffer_offset(li);
        if (mode == Mode::Eval && running == nullptr) {
          throw Error(ErrorKind::State, "BatchNorm2d eval requires running statistics");
        }
        std::vector<T> xhat(cur.size());
        std::vector<T> inv_std(s.c);
        for (std::size_t c = 0; c < s.c; ++c) {
          double mean = 0.0, var = 0.0;
          if (mode == Mode::Train) {
            for (std::size_t b = 0; b < n; ++b) {
              const T* x = cur.data() + b * s.size() + c * plane;
              for (std::size_t i = 0; i < plane; ++i) mean += x[i];
            }
            mean /= static_cast<double>(count);
            for (std::size_t b = 0; b < n; ++b) {
              const T* x = cur.data() + b * s.size() + c * plane;
              for (std::size_t i = 0; i < plane; ++i) var += (x[i] - mean) * (x[i] - mean);
            }
            var /= static_cast<double>(count);
            if (running) {
              const double unbiased = count > 1 ? var * count / (count - 1) : var;
              running[c] = static_cast<T>((1 - kBnMomentum) * running[c] + kBnMomentum * mean);
              running[s.c + c] =
                  static_cast<T>((1 - kBnMomentum) * running[s.c + c] + kBnMomentum * unbiased);
            }
          } else {
            mean = running[c];
            var = running[s.c + c];
          }
          const T is = static_cast<T>(1.0 / std::sqrt(var + kBnEps));
          inv_std[c] = is;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = b * s.size() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T xh = static_cast<T>((cur[off + i] - mean) * is);
              xhat[off + i] = xh;
              next[off + i] = gamma[c] * xh + beta[c];
            }
          }
        }
        if (cache) {
          cache->bn_xhat[li] = std::move(xhat);
          cache->bn_inv_std[li] = std::move(inv_std);
        }
        break;
      }
    }
    check_finite(next, li, l.kind);
    if (cache) {
      cache->shapes.push_back(s);
      cache->values.push_back(std::move(cur));
    }
    cur = std::move(next);
    s = os;
  }
  if (s.size() != 2) {
    throw Error(ErrorKind::Dimension,
                "network output has " + std::to_string(s.size()) + " values per sample, need 2");
  }
  if (cache) {
    cache->shapes.push_back(s);
    cache->values.push_back(cur);
  }
  return cur;
}

template <typename T>
std::vector<T> run_backward(const NetworkGraph& net, std::span<const T> params,
                            const Activations<T>& cache, std::span<const T> grad_out,
                            std::vector<T>* grad_input) {
  const auto& layers = net.layers();
  if (!cache.valid() || cache.values.size() != layers.size() + 1) {
    throw Error(ErrorKind::State, "backward called without a forward cache");
  }
  const std::size_t n = cache.n;
  if (grad_out.size() != cache.values.back().size()) {
    throw Error(ErrorKind::Dimension, "upstream gradient size mismatch");
  }
  std::vector<T> grads(params.size(), T(0));
  std::vector<T> g(grad_out.begin(), grad_out.end());

  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerSpec& l = layers[li];
    const Shape s = cache.shapes[li];
    const Shape os = cache.shapes[li + 1];
    const std::vector<T>& x = cache.values[li];
    const T* p = params.data() + net.param_offset(li);
    T* gp = grads.data() + net.param_offset(li);
    const bool need_gin = li > 0 || grad_input != nullptr;
    std::vector<T> gin(need_gin ? x.size() : 0, T(0));
    T* gin_ptr = need_gin ? gin.data() : nullptr;

    switch (l.kind) {
      case LayerKind::Conv2d:
      case LayerKind::DepthwiseConv2d: {
        const bool dw = l.kind == LayerKind::DepthwiseConv2d;
        const std::size_t nw = dw ? l.kernel * l.kernel * l.in : l.kernel * l.kernel * l.in * l.out;
        for (std::size_t b = 0; b < n; ++b) {
          conv_backward(l, dw, s, os, x.data() + b * s.size(), p, g.data() + b * os.size(), gp,
                        gp + nw, gin_ptr ? gin_ptr + b * s.size() : nullptr);
        }
        break;
      }
      case LayerKind::PointwiseConv2d:
      case LayerKind::Linear: {
        const std::size_t plane = l.kind == LayerKind::Linear ? 1 : s.h * s.w;
        for (std::size_t b = 0; b < n; ++b) {
          dense_backward(l.in, l.out, plane, x.data() + b * s.size(), p, g.data() + b * os.size(),
                         gp, gp + l.in * l.out, gin_ptr ? gin_ptr + b * s.size() : nullptr);
        }
        break;
      }
      case LayerKind::ReLU:
        if (gin_ptr) {
          for (std::size_t i = 0; i < x.size(); ++i) gin[i] = x[i] > T(0) ? g[i] : T(0);
        }
        break;
      case LayerKind::MaxPool2d:
        if (gin_ptr) {
          const auto& arg = cache.argmax[li];
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < s.c; ++c) {
              const std::size_t obase = b * os.size() + c * os.h * os.w;
              const std::size_t ibase = b * s.size() + c * s.h * s.w;
              for (std::size_t o = 0; o < os.h * os.w; ++o) {
                gin[ibase + arg[obase + o]] += g[obase + o];
              }
            }
          }
        }
        break;
      case LayerKind::GlobalAvgPool:
        if (gin_ptr) {
          const std::size_t plane = s.h * s.w;
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < s.c; ++c) {
              const T v = g[b * s.c + c] / static_cast<T>(plane);
              std::fill_n(gin.begin() + static_cast<std::ptrdiff_t>(b * s.size() + c * plane),
                          plane, v);
            }
          }
        }
        break;
      case LayerKind::BatchNorm2d: {
        const std::size_t plane = s.h * s.w;
        const auto count = static_cast<T>(n * plane);
        const auto& xhat = cache.bn_xhat[li];
        const auto& inv_std = cache.bn_inv_std[li];
        for (std::size_t c = 0; c < s.c; ++c) {
          T sum_g = 0, sum_gx = 0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = b * s.size() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat[off + i];
            }
          }
          gp[c] += sum_gx;
          gp[s.c + c] += sum_g;
          if (!gin_ptr) continue;
          const T scale = p[c] * inv_std[c];
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = b * s.size() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (cache.mode == Mode::Train) {
                gin[off + i] = scale / count * (count * g[off + i] - sum_g - xhat[off + i] * sum_gx);
              } else {
                gin[off + i] = scale * g[off + i];
              }
            }
          }
        }
        break;
      }
    }
    g = std::move(gin);
  }
  if (grad_input) *grad_input = std::move(g);
  return grads;
}

template std::vector<float> run_forward<float>(const NetworkGraph&, std::span<const float>,
                                               std::span<float>, std::span<const float>,
                                               std::size_t, Shape, Mode, Activations<float>*);
template std::vector<double> run_forward<double>(const NetworkGraph&, std::span<const double>,
                                                 std::span<double>, std::span<const double>,
                                                 std::size_t, Shape, Mode, Activations<double>*);
template std::vector<float> run_backward<float>(const NetworkGraph&, std::span<const float>,
                                                const Activations<float>&, std::span<const float>,
                                                std::vector<float>*);
template std::vector<double> run_backward<double>(const NetworkGraph&, std::span<const double>,
                                                  const Activations<double>&,
                                                  std::span<const double>, std::vector<double>*);

// ---------------------------------------------------------------------------
// Batches and float entry points

Batch make_batch(std::span<const ImageTensor> images, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorKind::Parameter, "empty batch");
  const ImageTensor& first = images[indices[0]];
  Batch batch;
  batch.n = indices.size();
  batch.shape = {first.channels(), first.height(), first.width()};
  batch.data.resize(batch.n * batch.shape.size());
  const std::size_t plane = first.height() * first.width();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const ImageTensor& img = images[indices[b]];
    if (img.height() != first.height() || img.width() != first.width() ||
        img.channels() != first.channels()) {
      throw Error(ErrorKind::Dimension, "batch images differ in shape");
    }
    const float scale = img.range() == RangeTag::Byte0255 ? 1.0f / 255.0f : 1.0f;
    const auto src = img.data();
    float* dst = batch.data.data() + b * batch.shape.size();
    const std::size_t ch = img.channels();
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < ch; ++c) dst[c * plane + i] = src[i * ch + c] * scale;
    }
  }
  return batch;
}

Batch make_batch(std::span<const ImageTensor> images) {
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(images, idx);
}

std::vector<float> forward(const NetworkGraph& net, const Batch& batch) {
  std::vector<float> buffers(net.buffers().begin(), net.buffers().end());
  return run_forward<float>(net, net.params(), buffers, batch.data, batch.n, batch.shape,
                            Mode::Eval, nullptr);
}

std::vector<float> forward(NetworkGraph& net, const Batch& batch, Activations<float>& cache) {
  return run_forward<float>(net, std::span<const float>(net.params()), net.buffers(), batch.data,
                            batch.n, batch.shape, Mode::Train, &cache);
}

std::vector<float> backward(const NetworkGraph& net, const Activations<float>& cache,
                            std::span<const float> grad_logits) {
  return run_backward<float>(net, net.params(), cache, grad_logits);
}

double positive_probability(float logit0, float logit1) {
  // sigmoid(l1 - l0), written to avoid overflow on either side.
  const double d = static_cast<double>(logit1) - static_cast<double>(logit0);
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Loss and optimisation

template <typename T>
LossResult<T> bce_loss(std::span<const T> logits, std::span<const std::uint8_t> labels) {
  const std::size_t n = labels.size();
  if (n == 0) throw Error(ErrorKind::Parameter, "loss over an empty batch");
  if (logits.size() != 2 * n) throw Error(ErrorKind::Dimension, "logits must be n x 2");
  LossResult<T> r;
  r.grad.resize(2 * n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 1) throw Error(ErrorKind::Parameter, "labels must be 0 or 1");
    const double l0 = logits[2 * i], l1 = logits[2 * i + 1];
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    const double z = e0 + e1;
    const double lse = m + std::log(z);
    total += lse - (labels[i] ? l1 : l0);
    const double p0 = e0 / z, p1 = e1 / z;
    r.grad[2 * i] = static_cast<T>((p0 - (labels[i] == 0 ? 1.0 : 0.0)) / static_cast<double>(n));
    r.grad[2 * i + 1] = static_cast<T>((p1 - (labels[i] == 1 ? 1.0 : 0.0)) / static_cast<double>(n));
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

template LossResult<float> bce_loss<float>(std::span<const float>, std::span<const std::uint8_t>);
template LossResult<double> bce_loss<double>(std::span<const double>,
                                             std::span<const std::uint8_t>);

void adam_step(OptimizerState& st, std::span<float> params, std::span<const float> grads) {
  if (grads.size() != params.size()) {
    throw Error(ErrorKind::Dimension, "gradient length does not match parameter count");
  }
  for (float g : grads) {
    if (!std::isfinite(g)) throw Error(ErrorKind::Numeric, "non-finite gradient");
  }
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + st.weight_decay * params[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] = static_cast<float>(params[i] - st.lr * mhat / (std::sqrt(vhat) + st.epsilon));
  }
}

double scheduler_step(SchedulerState& st, double val_acc, double lr) {
  if (val_acc > st.best_metric) {
    st.best_metric = val_acc;
    st.epochs_since_improvement = 0;
    return lr;
  }
  if (++st.epochs_since_improvement > st.patience) {
    st.epochs_since_improvement = 0;
    return lr * st.factor;
  }
  return lr;
}

bool EarlyStopState::update(int epoch, double val_acc, const NetworkGraph& net) {
  if (val_acc > best_val_acc) {
    best_val_acc = val_acc;
    best_epoch = epoch;
    stale_epochs = 0;
    best_params.assign(net.params().begin(), net.params().end());
    best_buffers.assign(net.buffers().begin(), net.buffers().end());
    return false;
  }
  ++stale_epochs;
  return stale_epochs >= window;
}

// ---------------------------------------------------------------------------
// Training

std::vector<double> predict_scores(const NetworkGraph& net, std::span<const ImageTensor> images,
                                   std::size_t batch_size) {
  std::vector<double> scores;
  scores.reserve(images.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(images.size(), start + batch_size); ++i) idx.push_back(i);
    const auto logits = forward(net, make_batch(images, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      scores.push_back(positive_probability(logits[2 * b], logits[2 * b + 1]));
    }
  }
  return scores;
}

double evaluate_accuracy(const NetworkGraph& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw Error(ErrorKind::Parameter, "accuracy over an empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto logits = forward(net, make_batch(data.images, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (predict(logits[2 * b], logits[2 * b + 1]) == data.labels[idx[b]]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainedModel train(NetworkGraph net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config) {
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw Error(ErrorKind::Parameter, "training needs non-empty train and validation sets");
  }
  if (train_set.labels.size() != train_set.size() || val_set.labels.size() != val_set.size()) {
    throw Error(ErrorKind::Parameter, "label count does not match image count");
  }
  if (config.batch_size == 0) throw Error(ErrorKind::Parameter, "batch size must be >= 1");
  if (config.max_epochs < 1 || config.max_epochs > 100) {
    throw Error(ErrorKind::Parameter, "epochs must be in [1, 100]");
  }

  OptimizerState opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;
  SchedulerState sched;
  sched.patience = config.scheduler_patience;
  sched.factor = config.scheduler_factor;
  EarlyStopState stop;
  stop.window = config.early_stop_window;

  TrainLog log;
  const Rng shuffle_root(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> idx;
  std::vector<std::uint8_t> labels;
  Activations<float> cache;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = shuffle_root.child(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(end));
      labels.clear();
      for (std::size_t i : idx) labels.push_back(train_set.labels[i]);
      const Batch batch = make_batch(train_set.images, idx);
      const auto logits = forward(net, batch, cache);
      const auto loss = bce_loss<float>(logits, labels);
      const auto grads = backward(net, cache, loss.grad);
      adam_step(opt, net.params(), grads);
      loss_sum += loss.loss * static_cast<double>(idx.size());
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_acc = evaluate_accuracy(net, val_set);
    log.epochs.push_back({epoch, train_loss, val_acc, opt.lr});
    if (config.on_epoch) config.on_epoch(epoch, train_loss, val_acc, opt.lr);

    opt.lr = scheduler_step(sched, val_acc, opt.lr);
    if (stop.update(epoch, val_acc, net)) {
      log.stopped_early = true;
      break;
    }
  }

  std::copy(stop.best_params.begin(), stop.best_params.end(), net.params().begin());
  std::copy(stop.best_buffers.begin(), stop.best_buffers.end(), net.buffers().begin());
  log.best_epoch = stop.best_epoch;
  log.best_val_accuracy = stop.best_val_acc;
  return {std::move(net), std::move(log)};
}

NetworkGraph tiny_detector_arch() {
  std::vector<LayerSpec> layers = {LayerSpec::conv2d(3, 8, 3, 2, 1), LayerSpec::relu()};
  const std::size_t widths[] = {8, 16, 32, 64};
  for (std::size_t b = 0; b < 3; ++b) {
    layers.push_back(LayerSpec::depthwise(widths[b], 3, 2, 1));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::pointwise(widths[b], widths[b + 1]));
    layers.push_back(LayerSpec::relu());
  }
  layers.push_back(LayerSpec::global_avg_pool());
  layers.push_back(LayerSpec::linear(64, 2));
  return NetworkGraph(std::move(layers));
}

}  // namespace laid::nn
