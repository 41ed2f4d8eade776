#include "lwfa/nn/engine.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lwfa/error.hpp"

namespace lwfa::nn::engine {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;
template <class T>
using ConstMapVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

struct ConvGeometry {
  std::size_t in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t k, pad;

  std::size_t patch() const { return in_c * k * k; }
  std::size_t out_area() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Network& net, std::size_t layer) {
  const auto& spec = net.layers()[layer];
  const auto& in = net.layer_input_shape(layer);
  const auto& out = net.layer_output_shape(layer);
  return {in[0], in[1], in[2], out[0], out[1], out[2], spec.kernel, spec.padding};
}

template <class T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const std::size_t area = g.out_area();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * area;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = in + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* col, T* in_grad) {
  const std::size_t area = g.out_area();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * area;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* dst = in_grad + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in_w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <class T>
void conv_forward(const ConvGeometry& g, std::span<const T> w, std::span<const T> b,
                  const T* in, std::size_t batch, T* out) {
  const std::size_t in_size = g.in_c * g.in_h * g.in_w;
  const std::size_t out_size = g.out_c * g.out_area();
  std::vector<T> col(g.patch() * g.out_area());
  ConstMapMat<T> wm(w.data(), g.out_c, g.patch());
  ConstMapVec<T> bv(b.data(), g.out_c);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(g, in + n * in_size, col.data());
    ConstMapMat<T> cm(col.data(), g.patch(), g.out_area());
    MapMat<T> om(out + n * out_size, g.out_c, g.out_area());
    om.noalias() = wm * cm;
    om.colwise() += bv;
  }
}

// Plain loops: Eigen's vectorized redux peels by address alignment, which makes
// the summation order (and the trained weights) depend on where the heap put things.
template <class T>
void add_row_sums(const T* m, std::size_t rows, std::size_t cols, T* acc) {
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
    acc[r] += s;
  }
}

template <class T>
void conv_backward(const ConvGeometry& g, std::span<const T> w, const T* in,
                   std::size_t batch, const T* grad_out, T* grad_in, T* grad_w, T* grad_b) {
  const std::size_t in_size = g.in_c * g.in_h * g.in_w;
  const std::size_t out_size = g.out_c * g.out_area();
  std::vector<T> col(g.patch() * g.out_area());
  std::vector<T> dcol(grad_in ? col.size() : 0);
  ConstMapMat<T> wm(w.data(), g.out_c, g.patch());
  MapMat<T> gw(grad_w, g.out_c, g.patch());
  for (std::size_t n = 0; n < batch; ++n) {
    ConstMapMat<T> go(grad_out + n * out_size, g.out_c, g.out_area());
    im2col(g, in + n * in_size, col.data());
    ConstMapMat<T> cm(col.data(), g.patch(), g.out_area());
    gw.noalias() += go * cm.transpose();
    add_row_sums(grad_out + n * out_size, g.out_c, g.out_area(), grad_b);
    if (grad_in) {
      MapMat<T> dc(dcol.data(), g.patch(), g.out_area());
      dc.noalias() = wm.transpose() * go;
      col2im_add(g, dcol.data(), grad_in + n * in_size);
    }
  }
}

template <class T>
void dense_forward(std::size_t din, std::size_t dout, std::span<const T> w,
                   std::span<const T> b, const T* in, std::size_t batch, T* out) {
  ConstMapMat<T> wm(w.data(), dout, din);
  ConstMapMat<T> im(in, batch, din);
  MapMat<T> om(out, batch, dout);
  om.noalias() = im * wm.transpose();
  om.rowwise() += ConstMapVec<T>(b.data(), dout).transpose();
}

template <class T>
void dense_backward(std::size_t din, std::size_t dout, std::span<const T> w, const T* in,
                    std::size_t batch, const T* grad_out, T* grad_in, T* grad_w, T* grad_b) {
  ConstMapMat<T> wm(w.data(), dout, din);
  ConstMapMat<T> im(in, batch, din);
  ConstMapMat<T> go(grad_out, batch, dout);
  MapMat<T>(grad_w, dout, din).noalias() += go.transpose() * im;
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < dout; ++c) grad_b[c] += grad_out[r * dout + c];
  }
  if (grad_in) MapMat<T>(grad_in, batch, din).noalias() = go * wm;
}

template <class T>
void pool_forward(const Shape& in_shape, const Shape& out_shape, std::size_t win,
                  const T* in, std::size_t batch, T* out) {
  const std::size_t c_n = in_shape[0], ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const T* plane = in + (n * c_n + c) * ih * iw;
      T* dst = out + (n * c_n + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T best = plane[(oy * win) * iw + ox * win];
          for (std::size_t dy = 0; dy < win; ++dy) {
            for (std::size_t dx = 0; dx < win; ++dx) {
              best = std::max(best, plane[(oy * win + dy) * iw + ox * win + dx]);
            }
          }
          dst[oy * ow + ox] = best;
        }
      }
    }
  }
}

// Gradient goes to the first maximal element of each window.
template <class T>
void pool_backward(const Shape& in_shape, const Shape& out_shape, std::size_t win,
                   const T* in, std::size_t batch, const T* grad_out, T* grad_in) {
  const std::size_t c_n = in_shape[0], ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  std::fill(grad_in, grad_in + batch * c_n * ih * iw, T(0));
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const std::size_t base = (n * c_n + c) * ih * iw;
      const T* plane = in + base;
      const T* go = grad_out + (n * c_n + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t arg = (oy * win) * iw + ox * win;
          for (std::size_t dy = 0; dy < win; ++dy) {
            for (std::size_t dx = 0; dx < win; ++dx) {
              const std::size_t idx = (oy * win + dy) * iw + ox * win + dx;
              if (plane[idx] > plane[arg]) arg = idx;
            }
          }
          grad_in[base + arg] += go[oy * ow + ox];
        }
      }
    }
  }
}

}  // namespace

template <class T>
void ParamGrads<T>::reset(const Network& net) {
  const auto& layers = net.layers();
  weights.resize(layers.size());
  biases.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    weights[i].assign(layers[i].weights.size(), T(0));
    biases[i].assign(layers[i].biases.size(), T(0));
  }
}

ParamViews<float> views_of(const Network& net) {
  ParamViews<float> v;
  for (const auto& layer : net.layers()) {
    v.weights.push_back(layer.weights.values());
    v.biases.push_back(layer.biases.values());
  }
  return v;
}

template <class T>
void forward_pass(const Network& net, const ParamViews<T>& params, std::span<const T> input,
                  std::size_t batch, std::vector<std::vector<T>>& outputs) {
  const auto& layers = net.layers();
  if (input.size() != batch * shape_volume(net.input_shape())) {
    throw DataError("input batch does not match the network input shape " +
                    shape_to_string(net.input_shape()));
  }
  outputs.resize(layers.size());
  const T* cur = input.data();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& spec = layers[i];
    const std::size_t in_vol = shape_volume(net.layer_input_shape(i));
    const std::size_t out_vol = shape_volume(net.layer_output_shape(i));
    auto& out = outputs[i];
    out.resize(batch * out_vol);
    switch (spec.kind) {
      case LayerKind::convolution:
        conv_forward(conv_geometry(net, i), params.weights[i], params.biases[i], cur, batch,
                     out.data());
        break;
      case LayerKind::dense:
        dense_forward(spec.in_channels, spec.out_channels, params.weights[i], params.biases[i],
                      cur, batch, out.data());
        break;
      case LayerKind::relu:
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = cur[j] > T(0) ? cur[j] : T(0);
        break;
      case LayerKind::max_pool:
        pool_forward(net.layer_input_shape(i), net.layer_output_shape(i), spec.pool, cur, batch,
                     out.data());
        break;
      case LayerKind::flatten:
        std::copy(cur, cur + batch * in_vol, out.begin());
        break;
    }
    cur = out.data();
  }
}

template <class T>
void backward_pass(const Network& net, const ParamViews<T>& params, std::span<const T> input,
                   std::size_t batch, const std::vector<std::vector<T>>& outputs,
                   std::span<const T> grad_logits,
                   const std::vector<std::vector<T>>& tap_grads, ParamGrads<T>& grads) {
  const auto& layers = net.layers();
  std::vector<T> grad(grad_logits.begin(), grad_logits.end());
  std::vector<T> grad_below;
  std::size_t tap = net.tap_count();
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& spec = layers[li];
    if (spec.is_tap) {
      if (!tap_grads.empty()) {
        const auto& extra = tap_grads[tap - 1];
        if (!extra.empty()) {
          for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += extra[j];
        }
      }
      --tap;
    }
    const T* in = li == 0 ? input.data() : outputs[li - 1].data();
    const bool need_input_grad = li > 0;
    grad_below.assign(need_input_grad ? batch * shape_volume(net.layer_input_shape(li)) : 0, T(0));
    T* gin = need_input_grad ? grad_below.data() : nullptr;
    switch (spec.kind) {
      case LayerKind::convolution:
        conv_backward(conv_geometry(net, li), params.weights[li], in, batch, grad.data(), gin,
                      grads.weights[li].data(), grads.biases[li].data());
        break;
      case LayerKind::dense:
        dense_backward(spec.in_channels, spec.out_channels, params.weights[li], in, batch,
                       grad.data(), gin, grads.weights[li].data(), grads.biases[li].data());
        break;
      case LayerKind::relu:
        if (gin) {
          for (std::size_t j = 0; j < grad_below.size(); ++j) gin[j] = in[j] > T(0) ? grad[j] : T(0);
        }
        break;
      case LayerKind::max_pool:
        if (gin) {
          pool_backward(net.layer_input_shape(li), net.layer_output_shape(li), spec.pool, in,
                        batch, grad.data(), gin);
        }
        break;
      case LayerKind::flatten:
        if (gin) std::copy(grad.begin(), grad.end(), grad_below.begin());
        break;
    }
    if (!need_input_grad) break;
    grad.swap(grad_below);
  }
}

template <class T>
double cross_entropy(std::span<const T> logits, std::span<const std::size_t> labels,
                     std::size_t num_classes, std::vector<T>& grad_logits) {
  const std::size_t batch = labels.size();
  grad_logits.assign(logits.size(), T(0));
  double total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> p(num_classes);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* z = logits.data() + n * num_classes;
    const double zmax = static_cast<double>(*std::max_element(z, z + num_classes));
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      p[c] = std::exp(static_cast<double>(z[c]) - zmax);
      sum += p[c];
    }
    const std::size_t y = labels[n];
    total += std::log(sum) + zmax - static_cast<double>(z[y]);
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double pc = p[c] / sum;
      grad_logits[n * num_classes + c] = static_cast<T>((pc - (c == y ? 1.0 : 0.0)) * inv_batch);
    }
  }
  const double loss = total * inv_batch;
  if (!std::isfinite(loss)) throw ComputationError("cross-entropy loss is not finite");
  return loss;
}

#define LWFA_INSTANTIATE(T)                                                                    \
  template struct ParamGrads<T>;                                                               \
  template void forward_pass<T>(const Network&, const ParamViews<T>&, std::span<const T>,      \
                                std::size_t, std::vector<std::vector<T>>&);                    \
  template void backward_pass<T>(const Network&, const ParamViews<T>&, std::span<const T>,     \
                                 std::size_t, const std::vector<std::vector<T>>&,              \
                                 std::span<const T>, const std::vector<std::vector<T>>&,       \
                                 ParamGrads<T>&);                                              \
  template double cross_entropy<T>(std::span<const T>, std::span<const std::size_t>,           \
                                   std::size_t, std::vector<T>&);

LWFA_INSTANTIATE(float)
LWFA_INSTANTIATE(double)

#undef LWFA_INSTANTIATE

}  // namespace lwfa::nn::engine
