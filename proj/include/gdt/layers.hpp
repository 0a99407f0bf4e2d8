#pragma once

// Forward and hand-paired backward passes for the primitives the tracker
// network is built from. Backward functions *accumulate* into the gradient
// tensors they are given; pass nullptr to skip a gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "gdt/tensor.hpp"

namespace gdt {

struct ConvGeometry {
    std::size_t in_h, in_w, in_c, k, out_c, stride, pad, out_h, out_w;
};

inline ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                                  std::size_t pad) {
    require_rank(input, 3, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    require_rank(bias, 1, "conv2d bias");
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    ConvGeometry g{};
    g.in_h = input.dim(0);
    g.in_w = input.dim(1);
    g.in_c = input.dim(2);
    g.k = kernel.dim(0);
    g.out_c = kernel.dim(3);
    g.stride = stride;
    g.pad = pad;
    if (kernel.dim(1) != g.k || kernel.dim(2) != g.in_c) {
        throw ShapeError("conv2d: kernel " + dims_to_string(kernel.dims()) + " incompatible with input " +
                         dims_to_string(input.dims()));
    }
    if (bias.dim(0) != g.out_c) {
        throw ShapeError("conv2d: bias " + dims_to_string(bias.dims()) + " does not match kernel " +
                         dims_to_string(kernel.dims()));
    }
    const std::size_t span_h = g.in_h + 2 * pad;
    const std::size_t span_w = g.in_w + 2 * pad;
    if (span_h < g.k || span_w < g.k || (span_h - g.k) % stride != 0 || (span_w - g.k) % stride != 0) {
        throw ShapeError("conv2d: input " + dims_to_string(input.dims()) + " with kernel " + std::to_string(g.k) +
                         ", pad " + std::to_string(pad) + ", stride " + std::to_string(stride) +
                         " does not tile evenly");
    }
    g.out_h = (span_h - g.k) / stride + 1;
    g.out_w = (span_w - g.k) / stride + 1;
    return g;
}

/// 2-D convolution (cross-correlation) with zero padding.
/// input H x W x Cin, kernel k x k x Cin x Cout, bias Cout.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                     std::size_t pad) {
    const ConvGeometry g = conv_geometry(input, kernel, bias, stride, pad);
    Tensor out({g.out_h, g.out_w, g.out_c});
    const double* in = input.data();
    const double* ker = kernel.data();
    double* o = out.data();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            double* orow = o + (oy * g.out_w + ox) * g.out_c;
            std::copy(bias.data(), bias.data() + g.out_c, orow);
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                    const double* ipix = in + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                    const double* kblock = ker + (ky * g.k + kx) * g.in_c * g.out_c;
                    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                        const double v = ipix[ci];
                        if (v == 0.0) continue;
                        const double* krow = kblock + ci * g.out_c;
                        for (std::size_t co = 0; co < g.out_c; ++co) orow[co] += v * krow[co];
                    }
                }
            }
        }
    }
    return out;
}

inline void conv2d_backward(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad,
                            const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias) {
    const Tensor bias_shape({kernel.rank() == 4 ? kernel.dim(3) : 1});
    const ConvGeometry g = conv_geometry(input, kernel, bias_shape, stride, pad);
    require_dims(grad_out, {g.out_h, g.out_w, g.out_c}, "conv2d grad_out");
    if (grad_input) require_dims(*grad_input, input.dims(), "conv2d grad_input");
    if (grad_kernel) require_dims(*grad_kernel, kernel.dims(), "conv2d grad_kernel");
    if (grad_bias) require_dims(*grad_bias, {g.out_c}, "conv2d grad_bias");

    const double* in = input.data();
    const double* ker = kernel.data();
    const double* go = grad_out.data();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const double* grow = go + (oy * g.out_w + ox) * g.out_c;
            if (grad_bias) {
                double* gb = grad_bias->data();
                for (std::size_t co = 0; co < g.out_c; ++co) gb[co] += grow[co];
            }
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                    const std::size_t pix = (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                    const std::size_t kofs = (ky * g.k + kx) * g.in_c * g.out_c;
                    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                        const double* krow = ker + kofs + ci * g.out_c;
                        if (grad_input) {
                            double acc = 0.0;
                            for (std::size_t co = 0; co < g.out_c; ++co) acc += krow[co] * grow[co];
                            (*grad_input)[pix + ci] += acc;
                        }
                        if (grad_kernel) {
                            const double v = in[pix + ci];
                            double* gk = grad_kernel->data() + kofs + ci * g.out_c;
                            for (std::size_t co = 0; co < g.out_c; ++co) gk[co] += v * grow[co];
                        }
                    }
                }
            }
        }
    }
}

/// out_j = sum_i input_i * weight_ij + bias_j, with the input flattened.
inline Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "fully_connected weight");
    const std::size_t n = weight.dim(0);
    const std::size_t m = weight.dim(1);
    if (input.size() != n) {
        throw ShapeError("fully_connected: input " + dims_to_string(input.dims()) + " (length " +
                         std::to_string(input.size()) + ") vs weight " + dims_to_string(weight.dims()));
    }
    require_dims(bias, {m}, "fully_connected bias");
    Tensor out({m});
    double* o = out.data();
    std::copy(bias.data(), bias.data() + m, o);
    const double* w = weight.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = input[i];
        if (v == 0.0) continue;
        const double* wrow = w + i * m;
        for (std::size_t j = 0; j < m; ++j) o[j] += v * wrow[j];
    }
    return out;
}

inline void fully_connected_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                                     Tensor* grad_input, Tensor* grad_weight, Tensor* grad_bias) {
    require_rank(weight, 2, "fully_connected weight");
    const std::size_t n = weight.dim(0);
    const std::size_t m = weight.dim(1);
    if (input.size() != n || grad_out.size() != m) {
        throw ShapeError("fully_connected_backward: input " + dims_to_string(input.dims()) + ", weight " +
                         dims_to_string(weight.dims()) + ", grad_out " + dims_to_string(grad_out.dims()));
    }
    const double* w = weight.data();
    const double* g = grad_out.data();
    if (grad_bias) {
        for (std::size_t j = 0; j < m; ++j) (*grad_bias)[j] += g[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* wrow = w + i * m;
        if (grad_input) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += wrow[j] * g[j];
            (*grad_input)[i] += acc;
        }
        if (grad_weight) {
            const double v = input[i];
            if (v == 0.0) continue;
            double* gw = grad_weight->data() + i * m;
            for (std::size_t j = 0; j < m; ++j) gw[j] += v * g[j];
        }
    }
}

enum class Activation { relu, sigmoid };

/// Logistic function clamped to the open interval (0, 1): saturated inputs map
/// to the nearest representable value inside the interval, never to 0 or 1.
inline double sigmoid(double x) noexcept {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(s, lo, hi);
}

inline Tensor activate(const Tensor& input, Activation kind) {
    Tensor out = input;
    double* o = out.data();
    if (kind == Activation::relu) {
        for (std::size_t i = 0; i < out.size(); ++i) o[i] = o[i] > 0.0 ? o[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) o[i] = sigmoid(o[i]);
    }
    return out;
}

/// Needs the forward input (relu) or the forward output (sigmoid).
/// relu's subgradient at exactly zero is taken as zero.
inline Tensor activate_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out, Activation kind) {
    if (grad_out.size() != input.size() || output.size() != input.size()) {
        throw ShapeError("activate_backward: " + dims_to_string(input.dims()) + " vs grad " +
                         dims_to_string(grad_out.dims()));
    }
    Tensor g(input.dims());
    if (kind == Activation::relu) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * output[i] * (1.0 - output[i]);
    }
    return g;
}

struct SoftmaxXent {
    double loss;
    Tensor grad_logits;
};

/// Two-way softmax cross-entropy. Label 1 is the target class.
inline SoftmaxXent softmax_xent(const Tensor& logits, int label) {
    if (logits.size() != 2) throw ShapeError("softmax_xent: expected 2 logits, got " + dims_to_string(logits.dims()));
    if (label != 0 && label != 1) throw ValidationError("softmax_xent: label must be 0 or 1");
    const double mx = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - mx);
    const double e1 = std::exp(logits[1] - mx);
    const double z = e0 + e1;
    const double p[2] = {e0 / z, e1 / z};
    SoftmaxXent r{-(logits[static_cast<std::size_t>(label)] - mx - std::log(z)), Tensor({2})};
    r.grad_logits[0] = p[0] - (label == 0 ? 1.0 : 0.0);
    r.grad_logits[1] = p[1] - (label == 1 ? 1.0 : 0.0);
    return r;
}

/// Probability of class 1 under a two-way softmax.
inline double positive_probability(const Tensor& logits) {
    return sigmoid(logits[1] - logits[0]);
}

}  // namespace gdt
