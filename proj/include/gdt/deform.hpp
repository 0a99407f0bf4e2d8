#pragma once

// Deformable feature resampling: a small conv -> relu -> fc branch regresses
// one fractional (dy, dx) displacement per feature-map location, and every
// location is then re-read from the map by bilinear interpolation at its
// displaced position. All C channels of a location share one displacement.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gdt/gradcheck.hpp"
#include "gdt/layers.hpp"
#include "gdt/optim.hpp"

namespace gdt {

/// H x W grid of (dy, dx) displacements, stored as an H x W x 2 tensor.
struct OffsetField {
    Tensor offsets;

    OffsetField() = default;
    OffsetField(std::size_t height, std::size_t width) : offsets({height, width, 2}) {}
    explicit OffsetField(Tensor t) : offsets(std::move(t)) { require_rank(offsets, 3, "OffsetField"); }

    std::size_t height() const { return offsets.dim(0); }
    std::size_t width() const { return offsets.dim(1); }
    double dy(std::size_t i, std::size_t j) const { return offsets.at(i, j, 0); }
    double dx(std::size_t i, std::size_t j) const { return offsets.at(i, j, 1); }
};

struct DeformParams {
    ParamGroup conv_kernel;  // 3 x 3 x C x Cd
    ParamGroup conv_bias;    // Cd
    ParamGroup fc_weight;    // (H*W*Cd) x (H*W*2)
    ParamGroup fc_bias;      // H*W*2

    /// Conv weights uniform in +-1/sqrt(fan_in); the fc layer starts at zero so
    /// the regressed field is identically zero.
    static DeformParams create(std::size_t height, std::size_t width, std::size_t channels,
                               std::size_t hidden_channels, std::mt19937_64& rng) {
        DeformParams p;
        p.conv_kernel = ParamGroup("deform.conv.kernel",
                                   uniform_init({3, 3, channels, hidden_channels}, 9 * channels, rng));
        p.conv_bias = ParamGroup("deform.conv.bias", Tensor({hidden_channels}));
        p.fc_weight = ParamGroup("deform.fc.weight", Tensor({height * width * hidden_channels, height * width * 2}));
        p.fc_bias = ParamGroup("deform.fc.bias", Tensor({height * width * 2}));
        return p;
    }

    std::vector<ParamGroup*> groups() { return {&conv_kernel, &conv_bias, &fc_weight, &fc_bias}; }
};

struct OffsetCache {
    Tensor conv_pre;
    Tensor conv_act;
};

inline void check_deform_input(const Tensor& x, const DeformParams& p) {
    require_rank(x, 3, "deform input");
    const std::size_t hw = x.dim(0) * x.dim(1);
    if (p.conv_kernel.value.dim(2) != x.dim(2) || p.fc_bias.value.dim(0) != hw * 2 ||
        p.fc_weight.value.dim(0) != hw * p.conv_kernel.value.dim(3)) {
        throw ShapeError("regress_offsets: feature map " + dims_to_string(x.dims()) + " does not match deform params " +
                         dims_to_string(p.conv_kernel.value.dims()) + " / " + dims_to_string(p.fc_weight.value.dims()));
    }
}

inline OffsetField regress_offsets(const Tensor& x, const DeformParams& p, OffsetCache& cache) {
    check_deform_input(x, p);
    cache.conv_pre = conv2d(x, p.conv_kernel.value, p.conv_bias.value, 1, 1);
    cache.conv_act = activate(cache.conv_pre, Activation::relu);
    Tensor flat = fully_connected(cache.conv_act, p.fc_weight.value, p.fc_bias.value);
    return OffsetField(flat.reshaped({x.dim(0), x.dim(1), 2}));
}

inline OffsetField regress_offsets(const Tensor& x, const DeformParams& p) {
    OffsetCache cache;
    return regress_offsets(x, p, cache);
}

/// Accumulates parameter gradients into `p` and, if given, the input gradient into `grad_x`.
inline void regress_offsets_backward(const Tensor& x, DeformParams& p, const OffsetCache& cache,
                                     const Tensor& grad_offsets, Tensor* grad_x) {
    Tensor grad_act(cache.conv_act.dims());
    fully_connected_backward(cache.conv_act, p.fc_weight.value, grad_offsets, &grad_act, &p.fc_weight.grad,
                             &p.fc_bias.grad);
    const Tensor grad_pre = activate_backward(cache.conv_pre, cache.conv_act, grad_act, Activation::relu);
    conv2d_backward(x, p.conv_kernel.value, 1, 1, grad_pre, grad_x, &p.conv_kernel.grad, &p.conv_bias.grad);
}

namespace detail {

struct BilinearCell {
    long y0, x0;
    double fy, fx;
    bool any;  // false when no neighbour lies inside the grid
};

inline BilinearCell bilinear_cell(std::size_t height, std::size_t width, double y, double x) {
    BilinearCell c{0, 0, 0.0, 0.0, false};
    if (!(y > -1.0 && y < static_cast<double>(height) && x > -1.0 && x < static_cast<double>(width))) return c;
    const double fy0 = std::floor(y);
    const double fx0 = std::floor(x);
    c.y0 = static_cast<long>(fy0);
    c.x0 = static_cast<long>(fx0);
    c.fy = y - fy0;
    c.fx = x - fx0;
    c.any = true;
    return c;
}

inline bool in_grid(long y, long x, std::size_t height, std::size_t width) {
    return y >= 0 && x >= 0 && y < static_cast<long>(height) && x < static_cast<long>(width);
}

}  // namespace detail

/// Bilinear read of all channels of `x` at fractional (dy, dx). Cells outside the
/// grid contribute zero, so a location one or more cells outside reads zeros.
inline Tensor bilinear_sample(const Tensor& x, double dy, double dx) {
    require_rank(x, 3, "bilinear_sample input");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out({c});
    const auto cell = detail::bilinear_cell(h, w, dy, dx);
    if (!cell.any) return out;
    const double wy[2] = {1.0 - cell.fy, cell.fy};
    const double wx[2] = {1.0 - cell.fx, cell.fx};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const long yy = cell.y0 + a, xx = cell.x0 + b;
            const double wt = wy[a] * wx[b];
            if (!detail::in_grid(yy, xx, h, w) || wt == 0.0) continue;
            const double* px = x.data() + (static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)) * c;
            for (std::size_t k = 0; k < c; ++k) out[k] += wt * px[k];
        }
    }
    return out;
}

inline void check_field(const Tensor& x, const OffsetField& field, const char* what) {
    require_rank(x, 3, what);
    if (field.offsets.rank() != 3 || field.height() != x.dim(0) || field.width() != x.dim(1) ||
        field.offsets.dim(2) != 2) {
        throw ShapeError(std::string(what) + ": offsets " + dims_to_string(field.offsets.dims()) +
                         " do not match feature map " + dims_to_string(x.dims()));
    }
}

/// out(i, j) = bilinear_sample(x, i + dy(i, j), j + dx(i, j)).
inline Tensor deform_features(const Tensor& x, const OffsetField& field) {
    check_field(x, field, "deform_features");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out(x.dims());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const Tensor v = bilinear_sample(x, static_cast<double>(i) + field.dy(i, j),
                                             static_cast<double>(j) + field.dx(i, j));
            std::copy(v.data(), v.data() + c, out.data() + (i * w + j) * c);
        }
    }
    return out;
}

/// Gradients of deform_features. The offset gradient uses the right-sided
/// derivative at integer sample positions.
inline void deform_features_backward(const Tensor& x, const OffsetField& field, const Tensor& grad_out,
                                     Tensor* grad_x, Tensor* grad_offsets) {
    check_field(x, field, "deform_features_backward");
    require_dims(grad_out, x.dims(), "deform_features grad_out");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    auto value = [&](long yy, long xx, std::size_t k) {
        return detail::in_grid(yy, xx, h, w) ? x[(static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)) * c + k]
                                             : 0.0;
    };
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const auto cell = detail::bilinear_cell(h, w, static_cast<double>(i) + field.dy(i, j),
                                                    static_cast<double>(j) + field.dx(i, j));
            if (!cell.any) continue;
            const double* g = grad_out.data() + (i * w + j) * c;
            const double wy[2] = {1.0 - cell.fy, cell.fy};
            const double wx[2] = {1.0 - cell.fx, cell.fx};
            if (grad_x) {
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        const long yy = cell.y0 + a, xx = cell.x0 + b;
                        if (!detail::in_grid(yy, xx, h, w)) continue;
                        const double wt = wy[a] * wx[b];
                        double* gx = grad_x->data() + (static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)) * c;
                        for (std::size_t k = 0; k < c; ++k) gx[k] += wt * g[k];
                    }
                }
            }
            if (grad_offsets) {
                double gdy = 0.0, gdx = 0.0;
                for (std::size_t k = 0; k < c; ++k) {
                    const double v00 = value(cell.y0, cell.x0, k), v01 = value(cell.y0, cell.x0 + 1, k);
                    const double v10 = value(cell.y0 + 1, cell.x0, k), v11 = value(cell.y0 + 1, cell.x0 + 1, k);
                    gdy += g[k] * (wx[0] * (v10 - v00) + wx[1] * (v11 - v01));
                    gdx += g[k] * (wy[0] * (v01 - v00) + wy[1] * (v11 - v10));
                }
                grad_offsets->at(i, j, 0) += gdy;
                grad_offsets->at(i, j, 1) += gdx;
            }
        }
    }
}

/// Fingerprint of the bilinear cells an offset field selects.
inline std::uint64_t sampling_regime(std::uint64_t h, const OffsetField& field) {
    for (std::size_t i = 0; i < field.height(); ++i) {
        for (std::size_t j = 0; j < field.width(); ++j) {
            h = hash_mix(h, static_cast<std::uint64_t>(std::floor(static_cast<double>(i) + field.dy(i, j)) + 1e6));
            h = hash_mix(h, static_cast<std::uint64_t>(std::floor(static_cast<double>(j) + field.dx(i, j)) + 1e6));
        }
    }
    return h;
}

}  // namespace gdt
