#pragma once

#include <random>
#include <vector>

#include "gdt/layers.hpp"
#include "gdt/optim.hpp"

namespace gdt {

/// Per-location blend weights in (0, 1), H x W.
struct GateMap {
    Tensor values;

    GateMap() = default;
    explicit GateMap(Tensor t) : values(std::move(t)) { require_rank(values, 2, "GateMap"); }

    std::size_t height() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
    double operator()(std::size_t i, std::size_t j) const { return values[i * values.dim(1) + j]; }
};

/// flatten(X) -> fc1 -> relu -> fc2 -> sigmoid.
struct GateParams {
    ParamGroup fc1_weight;  // H*W*C x hidden
    ParamGroup fc1_bias;
    ParamGroup fc2_weight;  // hidden x H*W
    ParamGroup fc2_bias;    // zero at init, so an untrained gate sits near 0.5

    static GateParams create(std::size_t height, std::size_t width, std::size_t channels, std::size_t hidden,
                             std::mt19937_64& rng) {
        const std::size_t n = height * width * channels;
        GateParams p;
        p.fc1_weight = ParamGroup("gate.fc1.weight", uniform_init({n, hidden}, n, rng));
        p.fc1_bias = ParamGroup("gate.fc1.bias", Tensor({hidden}));
        p.fc2_weight = ParamGroup("gate.fc2.weight", uniform_init({hidden, height * width}, hidden, rng));
        p.fc2_bias = ParamGroup("gate.fc2.bias", Tensor({height * width}));
        return p;
    }

    std::vector<ParamGroup*> groups() { return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias}; }
};

struct GateCache {
    Tensor hidden_pre;
    Tensor hidden_act;
    Tensor out_pre;
    Tensor out;  // flattened sigmoid output
};

inline GateMap compute_gate(const Tensor& x, const GateParams& p, GateCache& cache) {
    require_rank(x, 3, "compute_gate input");
    const std::size_t hw = x.dim(0) * x.dim(1);
    if (p.fc1_weight.value.dim(0) != x.size() || p.fc2_bias.value.dim(0) != hw) {
        throw ShapeError("compute_gate: feature map " + dims_to_string(x.dims()) + " does not match gate params " +
                         dims_to_string(p.fc1_weight.value.dims()) + " / " + dims_to_string(p.fc2_weight.value.dims()));
    }
    cache.hidden_pre = fully_connected(x, p.fc1_weight.value, p.fc1_bias.value);
    cache.hidden_act = activate(cache.hidden_pre, Activation::relu);
    cache.out_pre = fully_connected(cache.hidden_act, p.fc2_weight.value, p.fc2_bias.value);
    cache.out = activate(cache.out_pre, Activation::sigmoid);
    return GateMap(cache.out.reshaped({x.dim(0), x.dim(1)}));
}

inline GateMap compute_gate(const Tensor& x, const GateParams& p) {
    GateCache cache;
    return compute_gate(x, p, cache);
}

inline void compute_gate_backward(const Tensor& x, GateParams& p, const GateCache& cache, const Tensor& grad_gate,
                                  Tensor* grad_x) {
    const Tensor grad_out_pre =
        activate_backward(cache.out_pre, cache.out, grad_gate.reshaped(cache.out.dims()), Activation::sigmoid);
    Tensor grad_hidden(cache.hidden_act.dims());
    fully_connected_backward(cache.hidden_act, p.fc2_weight.value, grad_out_pre, &grad_hidden, &p.fc2_weight.grad,
                             &p.fc2_bias.grad);
    const Tensor grad_hidden_pre =
        activate_backward(cache.hidden_pre, cache.hidden_act, grad_hidden, Activation::relu);
    fully_connected_backward(x, p.fc1_weight.value, grad_hidden_pre, grad_x, &p.fc1_weight.grad, &p.fc1_bias.grad);
}

inline void check_fuse(const Tensor& x, const Tensor& x_def, const GateMap& gate) {
    require_rank(x, 3, "fuse input");
    if (x_def.dims() != x.dims() || gate.values.rank() != 2 || gate.height() != x.dim(0) ||
        gate.width() != x.dim(1)) {
        throw ShapeError("fuse: standard " + dims_to_string(x.dims()) + ", deformed " + dims_to_string(x_def.dims()) +
                         ", gate " + dims_to_string(gate.values.dims()));
    }
}

/// Y = X' * s + X * (1 - s), with s broadcast over channels.
inline Tensor fuse(const Tensor& x, const Tensor& x_def, const GateMap& gate) {
    check_fuse(x, x_def, gate);
    const std::size_t hw = x.dim(0) * x.dim(1), c = x.dim(2);
    Tensor y(x.dims());
    for (std::size_t p = 0; p < hw; ++p) {
        const double s = gate.values[p];
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = p * c + k;
            // exact when both branches agree, independent of rounding in s
            y[i] = x_def[i] == x[i] ? x[i] : x_def[i] * s + x[i] * (1.0 - s);
        }
    }
    return y;
}

inline void fuse_backward(const Tensor& x, const Tensor& x_def, const GateMap& gate, const Tensor& grad_y,
                          Tensor* grad_x, Tensor* grad_x_def, Tensor* grad_gate) {
    check_fuse(x, x_def, gate);
    require_dims(grad_y, x.dims(), "fuse grad_y");
    const std::size_t hw = x.dim(0) * x.dim(1), c = x.dim(2);
    for (std::size_t p = 0; p < hw; ++p) {
        const double s = gate.values[p];
        double gs = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = p * c + k;
            if (grad_x) (*grad_x)[i] += grad_y[i] * (1.0 - s);
            if (grad_x_def) (*grad_x_def)[i] += grad_y[i] * s;
            gs += grad_y[i] * (x_def[i] - x[i]);
        }
        if (grad_gate) (*grad_gate)[p] += gs;
    }
}

inline double mean_gate(const GateMap& gate) {
    double s = 0.0;
    for (double v : gate.values.values()) s += v;
    return s / static_cast<double>(gate.values.size());
}

}  // namespace gdt
