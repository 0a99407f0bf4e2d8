#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>

#include "gdt/tensor.hpp"

namespace gdt {

/// A learnable tensor together with its gradient accumulator and momentum buffer.
struct ParamGroup {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor velocity;
    bool frozen = false;

    ParamGroup() = default;
    ParamGroup(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.dims()), velocity(value.dims()) {}

    void zero_grad() { grad.fill(0.0); }
};

struct SgdConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double weight_decay = 0.0005;
};

/// velocity <- momentum * velocity - lr * (grad + weight_decay * value); value += velocity.
/// Frozen groups keep their value and velocity; every group's gradient is cleared.
inline void sgd_step(ParamGroup& p, const SgdConfig& cfg) {
    if (!p.frozen) {
        double* v = p.value.data();
        double* vel = p.velocity.data();
        const double* g = p.grad.data();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            vel[i] = cfg.momentum * vel[i] - cfg.learning_rate * (g[i] + cfg.weight_decay * v[i]);
            v[i] += vel[i];
        }
    }
    p.zero_grad();
}

inline void sgd_step(std::span<ParamGroup* const> params, const SgdConfig& cfg) {
    for (ParamGroup* p : params) sgd_step(*p, cfg);
}

/// Centered uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Tensor uniform_init(Dims dims, std::size_t fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(dims));
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

}  // namespace gdt
