#pragma once

// The tracker network: conv front end -> {standard, deformed, gated} fusion ->
// three fully connected layers ending in target/background logits.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gdt/config.hpp"
#include "gdt/deform.hpp"
#include "gdt/gate.hpp"
#include "gdt/gradcheck.hpp"
#include "gdt/layers.hpp"
#include "gdt/optim.hpp"

namespace gdt {

enum class Variant { baseline, deform, gate };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::deform: return "deform";
        case Variant::gate: return "gate";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "deform") return Variant::deform;
    if (s == "gate") return Variant::gate;
    throw ValidationError("unknown variant '" + s + "' (expected baseline, deform or gate)");
}

/// Which learning rate a parameter group trains with.
enum class Role { front_conv, fusion_conv, fusion_fc, head_fc, head_last };

struct ConvLayer {
    ParamGroup kernel;
    ParamGroup bias;
    std::size_t stride = 1;
    std::size_t pad = 0;
};

struct DenseLayer {
    ParamGroup weight;
    ParamGroup bias;
};

/// Ridge box regressor on flattened front-end features.
struct BoxRegressor {
    Tensor weights;    // d x 4
    Tensor intercept;  // 4
};

struct TrackerModel {
    NetworkConfig shape;
    Variant variant = Variant::gate;
    ConvLayer conv1, conv2, conv3;
    DeformParams deform;
    GateParams gate;
    DenseLayer fc1, fc2, fc3;
    std::optional<BoxRegressor> bbox_reg;

    static TrackerModel create(const NetworkConfig& cfg, Variant variant, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        TrackerModel m;
        m.shape = cfg;
        m.variant = variant;
        auto conv = [&](const char* name, std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride) {
            ConvLayer l;
            l.kernel = ParamGroup(std::string(name) + ".kernel", uniform_init({k, k, cin, cout}, k * k * cin, rng));
            l.bias = ParamGroup(std::string(name) + ".bias", Tensor({cout}));
            l.stride = stride;
            return l;
        };
        auto dense = [&](const char* name, std::size_t in, std::size_t out) {
            DenseLayer l;
            l.weight = ParamGroup(std::string(name) + ".weight", uniform_init({in, out}, in, rng));
            l.bias = ParamGroup(std::string(name) + ".bias", Tensor({out}));
            return l;
        };
        m.conv1 = conv("conv1", 5, cfg.input_channels, cfg.conv1_channels, 2);
        m.conv2 = conv("conv2", 3, cfg.conv1_channels, cfg.conv2_channels, 2);
        m.conv3 = conv("conv3", 3, cfg.conv2_channels, cfg.feature_channels, 1);
        const std::size_t g = m.feature_grid();
        m.deform = DeformParams::create(g, g, cfg.feature_channels, cfg.deform_hidden_channels, rng);
        m.gate = GateParams::create(g, g, cfg.feature_channels, cfg.gate_hidden, rng);
        const std::size_t flat = g * g * cfg.feature_channels;
        m.fc1 = dense("fc1", flat, cfg.head_hidden1);
        m.fc2 = dense("fc2", cfg.head_hidden1, cfg.head_hidden2);
        m.fc3 = dense("fc3", cfg.head_hidden2, 2);
        return m;
    }

    std::size_t feature_grid() const {
        const std::size_t s1 = (shape.patch_size - 5) / 2 + 1;
        const std::size_t s2 = (s1 - 3) / 2 + 1;
        return s2 - 2;
    }
    Dims feature_dims() const { return {feature_grid(), feature_grid(), shape.feature_channels}; }
    Dims input_dims() const { return {shape.patch_size, shape.patch_size, shape.input_channels}; }

    std::vector<ParamGroup*> front_end_groups() {
        return {&conv1.kernel, &conv1.bias, &conv2.kernel, &conv2.bias, &conv3.kernel, &conv3.bias};
    }
    std::vector<ParamGroup*> head_groups() {
        return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias, &fc3.weight, &fc3.bias};
    }

    /// Every parameter group with its learning-rate role.
    std::vector<std::pair<ParamGroup*, Role>> all_groups() {
        std::vector<std::pair<ParamGroup*, Role>> out;
        for (ParamGroup* p : front_end_groups()) out.emplace_back(p, Role::front_conv);
        out.emplace_back(&deform.conv_kernel, Role::fusion_conv);
        out.emplace_back(&deform.conv_bias, Role::fusion_conv);
        out.emplace_back(&deform.fc_weight, Role::fusion_fc);
        out.emplace_back(&deform.fc_bias, Role::fusion_fc);
        for (ParamGroup* p : gate.groups()) out.emplace_back(p, Role::fusion_fc);
        out.emplace_back(&fc1.weight, Role::head_fc);
        out.emplace_back(&fc1.bias, Role::head_fc);
        out.emplace_back(&fc2.weight, Role::head_fc);
        out.emplace_back(&fc2.bias, Role::head_fc);
        out.emplace_back(&fc3.weight, Role::head_last);
        out.emplace_back(&fc3.bias, Role::head_last);
        return out;
    }

    /// Whether the forward pass of the current variant reads `p`.
    bool uses(const ParamGroup* p) {
        if (variant == Variant::gate) return true;
        for (ParamGroup* g : gate.groups()) {
            if (g == p) return false;
        }
        if (variant == Variant::deform) return true;
        for (ParamGroup* g : deform.groups()) {
            if (g == p) return false;
        }
        return true;
    }

    void freeze_front_end(bool frozen = true) {
        for (ParamGroup* p : front_end_groups()) p->frozen = frozen;
    }
    bool front_end_frozen() const { return conv1.kernel.frozen; }
};

struct FrontEndCache {
    Tensor input, pre1, act1, pre2, act2;
};

struct FusionCache {
    OffsetCache offset_cache;
    OffsetField offsets;
    Tensor deformed;
    GateCache gate_cache;
    std::optional<GateMap> gate;
    Tensor fused;
    Tensor h1_pre, h1_act, h2_pre, h2_act;
    Tensor logits;
};

inline Tensor front_end_forward(const TrackerModel& m, const Tensor& input, FrontEndCache* cache) {
    require_dims(input, m.input_dims(), "tracker input patch");
    Tensor pre1 = conv2d(input, m.conv1.kernel.value, m.conv1.bias.value, m.conv1.stride, m.conv1.pad);
    Tensor act1 = activate(pre1, Activation::relu);
    Tensor pre2 = conv2d(act1, m.conv2.kernel.value, m.conv2.bias.value, m.conv2.stride, m.conv2.pad);
    Tensor act2 = activate(pre2, Activation::relu);
    Tensor features = conv2d(act2, m.conv3.kernel.value, m.conv3.bias.value, m.conv3.stride, m.conv3.pad);
    if (cache) {
        cache->input = input;
        cache->pre1 = std::move(pre1);
        cache->act1 = std::move(act1);
        cache->pre2 = std::move(pre2);
        cache->act2 = std::move(act2);
    }
    return features;
}

inline void front_end_backward(TrackerModel& m, const FrontEndCache& c, const Tensor& grad_features) {
    Tensor g_act2(c.act2.dims());
    conv2d_backward(c.act2, m.conv3.kernel.value, m.conv3.stride, m.conv3.pad, grad_features, &g_act2,
                    &m.conv3.kernel.grad, &m.conv3.bias.grad);
    const Tensor g_pre2 = activate_backward(c.pre2, c.act2, g_act2, Activation::relu);
    Tensor g_act1(c.act1.dims());
    conv2d_backward(c.act1, m.conv2.kernel.value, m.conv2.stride, m.conv2.pad, g_pre2, &g_act1, &m.conv2.kernel.grad,
                    &m.conv2.bias.grad);
    const Tensor g_pre1 = activate_backward(c.pre1, c.act1, g_act1, Activation::relu);
    conv2d_backward(c.input, m.conv1.kernel.value, m.conv1.stride, m.conv1.pad, g_pre1, nullptr, &m.conv1.kernel.grad,
                    &m.conv1.bias.grad);
}

/// Fusion stage and classifier head on front-end features. The baseline
/// classifies X, the deform variant X', the gate variant the gated blend.
inline const Tensor& fusion_head_forward(const TrackerModel& m, const Tensor& features, FusionCache& c) {
    require_dims(features, m.feature_dims(), "tracker features");
    c.gate.reset();
    const Tensor* head_in = &features;
    if (m.variant != Variant::baseline) {
        c.offsets = regress_offsets(features, m.deform, c.offset_cache);
        c.deformed = deform_features(features, c.offsets);
        head_in = &c.deformed;
        if (m.variant == Variant::gate) {
            c.gate = compute_gate(features, m.gate, c.gate_cache);
            c.fused = fuse(features, c.deformed, *c.gate);
            head_in = &c.fused;
        }
    }
    c.h1_pre = fully_connected(*head_in, m.fc1.weight.value, m.fc1.bias.value);
    c.h1_act = activate(c.h1_pre, Activation::relu);
    c.h2_pre = fully_connected(c.h1_act, m.fc2.weight.value, m.fc2.bias.value);
    c.h2_act = activate(c.h2_pre, Activation::relu);
    c.logits = fully_connected(c.h2_act, m.fc3.weight.value, m.fc3.bias.value);
    return c.logits;
}

/// Accumulates gradients of every fusion/head group; adds dL/dX to `grad_features` if given.
inline void fusion_head_backward(TrackerModel& m, const Tensor& features, const FusionCache& c,
                                 const Tensor& grad_logits, Tensor* grad_features) {
    Tensor g_h2(c.h2_act.dims());
    fully_connected_backward(c.h2_act, m.fc3.weight.value, grad_logits, &g_h2, &m.fc3.weight.grad, &m.fc3.bias.grad);
    const Tensor g_h2_pre = activate_backward(c.h2_pre, c.h2_act, g_h2, Activation::relu);
    Tensor g_h1(c.h1_act.dims());
    fully_connected_backward(c.h1_act, m.fc2.weight.value, g_h2_pre, &g_h1, &m.fc2.weight.grad, &m.fc2.bias.grad);
    const Tensor g_h1_pre = activate_backward(c.h1_pre, c.h1_act, g_h1, Activation::relu);

    const Tensor& head_in = m.variant == Variant::baseline ? features
                            : m.variant == Variant::deform ? c.deformed
                                                           : c.fused;
    Tensor g_head_in(features.dims());
    fully_connected_backward(head_in, m.fc1.weight.value, g_h1_pre, &g_head_in, &m.fc1.weight.grad, &m.fc1.bias.grad);

    if (m.variant == Variant::baseline) {
        if (grad_features) accumulate(*grad_features, g_head_in);
        return;
    }
    Tensor g_x(features.dims());
    Tensor g_def(features.dims());
    if (m.variant == Variant::gate) {
        Tensor g_gate({features.dim(0) * features.dim(1)});
        fuse_backward(features, c.deformed, *c.gate, g_head_in, &g_x, &g_def, &g_gate);
        compute_gate_backward(features, m.gate, c.gate_cache, g_gate, &g_x);
    } else {
        g_def = std::move(g_head_in);
    }
    Tensor g_offsets(c.offsets.offsets.dims());
    deform_features_backward(features, c.offsets, g_def, &g_x, &g_offsets);
    regress_offsets_backward(features, m.deform, c.offset_cache, g_offsets, &g_x);
    if (grad_features) accumulate(*grad_features, g_x);
}

struct ForwardResult {
    Tensor logits;
    std::optional<GateMap> gate;
};

inline ForwardResult forward(const TrackerModel& m, const Tensor& input) {
    const Tensor features = front_end_forward(m, input, nullptr);
    FusionCache c;
    fusion_head_forward(m, features, c);
    return {c.logits, c.gate};
}

/// Piecewise-linear regime of one full forward pass (for kink-aware gradient checks).
inline std::uint64_t forward_regime(const FrontEndCache& f, const FusionCache& c, Variant v) {
    std::uint64_t h = 0x1234;
    h = relu_regime(h, f.pre1);
    h = relu_regime(h, f.pre2);
    if (v != Variant::baseline) {
        h = relu_regime(h, c.offset_cache.conv_pre);
        h = sampling_regime(h, c.offsets);
        if (v == Variant::gate) h = relu_regime(h, c.gate_cache.hidden_pre);
    }
    h = relu_regime(h, c.h1_pre);
    h = relu_regime(h, c.h2_pre);
    return h;
}

}  // namespace gdt
