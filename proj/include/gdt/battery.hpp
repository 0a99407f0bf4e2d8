#pragma once

// Finite-difference gradient battery over every differentiable building block
// and the end-to-end gate-variant network. Each check projects the output onto
// a fixed random tensor R, so loss = <R, f(.)> and backprop starts from R.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gdt/deform.hpp"
#include "gdt/gate.hpp"
#include "gdt/gradcheck.hpp"
#include "gdt/layers.hpp"
#include "gdt/network.hpp"

namespace gdt {

struct BatteryEntry {
    std::string name;
    std::size_t seeds = 0;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    bool passed = false;
};

struct BatteryOptions {
    std::size_t seeds = 20;
    double eps = 1e-5;
    double tolerance = 1e-4;
};

namespace detail {

inline Tensor random_tensor(const Dims& dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(dims);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.values()) v = u(rng);
    return t;
}

inline double project(const Tensor& r, const Tensor& out) {
    if (r.size() != out.size()) throw ShapeError("project: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * out[i];
    return s;
}

/// One seeded instance: parameter groups plus a loss that fills every group's grad.
struct Instance {
    std::vector<ParamGroup*> params;
    std::function<LossEval()> loss;
};

inline void accumulate_report(BatteryEntry& e, const GradCheckReport& r) {
    e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
    e.checked += r.checked;
    e.skipped += r.skipped;
}

inline BatteryEntry run_check(const std::string& name, const BatteryOptions& opt,
                              const std::function<void(std::mt19937_64&, const std::function<void(Instance&)>&)>& make) {
    BatteryEntry e;
    e.name = name;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        std::mt19937_64 rng(0xB0A7ULL * (s + 1) + std::hash<std::string>{}(name));
        make(rng, [&](Instance& inst) {
            for (ParamGroup* p : inst.params) {
                const auto rep = grad_check_report(
                    [&](ParamGroup&) {
                        for (ParamGroup* q : inst.params) q->zero_grad();
                        return inst.loss();
                    },
                    *p, opt.eps);
                accumulate_report(e, rep);
            }
        });
        ++e.seeds;
    }
    e.passed = e.checked > 0 && e.max_rel_error <= opt.tolerance;
    return e;
}

/// A small network so every coordinate can be probed within the time budget.
inline NetworkConfig battery_network() {
    NetworkConfig n;
    n.conv1_channels = 3;
    n.conv2_channels = 4;
    n.feature_channels = 4;
    n.deform_hidden_channels = 3;
    n.gate_hidden = 6;
    n.head_hidden1 = 10;
    n.head_hidden2 = 6;
    return n;
}

}  // namespace detail

inline std::vector<BatteryEntry> run_gradient_battery(const BatteryOptions& opt = {}) {
    using detail::Instance;
    using detail::project;
    using detail::random_tensor;
    std::vector<BatteryEntry> out;

    struct ConvCase {
        const char* name;
        std::size_t in, k, cin, cout, stride, pad;
    };
    for (const ConvCase& cc : {ConvCase{"conv2d (stride 1, pad 1)", 5, 3, 2, 3, 1, 1},
                               ConvCase{"conv2d (stride 2, pad 0)", 7, 3, 2, 3, 2, 0},
                               ConvCase{"conv2d (5x5, stride 2)", 9, 5, 3, 2, 2, 0}}) {
        out.push_back(detail::run_check(cc.name, opt, [&](std::mt19937_64& rng, const auto& run) {
            ParamGroup x("input", random_tensor({cc.in, cc.in, cc.cin}, rng));
            ParamGroup k("kernel", random_tensor({cc.k, cc.k, cc.cin, cc.cout}, rng));
            ParamGroup b("bias", random_tensor({cc.cout}, rng));
            const std::size_t o = (cc.in + 2 * cc.pad - cc.k) / cc.stride + 1;
            const Tensor r = random_tensor({o, o, cc.cout}, rng);
            Instance inst{{&x, &k, &b}, [&] {
                              const Tensor y = conv2d(x.value, k.value, b.value, cc.stride, cc.pad);
                              conv2d_backward(x.value, k.value, cc.stride, cc.pad, r, &x.grad, &k.grad, &b.grad);
                              return LossEval{project(r, y), 0};
                          }};
            run(inst);
        }));
    }

    out.push_back(detail::run_check("fully_connected", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup x("input", random_tensor({2, 3, 2}, rng));
        ParamGroup w("weight", random_tensor({12, 5}, rng));
        ParamGroup b("bias", random_tensor({5}, rng));
        const Tensor r = random_tensor({5}, rng);
        Instance inst{{&x, &w, &b}, [&] {
                          const Tensor y = fully_connected(x.value, w.value, b.value);
                          fully_connected_backward(x.value, w.value, r, &x.grad, &w.grad, &b.grad);
                          return LossEval{project(r, y), 0};
                      }};
        run(inst);
    }));

    for (Activation kind : {Activation::relu, Activation::sigmoid}) {
        const std::string name = kind == Activation::relu ? "relu" : "sigmoid";
        out.push_back(detail::run_check(name, opt, [&](std::mt19937_64& rng, const auto& run) {
            ParamGroup x("input", random_tensor({17}, rng, -4.0, 4.0));
            const Tensor r = random_tensor({17}, rng);
            Instance inst{{&x}, [&] {
                              const Tensor y = activate(x.value, kind);
                              accumulate(x.grad, activate_backward(x.value, y, r, kind));
                              return LossEval{project(r, y), kind == Activation::relu ? relu_regime(0, x.value) : 0};
                          }};
            run(inst);
        }));
    }

    out.push_back(detail::run_check("softmax_xent", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup z("logits", random_tensor({2}, rng, -3.0, 3.0));
        const int label = static_cast<int>(rng() % 2);
        Instance inst{{&z}, [&] {
                          const SoftmaxXent s = softmax_xent(z.value, label);
                          accumulate(z.grad, s.grad_logits);
                          return LossEval{s.loss, 0};
                      }};
        run(inst);
    }));

    out.push_back(detail::run_check("deform_features (X and offsets)", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup x("X", random_tensor({4, 4, 3}, rng));
        ParamGroup theta("offsets", random_tensor({4, 4, 2}, rng, -1.6, 1.6));
        const Tensor r = random_tensor({4, 4, 3}, rng);
        Instance inst{{&x, &theta}, [&] {
                          const OffsetField f(theta.value);
                          const Tensor y = deform_features(x.value, f);
                          deform_features_backward(x.value, f, r, &x.grad, &theta.grad);
                          return LossEval{project(r, y), sampling_regime(0, f)};
                      }};
        run(inst);
    }));

    out.push_back(detail::run_check("regress_offsets", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup x("X", random_tensor({3, 3, 4}, rng));
        DeformParams p = DeformParams::create(3, 3, 4, 3, rng);
        p.conv_bias.value = random_tensor({3}, rng, -0.2, 0.2);
        p.fc_weight.value = random_tensor(p.fc_weight.value.dims(), rng, -0.5, 0.5);
        p.fc_bias.value = random_tensor(p.fc_bias.value.dims(), rng, -0.5, 0.5);
        const Tensor r = random_tensor({3, 3, 2}, rng);
        std::vector<ParamGroup*> params{&x};
        for (ParamGroup* g : p.groups()) params.push_back(g);
        Instance inst{params, [&] {
                          OffsetCache c;
                          const OffsetField f = regress_offsets(x.value, p, c);
                          regress_offsets_backward(x.value, p, c, r, &x.grad);
                          return LossEval{project(r, f.offsets), relu_regime(0, c.conv_pre)};
                      }};
        run(inst);
    }));

    out.push_back(detail::run_check("compute_gate", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup x("X", random_tensor({3, 3, 4}, rng));
        GateParams p = GateParams::create(3, 3, 4, 6, rng);
        p.fc1_bias.value = random_tensor({6}, rng, -0.2, 0.2);
        p.fc2_bias.value = random_tensor({9}, rng, -0.5, 0.5);
        const Tensor r = random_tensor({9}, rng);
        std::vector<ParamGroup*> params{&x};
        for (ParamGroup* g : p.groups()) params.push_back(g);
        Instance inst{params, [&] {
                          GateCache c;
                          const GateMap g = compute_gate(x.value, p, c);
                          compute_gate_backward(x.value, p, c, r, &x.grad);
                          return LossEval{project(r, g.values.reshaped({9})), relu_regime(0, c.hidden_pre)};
                      }};
        run(inst);
    }));

    out.push_back(detail::run_check("fuse", opt, [&](std::mt19937_64& rng, const auto& run) {
        ParamGroup x("X", random_tensor({3, 3, 4}, rng));
        ParamGroup xd("X'", random_tensor({3, 3, 4}, rng));
        ParamGroup s("gate", random_tensor({3, 3}, rng, 0.05, 0.95));
        const Tensor r = random_tensor({3, 3, 4}, rng);
        Instance inst{{&x, &xd, &s}, [&] {
                          const GateMap g(s.value);
                          const Tensor y = fuse(x.value, xd.value, g);
                          Tensor gg({9});
                          fuse_backward(x.value, xd.value, g, r, &x.grad, &xd.grad, &gg);
                          accumulate(s.grad, gg.reshaped({3, 3}));
                          return LossEval{project(r, y), 0};
                      }};
        run(inst);
    }));

    out.push_back(detail::run_check("end-to-end gate network", opt, [&](std::mt19937_64& rng, const auto& run) {
        TrackerModel m = TrackerModel::create(detail::battery_network(), Variant::gate, rng());
        // Non-zero offset regressor so the deformable path carries gradient.
        m.deform.fc_weight.value = random_tensor(m.deform.fc_weight.value.dims(), rng, -0.3, 0.3);
        m.deform.fc_bias.value = random_tensor(m.deform.fc_bias.value.dims(), rng, -0.5, 0.5);
        // Moderate weights keep activations away from saturation, so no gradient
        // coordinate falls to the central-difference roundoff floor (~1e-11).
        for (auto [p, role] : m.all_groups()) {
            if (p == &m.deform.fc_weight || p == &m.deform.fc_bias) continue;
            const double w = p->value.rank() == 1 ? 0.1 : role == Role::fusion_fc && p->name.starts_with("gate") ? 0.2 : 0.6;
            p->value = random_tensor(p->value.dims(), rng, -w, w);
        }
        const Tensor input = random_tensor(m.input_dims(), rng);
        const int label = static_cast<int>(rng() % 2);
        std::vector<ParamGroup*> params;
        for (auto [p, role] : m.all_groups()) params.push_back(p);
        Instance inst{params, [&] {
                          FrontEndCache fc;
                          FusionCache c;
                          const Tensor features = front_end_forward(m, input, &fc);
                          fusion_head_forward(m, features, c);
                          const SoftmaxXent s = softmax_xent(c.logits, label);
                          Tensor gf(features.dims());
                          fusion_head_backward(m, features, c, s.grad_logits, &gf);
                          front_end_backward(m, fc, gf);
                          return LossEval{s.loss, forward_regime(fc, c, m.variant)};
                      }};
        run(inst);
    }));
    return out;
}

inline bool battery_passed(const std::vector<BatteryEntry>& entries) {
    for (const auto& e : entries) {
        if (!e.passed) return false;
    }
    return !entries.empty();
}

}  // namespace gdt
