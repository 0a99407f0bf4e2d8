#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "gdt/optim.hpp"

namespace gdt {

/// Result of one loss evaluation. `regime` fingerprints the piecewise-linear
/// branch the evaluation took (relu masks, bilinear cells); 0 if unused.
struct LossEval {
    double loss = 0.0;
    std::uint64_t regime = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates whose +/-eps probes crossed a kink
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares the analytic gradient of `loss_fn` w.r.t. `param` against central
/// differences, coordinate by coordinate. `loss_fn` must evaluate the loss and
/// accumulate its gradient into `param.grad`. On return `param.grad` holds the
/// analytic gradient and `param.value` is unchanged.
inline GradCheckReport grad_check_report(const std::function<LossEval(ParamGroup&)>& loss_fn, ParamGroup& param,
                                         double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ValidationError("grad_check: eps must lie in [1e-7, 1e-3]");
    param.zero_grad();
    const LossEval base = loss_fn(param);
    if (!std::isfinite(base.loss)) throw RuntimeFailure("grad_check: non-finite loss for " + param.name);
    const Tensor analytic = param.grad;

    GradCheckReport report;
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double saved = param.value[i];
        param.value[i] = saved + eps;
        const LossEval plus = loss_fn(param);
        param.value[i] = saved - eps;
        const LossEval minus = loss_fn(param);
        param.value[i] = saved;
        if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
            throw RuntimeFailure("grad_check: non-finite loss for " + param.name);
        }
        if (plus.regime != base.regime || minus.regime != base.regime) {
            ++report.skipped;
            continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
        report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic[i], numeric));
        ++report.checked;
    }
    param.grad = analytic;
    return report;
}

inline double grad_check(const std::function<double(ParamGroup&)>& loss_fn, ParamGroup& param, double eps) {
    return grad_check_report([&](ParamGroup& p) { return LossEval{loss_fn(p), 0}; }, param, eps).max_rel_error;
}

/// FNV-1a style mixing used to build regime fingerprints.
inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

inline std::uint64_t relu_regime(std::uint64_t h, const Tensor& preact) {
    std::uint64_t bits = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < preact.size(); ++i) {
        bits = (bits << 1) | (preact[i] > 0.0 ? 1u : 0u);
        if (++n == 64) {
            h = hash_mix(h, bits);
            bits = 0;
            n = 0;
        }
    }
    return hash_mix(h, bits ^ n);
}

}  // namespace gdt
