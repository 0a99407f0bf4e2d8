#pragma once

#include <cmath>
#include <vector>

#include "gdt/box.hpp"
#include "gdt/tensor.hpp"

namespace gdt {

struct Curve {
    std::vector<double> thresholds;
    std::vector<double> values;
    double auc = 0.0;  // mean of values

    double value_at(double threshold) const {
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (std::abs(thresholds[i] - threshold) < 1e-9) return values[i];
        }
        throw ValidationError("curve has no threshold " + std::to_string(threshold));
    }
};

inline std::vector<double> precision_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 50; ++i) t.push_back(i);
    return t;
}

inline std::vector<double> success_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 50; ++i) t.push_back(i * 0.02);
    return t;
}

namespace detail {

template <typename Pred>
Curve make_curve(const std::vector<double>& samples, std::vector<double> thresholds, Pred counts) {
    Curve c;
    c.thresholds = std::move(thresholds);
    double sum = 0.0;
    for (double t : c.thresholds) {
        std::size_t hits = 0;
        for (double s : samples) hits += counts(s, t) ? 1 : 0;
        const double v = static_cast<double>(hits) / static_cast<double>(samples.size());
        c.values.push_back(v);
        sum += v;
    }
    c.auc = sum / static_cast<double>(c.values.size());
    return c;
}

}  // namespace detail

/// Fraction of frames whose centre error is within each pixel threshold.
inline Curve precision_curve(const std::vector<double>& errors, std::vector<double> thresholds = precision_thresholds()) {
    if (errors.empty()) throw ValidationError("precision_curve: no frames");
    return detail::make_curve(errors, std::move(thresholds), [](double e, double t) { return e <= t; });
}

/// Fraction of frames whose IoU exceeds each overlap threshold.
inline Curve success_curve(const std::vector<double>& ious, std::vector<double> thresholds = success_thresholds()) {
    if (ious.empty()) throw ValidationError("success_curve: no frames");
    return detail::make_curve(ious, std::move(thresholds), [](double o, double t) { return o > t; });
}

inline double robustness(double failure_rate, double sensitivity = 100.0) {
    if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) throw ValidationError("robustness: failure rate outside [0, 1]");
    return std::exp(-sensitivity * failure_rate);
}

/// Fraction of frames with zero overlap.
inline double failure_rate(const std::vector<double>& ious) {
    if (ious.empty()) throw ValidationError("failure_rate: no frames");
    std::size_t f = 0;
    for (double o : ious) f += o == 0.0 ? 1 : 0;
    return static_cast<double>(f) / static_cast<double>(ious.size());
}

inline double precision_at_20(const Curve& precision) { return precision.value_at(20.0); }

}  // namespace gdt
