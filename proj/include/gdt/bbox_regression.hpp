#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "gdt/box.hpp"
#include "gdt/network.hpp"

namespace gdt {

/// (dx / w, dy / h, log(w' / w), log(h' / h)) between box centres and sizes.
inline std::array<double, 4> box_offsets(const BoundingBox& src, const BoundingBox& dst) {
    return {(dst.cx() - src.cx()) / src.w, (dst.cy() - src.cy()) / src.h, std::log(dst.w / src.w),
            std::log(dst.h / src.h)};
}

inline BoundingBox apply_box_offsets(const BoundingBox& src, const std::array<double, 4>& t) {
    return BoundingBox::from_center(src.cx() + t[0] * src.w, src.cy() + t[1] * src.h, src.w * std::exp(t[2]),
                                    src.h * std::exp(t[3]));
}

namespace detail {

/// In-place Cholesky of a symmetric d x d matrix; returns false if not positive definite.
inline bool cholesky(std::vector<double>& a, std::size_t d) {
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(a[i * d + i]));
    const double tiny = std::max(scale, 1.0) * 1e-12;
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a[j * d + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
        if (!(diag > tiny)) return false;
        const double l = std::sqrt(diag);
        a[j * d + j] = l;
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
            a[i * d + j] = s / l;
        }
    }
    return true;
}

inline void cholesky_solve(const std::vector<double>& l, std::size_t d, std::vector<double>& b, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = b[i * cols + c];
            for (std::size_t k = 0; k < i; ++k) s -= l[i * d + k] * b[k * cols + c];
            b[i * cols + c] = s / l[i * d + i];
        }
        for (std::size_t i = d; i-- > 0;) {
            double s = b[i * cols + c];
            for (std::size_t k = i + 1; k < d; ++k) s -= l[k * d + i] * b[k * cols + c];
            b[i * cols + c] = s / l[i * d + i];
        }
    }
}

}  // namespace detail

/// Ridge regression from features to box offsets. The intercept is not
/// penalised: the problem is solved on centred features and targets.
inline BoxRegressor bbox_regress_train(const std::vector<Tensor>& features, const std::vector<BoundingBox>& src,
                                       const std::vector<BoundingBox>& gt, double lambda) {
    const std::size_t n = features.size();
    if (n < 4) throw ValidationError("bbox_regress_train: need at least 4 samples, got " + std::to_string(n));
    if (src.size() != n || gt.size() != n) throw ShapeError("bbox_regress_train: features/src/gt counts differ");
    if (lambda < 0.0) throw ValidationError("bbox_regress_train: lambda must be nonnegative");
    const std::size_t d = features.front().size();
    for (const Tensor& f : features) {
        if (f.size() != d) throw ShapeError("bbox_regress_train: inconsistent feature lengths");
    }

    std::vector<double> mean_x(d, 0.0);
    std::array<double, 4> mean_t{};
    std::vector<std::array<double, 4>> targets(n);
    for (std::size_t s = 0; s < n; ++s) {
        targets[s] = box_offsets(src[s], gt[s]);
        for (std::size_t i = 0; i < d; ++i) mean_x[i] += features[s][i];
        for (int k = 0; k < 4; ++k) mean_t[k] += targets[s][k];
    }
    for (double& v : mean_x) v /= static_cast<double>(n);
    for (double& v : mean_t) v /= static_cast<double>(n);

    std::vector<double> gram(d * d, 0.0);
    std::vector<double> rhs(d * 4, 0.0);
    std::vector<double> xc(d);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < d; ++i) xc[i] = features[s][i] - mean_x[i];
        for (std::size_t i = 0; i < d; ++i) {
            if (xc[i] == 0.0) continue;
            double* row = gram.data() + i * d;
            for (std::size_t j = 0; j <= i; ++j) row[j] += xc[i] * xc[j];
            for (int k = 0; k < 4; ++k) rhs[i * 4 + k] += xc[i] * (targets[s][k] - mean_t[k]);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        gram[i * d + i] += lambda;
        for (std::size_t j = 0; j < i; ++j) gram[j * d + i] = gram[i * d + j];
    }
    if (!detail::cholesky(gram, d)) {
        throw ValidationError("bbox_regress_train: normal equations are singular; use ridge lambda > 0");
    }
    detail::cholesky_solve(gram, d, rhs, 4);

    BoxRegressor r{Tensor({d, 4}, rhs), Tensor({4})};
    for (int k = 0; k < 4; ++k) {
        double b = mean_t[k];
        for (std::size_t i = 0; i < d; ++i) b -= mean_x[i] * rhs[i * 4 + k];
        r.intercept[static_cast<std::size_t>(k)] = b;
    }
    return r;
}

inline std::array<double, 4> bbox_regress_predict(const BoxRegressor& r, const Tensor& features) {
    const std::size_t d = r.weights.dim(0);
    if (features.size() != d) throw ShapeError("bbox_regress_predict: feature length mismatch");
    std::array<double, 4> t{};
    for (int k = 0; k < 4; ++k) {
        double v = r.intercept[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < d; ++i) v += features[i] * r.weights[i * 4 + static_cast<std::size_t>(k)];
        t[k] = v;
    }
    return t;
}

inline BoundingBox bbox_regress_apply(const BoxRegressor& r, const Tensor& features, const BoundingBox& src) {
    return apply_box_offsets(src, bbox_regress_predict(r, features));
}

}  // namespace gdt
