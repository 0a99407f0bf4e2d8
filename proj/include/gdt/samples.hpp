#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gdt/box.hpp"
#include "gdt/config.hpp"
#include "gdt/image.hpp"

namespace gdt {

struct Sample {
    BoundingBox box;
    Tensor patch;  // network input, patch_size x patch_size x input_channels
    int label = 0;  // 1 = target
    double iou = 0.0;
};

/// Gaussian translation (std = trans_std * mean(w, h)) and log-scale jitter
/// (factor 1.05^N(0, scale_std)). The centre is clamped into the frame and the
/// size to at least 4 px.
inline BoundingBox jitter_box(const BoundingBox& b, double trans_std, double scale_std, std::size_t frame_w,
                              std::size_t frame_h, std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double size = 0.5 * (b.w + b.h);
    double cx = b.cx() + unit(rng) * trans_std * size;
    double cy = b.cy() + unit(rng) * trans_std * size;
    const double s = std::pow(1.05, unit(rng) * scale_std);
    const double w = std::max(4.0, b.w * s);
    const double h = std::max(4.0, b.h * s);
    cx = std::clamp(cx, 0.0, static_cast<double>(frame_w));
    cy = std::clamp(cy, 0.0, static_cast<double>(frame_h));
    return BoundingBox::from_center(cx, cy, w, h);
}

/// Labelled boxes only (no patches).
struct LabelledBox {
    BoundingBox box;
    int label;
    double iou;
};

inline std::vector<LabelledBox> draw_labelled_boxes(const BoundingBox& gt, std::size_t frame_w, std::size_t frame_h,
                                                    std::size_t n_pos, std::size_t n_neg, const SamplingConfig& cfg,
                                                    std::mt19937_64& rng) {
    require_valid(gt, "generate_samples");
    std::vector<LabelledBox> out;
    out.reserve(n_pos + n_neg);
    auto draw_class = [&](std::size_t count, bool positive) {
        std::size_t accepted = 0, draws = 0;
        while (accepted < count) {
            if (draws++ >= cfg.rejection_budget) {
                throw RuntimeFailure(std::string("generate_samples: rejection budget exhausted for ") +
                                     (positive ? "positive" : "negative") + " samples (" + std::to_string(accepted) +
                                     " of " + std::to_string(count) + " accepted)");
            }
            const BoundingBox b = positive ? jitter_box(gt, cfg.pos_trans_std, cfg.pos_scale_std, frame_w, frame_h, rng)
                                           : jitter_box(gt, cfg.neg_trans_std, cfg.neg_scale_std, frame_w, frame_h, rng);
            const double o = iou(b, gt);
            if (positive ? o >= cfg.pos_iou : o <= cfg.neg_iou) {
                out.push_back({b, positive ? 1 : 0, o});
                ++accepted;
            }
        }
    };
    draw_class(n_pos, true);
    draw_class(n_neg, false);
    return out;
}

/// Rejection-samples exactly n_pos positives (IoU >= pos_iou) followed by n_neg
/// negatives (IoU <= neg_iou) around `gt`, each with its network-input patch.
inline std::vector<Sample> generate_samples(const Tensor& frame, const BoundingBox& gt, std::size_t n_pos,
                                            std::size_t n_neg, const SamplingConfig& cfg, std::size_t patch_size,
                                            std::size_t channels, std::mt19937_64& rng) {
    require_rank(frame, 3, "generate_samples frame");
    const auto boxes = draw_labelled_boxes(gt, frame.dim(1), frame.dim(0), n_pos, n_neg, cfg, rng);
    const std::vector<double> fill = channel_means(frame);
    std::vector<Sample> out;
    out.reserve(boxes.size());
    for (const auto& lb : boxes) {
        out.push_back({lb.box, network_input(extract_patch(frame, lb.box, patch_size, fill), channels), lb.label, lb.iou});
    }
    return out;
}

inline std::vector<Sample> generate_samples(const Tensor& frame, const BoundingBox& gt, std::size_t n_pos,
                                            std::size_t n_neg, const SamplingConfig& cfg, std::size_t patch_size,
                                            std::size_t channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return generate_samples(frame, gt, n_pos, n_neg, cfg, patch_size, channels, rng);
}

/// Indices of the k highest scores, best first; ties go to the lower index.
inline std::vector<std::size_t> hard_negative_mining(const std::vector<double>& scores, std::size_t k) {
    if (k > scores.size()) {
        throw ValidationError("hard_negative_mining: k = " + std::to_string(k) + " exceeds " +
                              std::to_string(scores.size()) + " scores");
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    idx.resize(k);
    return idx;
}

}  // namespace gdt
