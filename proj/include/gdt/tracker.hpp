#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gdt/bbox_regression.hpp"
#include "gdt/config.hpp"
#include "gdt/gate.hpp"
#include "gdt/network.hpp"
#include "gdt/samples.hpp"
#include "gdt/synthseq.hpp"
#include "gdt/training.hpp"

namespace gdt {

/// Instrumentation points; all optional.
struct TrackerHooks {
    std::function<void(std::size_t frame_index, const std::vector<Sample>&)> on_samples;
    std::function<void(const BatchRecord&)> on_batch;
    std::function<void(std::size_t frame_index)> on_update;
};

struct TrackerState {
    TrackerModel model;
    Config cfg;
    BoundingBox current_box;
    std::size_t frame_index = 0;
    std::deque<Tensor> pos_memory;  // front-end features; the front end is frozen
    std::deque<Tensor> neg_memory;
    std::vector<double> gate_log;
    std::uint64_t rng_seed = 0;
    std::mt19937_64 rng;
    bool initialized = false;
    double last_confidence = 0.0;
    std::optional<double> last_mean_gate;
    std::vector<std::string> warnings;
    TrackerHooks hooks;
};

inline void push_bounded(std::deque<Tensor>& memory, Tensor item, std::size_t capacity) {
    if (capacity == 0) return;
    memory.push_back(std::move(item));
    while (memory.size() > capacity) memory.pop_front();
}

inline LearningRates init_rates(const TrackConfig& t) {
    LearningRates lr;
    lr.fusion_conv = lr.fusion_fc = lr.head_fc = t.init_lr;
    lr.head_last = t.init_last_lr;
    return lr;
}

inline LearningRates update_rates(const TrackConfig& t) {
    LearningRates lr;
    lr.fusion_conv = lr.fusion_fc = t.update_lr_fusion;
    lr.head_fc = t.update_lr_head;
    lr.head_last = t.update_lr_last;
    return lr;
}

namespace detail {

inline void fine_tune(TrackerState& s, std::size_t iterations, const LearningRates& lr) {
    std::vector<const Tensor*> pos, neg;
    for (const auto& t : s.pos_memory) pos.push_back(&t);
    for (const auto& t : s.neg_memory) neg.push_back(&t);
    const auto& tc = s.cfg.train;
    for (std::size_t it = 0; it < iterations; ++it) {
        train_mined_batch(s.model, pos, neg, tc.batch_pos, tc.batch_neg, tc.neg_pool, InputKind::features, lr,
                          tc.momentum, tc.weight_decay, tc.clip_norm, s.rng, s.hooks.on_batch);
    }
}

inline void collect_samples(TrackerState& s, const Tensor& frame, const BoundingBox& around, std::size_t n_pos,
                            std::size_t n_neg, std::vector<Sample>* keep = nullptr) {
    auto samples = generate_samples(frame, around, n_pos, n_neg, s.cfg.sampling, s.cfg.network.patch_size,
                                    s.cfg.network.input_channels, s.rng);
    if (s.hooks.on_samples) s.hooks.on_samples(s.frame_index, samples);
    for (const auto& smp : samples) {
        Tensor f = front_end_forward(s.model, smp.patch, nullptr);
        push_bounded(smp.label == 1 ? s.pos_memory : s.neg_memory, std::move(f),
                     smp.label == 1 ? s.cfg.track.pos_capacity : s.cfg.track.neg_capacity);
    }
    if (keep) *keep = std::move(samples);
}

}  // namespace detail

/// Freezes the front end, fits the box regressor on first-frame positives,
/// seeds the sample memories and fine-tunes fusion + head.
inline TrackerState init_first_frame(const TrackerModel& model, const Tensor& frame, const BoundingBox& gt,
                                     const Config& cfg, std::uint64_t seed, TrackerHooks hooks = {}) {
    validate(cfg);
    require_valid(gt, "init_first_frame");
    require_rank(frame, 3, "init_first_frame frame");
    TrackerState s;
    s.model = model;
    s.model.freeze_front_end();
    for (auto [p, role] : s.model.all_groups()) {
        p->zero_grad();
        p->velocity.fill(0.0);
    }
    s.cfg = cfg;
    s.current_box = gt;
    s.rng_seed = seed;
    s.rng.seed(seed);
    s.hooks = std::move(hooks);

    std::vector<Sample> first;
    detail::collect_samples(s, frame, gt, cfg.track.init_pos, cfg.track.init_neg, &first);

    std::vector<Tensor> feats;
    std::vector<BoundingBox> src, dst;
    for (std::size_t i = 0; i < s.pos_memory.size(); ++i) {
        feats.push_back(s.pos_memory[i]);
        src.push_back(first[i].box);
        dst.push_back(gt);
    }
    if (feats.size() >= 4) s.model.bbox_reg = bbox_regress_train(feats, src, dst, cfg.track.ridge_lambda);

    detail::fine_tune(s, cfg.track.init_iterations, init_rates(cfg.track));
    s.initialized = true;
    s.frame_index = 0;
    return s;
}

inline void update_online(TrackerState& s) {
    if (!s.initialized) throw ValidationError("update_online: tracker is not initialised");
    if (s.pos_memory.size() < s.cfg.train.batch_pos) {
        s.warnings.push_back("update at frame " + std::to_string(s.frame_index) + " skipped: only " +
                             std::to_string(s.pos_memory.size()) + " positives in memory");
        return;
    }
    if (s.neg_memory.empty()) {
        s.warnings.push_back("update at frame " + std::to_string(s.frame_index) + " skipped: no negatives in memory");
        return;
    }
    if (s.hooks.on_update) s.hooks.on_update(s.frame_index);
    detail::fine_tune(s, s.cfg.track.update_iterations, update_rates(s.cfg.track));
}

inline std::vector<BoundingBox> draw_candidates(TrackerState& s, std::size_t frame_w, std::size_t frame_h) {
    std::vector<BoundingBox> c;
    c.reserve(s.cfg.track.candidates);
    for (std::size_t i = 0; i < s.cfg.track.candidates; ++i) {
        c.push_back(jitter_box(s.current_box, s.cfg.track.cand_trans_std, s.cfg.track.cand_scale_std, frame_w, frame_h,
                               s.rng));
    }
    return c;
}

/// Index of the highest score; ties go to the lower index.
inline std::size_t select_candidate(const std::vector<double>& scores) {
    if (scores.empty()) throw ValidationError("select_candidate: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

inline BoundingBox track_step(TrackerState& s, const Tensor& frame) {
    if (!s.initialized) throw ValidationError("track_step: tracker is not initialised");
    require_rank(frame, 3, "track_step frame");
    const auto candidates = draw_candidates(s, frame.dim(1), frame.dim(0));
    const std::vector<double> fill = channel_means(frame);

    std::vector<double> scores(candidates.size());
    Tensor best_features;
    std::optional<GateMap> best_gate;
    FusionCache c;
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Tensor input = network_input(extract_patch(frame, candidates[i], s.cfg.network.patch_size, fill),
                                           s.cfg.network.input_channels);
        Tensor features = front_end_forward(s.model, input, nullptr);
        scores[i] = positive_probability(fusion_head_forward(s.model, features, c));
        if (i == 0 || scores[i] > scores[best]) {
            best = i;
            best_features = std::move(features);
            best_gate = c.gate;
        }
    }
    const double confidence = scores[best];
    BoundingBox target = candidates[best];
    if (confidence > s.cfg.track.bbox_threshold && s.model.bbox_reg) {
        const BoundingBox refined = bbox_regress_apply(*s.model.bbox_reg, best_features, target);
        if (refined.valid()) target = refined;
    }

    s.current_box = target;
    s.last_confidence = confidence;
    s.last_mean_gate.reset();
    if (best_gate) {
        s.last_mean_gate = mean_gate(*best_gate);
        s.gate_log.push_back(*s.last_mean_gate);
    }
    ++s.frame_index;
    if (confidence > s.cfg.track.collect_threshold) {
        detail::collect_samples(s, frame, target, s.cfg.track.update_pos_per_frame, s.cfg.track.update_neg_per_frame);
    }
    if (s.frame_index % s.cfg.track.update_interval == 0) update_online(s);
    return target;
}

struct TrackResult {
    std::string sequence;
    std::string variant;
    std::vector<BoundingBox> boxes;
    std::vector<double> confidences;
    std::vector<std::optional<double>> mean_gates;
    std::vector<BoundingBox> gt;
};

/// One-pass evaluation: initialise on frame 0 from ground truth and track to the end.
inline TrackResult track_sequence(const TrackerModel& model, const SequenceDataset& seq, const Config& cfg,
                                  std::uint64_t seed, TrackerHooks hooks = {}) {
    if (seq.frames.empty() || seq.frames.size() != seq.gt.size()) {
        throw ValidationError("track_sequence: sequence '" + seq.name + "' has no frames or mismatched ground truth");
    }
    TrackResult r;
    r.sequence = seq.name;
    r.variant = to_string(model.variant);
    r.gt = seq.gt;
    TrackerState s = init_first_frame(model, seq.frames[0], seq.gt[0], cfg, seed, std::move(hooks));
    {
        const Tensor input = network_input(extract_patch(seq.frames[0], seq.gt[0], cfg.network.patch_size),
                                           cfg.network.input_channels);
        const ForwardResult f = forward(s.model, input);
        r.boxes.push_back(seq.gt[0]);
        r.confidences.push_back(positive_probability(f.logits));
        r.mean_gates.push_back(f.gate ? std::optional<double>(mean_gate(*f.gate)) : std::nullopt);
    }
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        r.boxes.push_back(track_step(s, seq.frames[t]));
        r.confidences.push_back(s.last_confidence);
        r.mean_gates.push_back(s.last_mean_gate);
    }
    return r;
}

}  // namespace gdt
