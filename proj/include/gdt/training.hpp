#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "gdt/config.hpp"
#include "gdt/network.hpp"
#include "gdt/samples.hpp"
#include "gdt/synthseq.hpp"

namespace gdt {

/// Learning rate per parameter role; zero leaves the role untouched.
struct LearningRates {
    double front_conv = 0.0;
    double fusion_conv = 0.0;
    double fusion_fc = 0.0;
    double head_fc = 0.0;
    double head_last = 0.0;

    double of(Role r) const {
        switch (r) {
            case Role::front_conv: return front_conv;
            case Role::fusion_conv: return fusion_conv;
            case Role::fusion_fc: return fusion_fc;
            case Role::head_fc: return head_fc;
            case Role::head_last: return head_last;
        }
        return 0.0;
    }
};

/// Inputs are either network-input patches (full forward) or cached front-end features.
enum class InputKind { patches, features };

/// Probability that `input` is the target.
inline double score(const TrackerModel& m, const Tensor& input, InputKind kind) {
    FusionCache c;
    if (kind == InputKind::patches) {
        return positive_probability(fusion_head_forward(m, front_end_forward(m, input, nullptr), c));
    }
    return positive_probability(fusion_head_forward(m, input, c));
}

/// One SGD iteration on a labelled batch. Gradients are summed over the batch
/// (not averaged); the returned loss is the batch mean.
/// Groups the variant does not read are not updated (no weight decay either).
/// If `clip_norm` > 0, the summed gradient of the trainable groups is rescaled
/// to at most that global L2 norm before the update.
inline double train_step(TrackerModel& m, const std::vector<const Tensor*>& inputs, const std::vector<int>& labels,
                         InputKind kind, const LearningRates& lr, double momentum, double weight_decay,
                         double clip_norm = 0.0) {
    if (inputs.size() != labels.size() || inputs.empty()) throw ValidationError("train_step: empty or mismatched batch");
    const double inv = 1.0 / static_cast<double>(inputs.size());
    const bool front_trainable = kind == InputKind::patches && lr.front_conv > 0.0 && !m.front_end_frozen();
    double total = 0.0;
    FrontEndCache fc;
    FusionCache c;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor features = kind == InputKind::patches ? front_end_forward(m, *inputs[i], &fc) : *inputs[i];
        fusion_head_forward(m, features, c);
        SoftmaxXent x = softmax_xent(c.logits, labels[i]);
        total += x.loss;
        if (front_trainable) {
            Tensor g_features(features.dims());
            fusion_head_backward(m, features, c, x.grad_logits, &g_features);
            front_end_backward(m, fc, g_features);
        } else {
            fusion_head_backward(m, features, c, x.grad_logits, nullptr);
        }
    }
    const auto groups = m.all_groups();
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (auto [p, role] : groups) {
            if (lr.of(role) > 0.0 && !p->frozen && m.uses(p)) {
                for (double g : p->grad.values()) sq += g * g;
            }
        }
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) {
            const double k = clip_norm / norm;
            for (auto [p, role] : groups) {
                for (double& g : p->grad.values()) g *= k;
            }
        }
    }
    for (auto [p, role] : groups) {
        const double rate = m.uses(p) ? lr.of(role) : 0.0;
        if (rate > 0.0) {
            sgd_step(*p, SgdConfig{rate, momentum, weight_decay});
        } else {
            p->zero_grad();
        }
    }
    return total * inv;
}

/// What one mined mini-batch looked like; reported through hooks.
struct BatchRecord {
    std::size_t positives = 0;
    std::size_t pool = 0;
    std::vector<double> pool_scores;
    std::vector<std::size_t> mined;  // indices into the pool
};

/// Picks `n_pos` positives, scores a random pool of up to `pool_size` negatives
/// and keeps the `n_neg` most confident as hard negatives; then trains once.
inline double train_mined_batch(TrackerModel& m, const std::vector<const Tensor*>& positives,
                                const std::vector<const Tensor*>& negatives, std::size_t n_pos, std::size_t n_neg,
                                std::size_t pool_size, InputKind kind, const LearningRates& lr, double momentum,
                                double weight_decay, double clip_norm, std::mt19937_64& rng,
                                const std::function<void(const BatchRecord&)>& on_batch) {
    auto pick = [&](std::size_t total, std::size_t want) {
        std::vector<std::size_t> idx(total);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(total, want));
        return idx;
    };
    BatchRecord rec;
    std::vector<const Tensor*> batch;
    std::vector<int> labels;
    for (std::size_t i : pick(positives.size(), n_pos)) {
        batch.push_back(positives[i]);
        labels.push_back(1);
    }
    rec.positives = batch.size();
    const auto pool = pick(negatives.size(), pool_size);
    rec.pool = pool.size();
    rec.pool_scores.reserve(pool.size());
    for (std::size_t i : pool) rec.pool_scores.push_back(score(m, *negatives[i], kind));
    rec.mined = hard_negative_mining(rec.pool_scores, std::min(n_neg, pool.size()));
    for (std::size_t k : rec.mined) {
        batch.push_back(negatives[pool[k]]);
        labels.push_back(0);
    }
    if (on_batch) on_batch(rec);
    return train_step(m, batch, labels, kind, lr, momentum, weight_decay, clip_norm);
}

struct OfflineHooks {
    std::function<void(int step, const std::vector<Sample>&)> on_frame_samples;
    std::function<void(const BatchRecord&)> on_batch;
    std::function<void(int step, std::size_t iteration, double loss)> on_loss;
    std::function<void(int step, const TrackerModel&)> on_step_done;
};

inline Variant variant_for_step(int step) {
    return step == 1 ? Variant::baseline : step == 2 ? Variant::deform : Variant::gate;
}

/// Staged offline training: step 1 trains front end and head with the fusion
/// stage bypassed, step 2 adds the deformable branch (gate held at 1), step 3
/// adds the gate. `variant` decides where training stops. Each step draws from
/// its own seeded stream, so the model after step k does not depend on the
/// requested final variant.
inline TrackerModel train_offline(const std::vector<SequenceDataset>& sequences, const Config& cfg, Variant variant,
                                  const OfflineHooks& hooks = {}) {
    validate(cfg);
    if (sequences.empty()) throw ValidationError("train_offline: no training sequences");
    for (const auto& s : sequences) {
        if (s.frames.empty() || s.frames.size() != s.gt.size()) {
            throw ValidationError("train_offline: sequence '" + s.name + "' has no frames or mismatched ground truth");
        }
    }
    const auto& tc = cfg.train;
    TrackerModel m = TrackerModel::create(cfg.network, Variant::baseline, cfg.seed);
    const int last_step = variant == Variant::baseline ? 1 : variant == Variant::deform ? 2 : 3;
    const std::size_t frames_per_iter = std::max<std::size_t>(1, (tc.neg_pool + tc.neg_per_frame - 1) / std::max<std::size_t>(1, tc.neg_per_frame));

    for (int step = 1; step <= last_step; ++step) {
        m.variant = variant_for_step(step);
        LearningRates lr;
        lr.front_conv = tc.lr_conv;
        lr.head_fc = lr.head_last = tc.lr_fc;
        if (step >= 2) {
            lr.fusion_conv = tc.lr_conv;
            lr.fusion_fc = tc.lr_fc;
        }
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step));
        for (std::size_t it = 0; it < tc.iterations_per_step; ++it) {
            const auto& seq = sequences[std::uniform_int_distribution<std::size_t>(0, sequences.size() - 1)(rng)];
            std::vector<std::size_t> frame_ids(seq.frames.size());
            std::iota(frame_ids.begin(), frame_ids.end(), std::size_t{0});
            std::shuffle(frame_ids.begin(), frame_ids.end(), rng);
            frame_ids.resize(std::min(frames_per_iter, frame_ids.size()));

            std::vector<Sample> samples;
            for (std::size_t f : frame_ids) {
                auto fs = generate_samples(seq.frames[f], seq.gt[f], tc.pos_per_frame, tc.neg_per_frame, cfg.sampling,
                                           cfg.network.patch_size, cfg.network.input_channels, rng);
                if (hooks.on_frame_samples) hooks.on_frame_samples(step, fs);
                std::move(fs.begin(), fs.end(), std::back_inserter(samples));
            }
            std::vector<const Tensor*> pos, neg;
            for (const auto& s : samples) (s.label == 1 ? pos : neg).push_back(&s.patch);
            const double loss = train_mined_batch(m, pos, neg, tc.batch_pos, tc.batch_neg, tc.neg_pool,
                                                  InputKind::patches, lr, tc.momentum, tc.weight_decay, tc.clip_norm, rng,
                                                  hooks.on_batch);
            if (hooks.on_loss) hooks.on_loss(step, it, loss);
        }
        for (auto [p, role] : m.all_groups()) p->velocity.fill(0.0);
        if (hooks.on_step_done) hooks.on_step_done(step, m);
    }
    m.variant = variant;
    return m;
}

}  // namespace gdt
