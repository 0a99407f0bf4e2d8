#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "gdt/tensor.hpp"

namespace gdt {

/// Network widths. The front end maps a patch_size^2 input to a 3 x 3 grid:
/// 25 -(5x5, stride 2)-> 11 -(3x3, stride 2)-> 5 -(3x3, stride 1)-> 3.
struct NetworkConfig {
    std::size_t patch_size = 25;
    std::size_t input_channels = 3;  // intensity + two gradient channels, or 1
    std::size_t conv1_channels = 8;
    std::size_t conv2_channels = 16;
    std::size_t feature_channels = 32;
    std::size_t deform_hidden_channels = 16;
    std::size_t gate_hidden = 64;
    std::size_t head_hidden1 = 256;
    std::size_t head_hidden2 = 128;
};

struct SamplingConfig {
    double pos_iou = 0.7;
    double neg_iou = 0.5;
    // Translation std as a fraction of mean(w, h); scale factor 1.05^N(0, s).
    double pos_trans_std = 0.1;
    double pos_scale_std = 1.0;
    double neg_trans_std = 1.0;
    double neg_scale_std = 2.0;
    std::size_t rejection_budget = 10000;
};

struct TrainConfig {
    std::size_t iterations_per_step = 100;
    std::size_t pos_per_frame = 50;
    std::size_t neg_per_frame = 200;
    std::size_t batch_pos = 32;
    std::size_t batch_neg = 96;
    std::size_t neg_pool = 1024;
    double lr_conv = 1e-4;
    double lr_fc = 1e-3;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double clip_norm = 30.0;  // global gradient norm cap; 0 disables
};

struct TrackConfig {
    std::size_t init_iterations = 30;
    double init_lr = 3e-4;
    double init_last_lr = 1e-3;
    std::size_t init_pos = 500;
    std::size_t init_neg = 1500;
    double ridge_lambda = 1e-3;
    double bbox_threshold = 0.5;

    std::size_t candidates = 256;
    double cand_trans_std = 0.3;
    double cand_scale_std = 0.5;

    std::size_t update_interval = 10;
    std::size_t update_iterations = 5;
    double update_lr_fusion = 5e-4;
    double update_lr_head = 3e-4;
    double update_lr_last = 1e-3;
    std::size_t update_pos_per_frame = 50;
    std::size_t update_neg_per_frame = 200;
    double collect_threshold = 0.5;
    std::size_t pos_capacity = 500;
    std::size_t neg_capacity = 5000;
};

struct Config {
    NetworkConfig network;
    SamplingConfig sampling;
    TrainConfig train;
    TrackConfig track;
    std::uint64_t seed = 1;
    std::uint64_t suite_seed = 7;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkConfig, patch_size, input_channels, conv1_channels,
                                                conv2_channels, feature_channels, deform_hidden_channels, gate_hidden,
                                                head_hidden1, head_hidden2)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SamplingConfig, pos_iou, neg_iou, pos_trans_std, pos_scale_std,
                                                neg_trans_std, neg_scale_std, rejection_budget)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, iterations_per_step, pos_per_frame, neg_per_frame,
                                                batch_pos, batch_neg, neg_pool, lr_conv, lr_fc, momentum,
                                                weight_decay, clip_norm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackConfig, init_iterations, init_lr, init_last_lr, init_pos,
                                                init_neg, ridge_lambda, bbox_threshold, candidates, cand_trans_std,
                                                cand_scale_std, update_interval, update_iterations,
                                                update_lr_fusion, update_lr_head, update_lr_last,
                                                update_pos_per_frame, update_neg_per_frame, collect_threshold,
                                                pos_capacity, neg_capacity)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Config, network, sampling, train, track, seed, suite_seed)

inline void validate(const Config& c) {
    auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
    const auto& n = c.network;
    if (n.input_channels != 1 && n.input_channels != 3) fail("network.input_channels must be 1 or 3");
    if (n.patch_size < 5 || (n.patch_size - 5) % 2 != 0) fail("network.patch_size must be odd and >= 5");
    const std::size_t s1 = (n.patch_size - 5) / 2 + 1;
    if (s1 < 3 || (s1 - 3) % 2 != 0) fail("network.patch_size does not tile the stride-2 front end");
    const std::size_t s2 = (s1 - 3) / 2 + 1;
    if (s2 < 3) fail("network.patch_size too small");
    if (n.conv1_channels == 0 || n.conv2_channels == 0 || n.feature_channels == 0 || n.deform_hidden_channels == 0 ||
        n.gate_hidden == 0 || n.head_hidden1 == 0 || n.head_hidden2 == 0) {
        fail("network widths must be positive");
    }
    const auto& s = c.sampling;
    if (!(s.pos_iou > s.neg_iou && s.pos_iou <= 1.0 && s.neg_iou >= 0.0)) fail("sampling IoU thresholds out of order");
    const auto& t = c.train;
    if (t.batch_pos == 0 || t.neg_pool < t.batch_neg) fail("train batch sizes inconsistent");
    if (!(t.momentum >= 0.0 && t.momentum < 1.0) || t.weight_decay < 0.0 || t.lr_conv <= 0.0 || t.lr_fc <= 0.0 ||
        t.clip_norm < 0.0) {
        fail("train optimizer settings out of range");
    }
    const auto& k = c.track;
    if (k.candidates == 0 || k.update_interval == 0) fail("track.candidates and track.update_interval must be positive");
    if (k.ridge_lambda < 0.0) fail("track.ridge_lambda must be nonnegative");
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    Config c;
    try {
        c = j.get<Config>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    validate(c);
    return c;
}

inline void save_config(const std::filesystem::path& path, const Config& c) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write config " + path.string());
    out << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace gdt
