#pragma once

// Procedural grayscale sequences with exact ground truth: a textured object
// over a textured background, driven by per-frame translation, scale,
// rotation, non-rigid warp, illumination gain and an optional occluding bar.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gdt/box.hpp"
#include "gdt/tensor.hpp"

namespace gdt {

enum class ObjectShape { rectangle, ellipse, two_blob };

struct Occluder {
    std::size_t first_frame = 0;
    std::size_t last_frame = 0;  // inclusive
    double coverage = 0.5;       // fraction of the box width hidden, from its left edge

    bool active(std::size_t t) const { return t >= first_frame && t <= last_frame; }
};

struct SequenceSpec {
    std::string name = "sequence";
    std::size_t frames = 60;
    std::size_t width = 128;
    std::size_t height = 128;
    ObjectShape shape = ObjectShape::rectangle;
    double object_w = 28.0;
    double object_h = 28.0;
    std::uint64_t texture_seed = 1;
    std::vector<double> center_x, center_y, scale, rotation, gain;  // rotation in radians
    double warp_amplitude = 0.0;
    std::optional<Occluder> occluder;
    double noise_std = 0.0;
    std::uint64_t seed = 1;

    /// Constant schedules: object parked at the canvas centre.
    static SequenceSpec stationary(std::size_t frames, std::size_t width, std::size_t height) {
        SequenceSpec s;
        s.frames = frames;
        s.width = width;
        s.height = height;
        s.center_x.assign(frames, 0.5 * static_cast<double>(width));
        s.center_y.assign(frames, 0.5 * static_cast<double>(height));
        s.scale.assign(frames, 1.0);
        s.rotation.assign(frames, 0.0);
        s.gain.assign(frames, 1.0);
        return s;
    }
};

struct SequenceDataset {
    std::string name;
    std::vector<Tensor> frames;  // H x W x 1, integer intensities 0..255
    std::vector<BoundingBox> gt;
    std::vector<bool> occluded;
    std::optional<SequenceSpec> spec;
};

inline void validate(const SequenceSpec& s) {
    auto fail = [&](const std::string& m) { throw ValidationError("sequence '" + s.name + "': " + m); };
    if (s.frames < 2) fail("needs at least 2 frames");
    if (s.width < 8 || s.height < 8) fail("canvas too small");
    for (const auto* sched : {&s.center_x, &s.center_y, &s.scale, &s.rotation, &s.gain}) {
        if (sched->size() != s.frames) fail("schedule length differs from frame count");
    }
    for (double v : s.scale) {
        if (!(v > 0.0)) fail("scale must be positive");
    }
    for (double v : s.gain) {
        if (!(v > 0.0)) fail("gain must be positive");
    }
    if (!(s.object_w > 0.0 && s.object_h > 0.0)) fail("object size must be positive");
    if (s.occluder && !(s.occluder->coverage >= 0.0 && s.occluder->coverage <= 1.0)) fail("occluder coverage outside [0, 1]");
    if (s.noise_std < 0.0) fail("noise_std must be nonnegative");
}

namespace texture {

inline double lattice(std::uint64_t seed, long ix, long iy) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL ^ (static_cast<std::uint64_t>(ix) * 0xC2B2AE3D27D4EB4FULL) ^
                      (static_cast<std::uint64_t>(iy) * 0x165667B19E3779F9ULL);
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDULL;
    h ^= h >> 33;
    h *= 0xC4CEB9FE1A85EC53ULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Smooth value noise in [0, 1).
inline double value_noise(std::uint64_t seed, double x, double y) {
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const long ix = static_cast<long>(fx0), iy = static_cast<long>(fy0);
    double tx = x - fx0, ty = y - fy0;
    tx = tx * tx * (3.0 - 2.0 * tx);
    ty = ty * ty * (3.0 - 2.0 * ty);
    const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
    const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

inline double background(std::uint64_t seed, double x, double y) {
    return 70.0 + 70.0 * value_noise(seed, x / 12.0, y / 12.0) + 20.0 * value_noise(seed + 17, x / 4.0, y / 4.0);
}

/// Object texture in normalised object coordinates (u, v in [-1, 1]).
inline double object(std::uint64_t seed, double u, double v) {
    const long cu = static_cast<long>(std::floor((u + 1.0) * 2.5));
    const long cv = static_cast<long>(std::floor((v + 1.0) * 2.5));
    const double base = ((cu + cv) & 1) ? 200.0 : 95.0;
    return base + 25.0 * value_noise(seed, 3.0 * u + 10.0, 3.0 * v + 10.0);
}

/// Striped occluding bar; depends on the pixel row only.
inline double occluder(std::size_t /*px*/, std::size_t py) { return (py / 3) % 2 ? 60.0 : 35.0; }

}  // namespace texture

namespace detail {

struct ObjectPose {
    double cx, cy, scale, cos_r, sin_r, half_w, half_h, warp, phase;
    ObjectShape shape;
};

inline ObjectPose pose_at(const SequenceSpec& s, std::size_t t) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / 15.0;
    return {s.center_x[t], s.center_y[t], s.scale[t], std::cos(s.rotation[t]), std::sin(s.rotation[t]),
            0.5 * s.object_w, 0.5 * s.object_h, s.warp_amplitude, phase, s.shape};
}

/// Maps an image point into warped object coordinates; returns whether it lies on the object.
inline bool object_coords(const ObjectPose& p, double x, double y, double& u, double& v) {
    const double dx = x - p.cx, dy = y - p.cy;
    const double lx = (p.cos_r * dx + p.sin_r * dy) / p.scale;
    const double ly = (-p.sin_r * dx + p.cos_r * dy) / p.scale;
    const double u0 = lx / p.half_w, v0 = ly / p.half_h;
    u = u0 + p.warp * std::sin(2.5 * v0 + p.phase);
    v = v0 + p.warp * std::sin(2.5 * u0 + 1.3 * p.phase);
    switch (p.shape) {
        case ObjectShape::rectangle: return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        case ObjectShape::ellipse: return u * u + v * v <= 1.0;
        case ObjectShape::two_blob: {
            const double a = (u + 0.45) / 0.55, b = v / 0.85;
            const double art = p.warp * std::sin(p.phase);
            const double c = (u - 0.45) / 0.55, d = (v - art) / 0.85;
            return a * a + b * b <= 1.0 || c * c + d * d <= 1.0;
        }
    }
    return false;
}

}  // namespace detail

/// Columns [x0, x1) hidden by the occluder at a given ground-truth box.
inline std::pair<long, long> occluder_columns(const Occluder& occ, const BoundingBox& gt) {
    const long x0 = static_cast<long>(std::lround(gt.x));
    return {x0, x0 + static_cast<long>(std::lround(occ.coverage * gt.w))};
}

inline SequenceDataset make_sequence(const SequenceSpec& spec) {
    validate(spec);
    const std::size_t W = spec.width, H = spec.height;
    constexpr int ss = 2;  // supersampling per axis
    std::vector<double> bg(W * H * ss * ss);
    for (std::size_t sy = 0; sy < H * ss; ++sy) {
        for (std::size_t sx = 0; sx < W * ss; ++sx) {
            bg[sy * W * ss + sx] = texture::background(spec.texture_seed + 101, (static_cast<double>(sx) + 0.5) / ss,
                                                       (static_cast<double>(sy) + 0.5) / ss);
        }
    }

    SequenceDataset ds;
    ds.name = spec.name;
    ds.spec = spec;
    for (std::size_t t = 0; t < spec.frames; ++t) {
        const auto pose = detail::pose_at(spec, t);
        const double reach = spec.scale[t] * std::hypot(pose.half_w, pose.half_h) * (1.0 + 2.0 * std::abs(spec.warp_amplitude)) + 2.0;
        Tensor frame({H, W, 1});
        long min_x = static_cast<long>(W), min_y = static_cast<long>(H), max_x = -1, max_y = -1;
        for (std::size_t py = 0; py < H; ++py) {
            for (std::size_t px = 0; px < W; ++px) {
                double acc = 0.0;
                bool hit = false;
                for (int a = 0; a < ss; ++a) {
                    for (int b = 0; b < ss; ++b) {
                        const double x = static_cast<double>(px) + (b + 0.5) / ss;
                        const double y = static_cast<double>(py) + (a + 0.5) / ss;
                        double u = 0.0, v = 0.0;
                        if (std::abs(x - pose.cx) <= reach && std::abs(y - pose.cy) <= reach &&
                            detail::object_coords(pose, x, y, u, v)) {
                            acc += texture::object(spec.texture_seed, u, v);
                            hit = true;
                        } else {
                            acc += bg[(py * ss + static_cast<std::size_t>(a)) * W * ss + px * ss + static_cast<std::size_t>(b)];
                        }
                    }
                }
                frame[py * W + px] = acc / (ss * ss);
                if (hit) {
                    min_x = std::min(min_x, static_cast<long>(px));
                    max_x = std::max(max_x, static_cast<long>(px));
                    min_y = std::min(min_y, static_cast<long>(py));
                    max_y = std::max(max_y, static_cast<long>(py));
                }
            }
        }
        if (max_x < 0) {
            throw ValidationError("sequence '" + spec.name + "': object leaves the canvas at frame " + std::to_string(t));
        }
        const BoundingBox gt{static_cast<double>(min_x), static_cast<double>(min_y),
                             static_cast<double>(max_x - min_x + 1), static_cast<double>(max_y - min_y + 1)};

        const bool occluded = spec.occluder && spec.occluder->active(t) && spec.occluder->coverage > 0.0;
        if (occluded) {
            const auto [c0, c1] = occluder_columns(*spec.occluder, gt);
            for (long px = std::max(0L, c0); px < std::min(static_cast<long>(W), c1); ++px) {
                for (std::size_t py = 0; py < H; ++py) {
                    frame[py * W + static_cast<std::size_t>(px)] = texture::occluder(static_cast<std::size_t>(px), py);
                }
            }
        }

        std::mt19937_64 noise_rng(spec.seed * 1000003ULL + t);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            double v = frame[i] * spec.gain[t];
            if (spec.noise_std > 0.0) v += spec.noise_std * noise(noise_rng);
            frame[i] = std::clamp(std::round(v), 0.0, 255.0);
        }
        ds.frames.push_back(std::move(frame));
        ds.gt.push_back(gt);
        ds.occluded.push_back(occluded);
    }
    return ds;
}

inline const std::vector<std::string>& attribute_names() {
    static const std::vector<std::string> names{"static", "deformation", "rotation", "scale", "illumination", "occlusion"};
    return names;
}

/// Six fixed-layout 60-frame sequences, one per challenge attribute plus a
/// static control. Drift direction and textures depend on `seed`.
inline std::vector<SequenceDataset> attribute_suite(std::uint64_t seed) {
    constexpr std::size_t frames = 60;
    constexpr std::size_t size = 128;
    std::mt19937_64 rng(seed * 7919ULL + 13ULL);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const auto& names = attribute_names();

    std::vector<SequenceDataset> suite;
    for (std::size_t k = 0; k < names.size(); ++k) {
        SequenceSpec s = SequenceSpec::stationary(frames, size, size);
        s.name = names[k];
        s.texture_seed = seed * 131ULL + k;
        s.seed = seed * 977ULL + k;
        s.noise_std = 2.0;
        const double dir = angle(rng);
        const double speed = names[k] == "static" ? 0.0 : 0.3;
        for (std::size_t t = 0; t < frames; ++t) {
            const double ft = static_cast<double>(t);
            const double arc = std::sin(std::numbers::pi * ft / static_cast<double>(frames - 1));
            s.center_x[t] += speed * ft * std::cos(dir);
            s.center_y[t] += speed * ft * std::sin(dir);
            if (names[k] == "deformation") {
                s.shape = ObjectShape::two_blob;
                s.object_w = 32.0;
                s.object_h = 26.0;
                s.warp_amplitude = 0.25;
            } else if (names[k] == "rotation") {
                s.rotation[t] = ft * 1.5 * std::numbers::pi / 180.0;
            } else if (names[k] == "scale") {
                s.shape = ObjectShape::ellipse;
                s.object_w = 26.0;
                s.object_h = 30.0;
                s.scale[t] = 1.0 + 0.5 * arc;
            } else if (names[k] == "illumination") {
                s.gain[t] = 1.0 - 0.45 * arc;
            }
        }
        if (names[k] == "occlusion") s.occluder = Occluder{25, 39, 0.5};
        suite.push_back(make_sequence(s));
    }
    return suite;
}

}  // namespace gdt
