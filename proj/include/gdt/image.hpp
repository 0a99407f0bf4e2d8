#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gdt/box.hpp"
#include "gdt/tensor.hpp"

namespace gdt {

// Images are H x W x C tensors of intensities; frames are single channel 0..255.

inline std::vector<double> channel_means(const Tensor& image) {
    require_rank(image, 3, "image");
    const std::size_t c = image.dim(2);
    std::vector<double> mean(c, 0.0);
    const std::size_t pixels = image.dim(0) * image.dim(1);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < c; ++k) mean[k] += image[p * c + k];
    }
    for (double& m : mean) m /= static_cast<double>(pixels);
    return mean;
}

/// Bilinear crop-and-resize of `box` to an out_size x out_size patch. Output pixel
/// (r, c) samples the frame at the centre of its cell inside the box; pixels
/// outside the frame read as the frame's mean intensity.
inline Tensor extract_patch(const Tensor& frame, const BoundingBox& box, std::size_t out_size,
                            const std::vector<double>& fill) {
    require_rank(frame, 3, "extract_patch frame");
    require_valid(box, "extract_patch");
    if (out_size == 0) throw ValidationError("extract_patch: output size must be positive");
    const std::size_t h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
    Tensor out({out_size, out_size, c});
    const double sx = box.w / static_cast<double>(out_size);
    const double sy = box.h / static_cast<double>(out_size);
    for (std::size_t r = 0; r < out_size; ++r) {
        const double y = box.y + (static_cast<double>(r) + 0.5) * sy - 0.5;
        const double fy0 = std::floor(y);
        const double fy = y - fy0;
        const long y0 = static_cast<long>(std::clamp(fy0, -2.0, static_cast<double>(h) + 1.0));
        for (std::size_t col = 0; col < out_size; ++col) {
            const double x = box.x + (static_cast<double>(col) + 0.5) * sx - 0.5;
            const double fx0 = std::floor(x);
            const double fx = x - fx0;
            const long x0 = static_cast<long>(std::clamp(fx0, -2.0, static_cast<double>(w) + 1.0));
            double* o = out.data() + (r * out_size + col) * c;
            const double wts[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
            const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
            const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
            for (int n = 0; n < 4; ++n) {
                if (wts[n] == 0.0) continue;
                const bool inside = ys[n] >= 0 && xs[n] >= 0 && ys[n] < static_cast<long>(h) && xs[n] < static_cast<long>(w);
                for (std::size_t k = 0; k < c; ++k) {
                    const double v = inside ? frame[(static_cast<std::size_t>(ys[n]) * w + static_cast<std::size_t>(xs[n])) * c + k]
                                            : fill[k];
                    o[k] += wts[n] * v;
                }
            }
        }
    }
    return out;
}

inline Tensor extract_patch(const Tensor& frame, const BoundingBox& box, std::size_t out_size) {
    return extract_patch(frame, box, out_size, channel_means(frame));
}

/// Network input from a single-channel patch: intensity rescaled to roughly
/// [-2, 2], optionally followed by horizontal and vertical central-difference
/// gradient channels.
inline Tensor network_input(const Tensor& patch, std::size_t channels) {
    require_rank(patch, 3, "network_input patch");
    if (patch.dim(2) != 1) throw ShapeError("network_input: expected single-channel patch, got " + dims_to_string(patch.dims()));
    if (channels != 1 && channels != 3) throw ValidationError("network_input: channels must be 1 or 3");
    const std::size_t h = patch.dim(0), w = patch.dim(1);
    Tensor out({h, w, channels});
    auto intensity = [&](std::size_t i, std::size_t j) { return (patch[i * w + j] - 128.0) / 64.0; };
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double* o = out.data() + (i * w + j) * channels;
            o[0] = intensity(i, j);
            if (channels == 3) {
                const std::size_t jl = j > 0 ? j - 1 : j, jr = j + 1 < w ? j + 1 : j;
                const std::size_t iu = i > 0 ? i - 1 : i, id = i + 1 < h ? i + 1 : i;
                o[1] = (intensity(i, jr) - intensity(i, jl)) * 0.5;
                o[2] = (intensity(id, j) - intensity(iu, j)) * 0.5;
            }
        }
    }
    return out;
}

// --- PGM ------------------------------------------------------------------

namespace detail {

inline std::string pgm_token(std::istream& in) {
    std::string tok;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string ignored;
            std::getline(in, ignored);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

}  // namespace detail

/// Reads a binary (P5) or ASCII (P2) PGM into an H x W x 1 tensor of raw values.
inline Tensor read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open PGM " + path.string());
    const std::string magic = detail::pgm_token(in);
    if (magic != "P5" && magic != "P2") throw ValidationError(path.string() + ": not a PGM file (magic '" + magic + "')");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(detail::pgm_token(in));
        h = std::stoul(detail::pgm_token(in));
        maxval = std::stoul(detail::pgm_token(in));
    } catch (const std::exception&) {
        throw ValidationError(path.string() + ": malformed PGM header");
    }
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw ValidationError(path.string() + ": bad PGM header values");
    Tensor img({h, w, 1});
    if (magic == "P5") {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> buf(w * h * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ValidationError(path.string() + ": truncated PGM data");
        for (std::size_t i = 0; i < w * h; ++i) {
            img[i] = bytes == 1 ? buf[i] : static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
        }
    } else {
        for (std::size_t i = 0; i < w * h; ++i) {
            const std::string tok = detail::pgm_token(in);
            if (tok.empty()) throw ValidationError(path.string() + ": truncated PGM data");
            img[i] = std::stod(tok);
        }
    }
    return img;
}

/// Writes an 8-bit binary PGM; values are rounded and clamped to [0, 255].
inline void write_pgm(const std::filesystem::path& path, const Tensor& image) {
    require_rank(image, 3, "write_pgm image");
    if (image.dim(2) != 1) throw ShapeError("write_pgm: expected one channel, got " + dims_to_string(image.dims()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write PGM " + path.string());
    out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
    std::vector<unsigned char> buf(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        buf[i] = static_cast<unsigned char>(std::clamp(std::lround(image[i]), 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace gdt
