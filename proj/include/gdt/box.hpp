#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gdt/tensor.hpp"

namespace gdt {

/// Axis-aligned box in pixel units; (x, y) is the top-left corner.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double area() const { return w * h; }
    bool valid() const { return std::isfinite(x) && std::isfinite(y) && w > 0.0 && h > 0.0 && std::isfinite(w) && std::isfinite(h); }

    static BoundingBox from_center(double cx, double cy, double w, double h) {
        return {cx - 0.5 * w, cy - 0.5 * h, w, h};
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline void require_valid(const BoundingBox& b, const char* what) {
    if (!b.valid()) {
        throw ValidationError(std::string(what) + ": degenerate box (" + std::to_string(b.x) + ", " +
                              std::to_string(b.y) + ", " + std::to_string(b.w) + ", " + std::to_string(b.h) + ")");
    }
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

inline double center_error(const BoundingBox& pred, const BoundingBox& gt) {
    return std::hypot(pred.cx() - gt.cx(), pred.cy() - gt.cy());
}

}  // namespace gdt
