#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gdt {

/// Raised when operands disagree on extents. The message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad user input: config values, malformed files, out-of-range arguments.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A well-formed request that could not be completed (e.g. a sampling budget ran out).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Dims = std::vector<std::size_t>;

inline std::string dims_to_string(const Dims& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << 'x';
        os << dims[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t dims_product(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles. The last axis varies fastest, so an
/// H x W x C feature map stores the C channel values of a pixel contiguously.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Dims dims, double fill = 0.0) : dims_(std::move(dims)), data_(dims_product(dims_), fill) {
        check_extents();
    }

    Tensor(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != dims_product(dims_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                             dims_to_string(dims_));
        }
    }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Element of a rank-3 tensor.
    double& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }

    /// Same data, new extents; the element count must agree.
    Tensor reshaped(Dims dims) const {
        if (dims_product(dims) != data_.size()) {
            throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
        }
        return Tensor(std::move(dims), data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    void check_extents() const {
        for (std::size_t d : dims_) {
            if (d == 0) throw ShapeError("tensor extents must be positive, got " + dims_to_string(dims_));
        }
    }

    Dims dims_;
    std::vector<double> data_;
};

inline void require_dims(const Tensor& t, const Dims& expected, const char* what) {
    if (t.dims() != expected) {
        throw ShapeError(std::string(what) + ": expected " + dims_to_string(expected) + ", got " +
                         dims_to_string(t.dims()));
    }
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         dims_to_string(t.dims()));
    }
}

/// a += b, elementwise. Shapes must match.
inline void accumulate(Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("accumulate: " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));
    }
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("max_abs_diff: " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace gdt
