#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lut {

// Error thrown when a forward/backward pass produces NaN/Inf or when shapes
// do not line up.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class shape_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d < 0) throw shape_error("negative extent in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense n-dimensional array, row-major. S is float for training and double
// for the gradient-verification mode.
template <class S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, S fill = S(0))
        : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

    Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
            throw shape_error("data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_str(shape_));
    }

    const Shape& shape() const { return shape_; }
    int64_t dim(size_t i) const { return shape_.at(i); }
    size_t ndim() const { return shape_.size(); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& vec() { return data_; }
    const std::vector<S>& vec() const { return data_; }

    S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const S& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // NCHW accessor
    S& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const S& at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (S v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void check_finite(const char* what) const {
        if (!all_finite())
            throw numeric_error(std::string("non-finite value produced by ") + what);
    }

    Tensor<double> to_double() const {
        Tensor<double> out;
        out.reset(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<double>(data_[static_cast<size_t>(i)]);
        return out;
    }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.reset(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<T>(data_[static_cast<size_t>(i)]);
        return out;
    }

    void reset(const Shape& shape, S fill = S(0)) {
        shape_ = shape;
        data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
    }

private:
    Shape shape_;
    std::vector<S> data_;
};

// Global toggle for post-op finite checks. On by default; the benchmark
// target switches it off to time raw kernels.
inline bool& finite_checks_enabled() {
    static bool enabled = true;
    return enabled;
}

} // namespace lut
