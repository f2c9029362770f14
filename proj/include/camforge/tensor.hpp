#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camforge/error.hpp"

namespace camforge {

// Dense row-major float tensor. Rank is dynamic (0..4 in practice).
// Shape extents must be positive; a default-constructed tensor is empty.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(check_shape(shape_), 0.0f);
    }

    Tensor(std::vector<int64_t> shape, std::vector<float> data) : shape_(std::move(shape)) {
        int64_t n = check_shape(shape_);
        if (static_cast<int64_t>(data.size()) != n)
            throw ConfigError("tensor data length " + std::to_string(data.size()) +
                              " does not match shape element count " + std::to_string(n));
        data_ = std::move(data);
    }

    static Tensor full(std::vector<int64_t> shape, float value) {
        Tensor t(std::move(shape));
        for (float& v : t.data_) v = value;
        return t;
    }

    static Tensor scalar(float value) { return full({1}, value); }

    bool empty() const { return data_.empty(); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    const std::vector<int64_t>& shape() const { return shape_; }

    int64_t dim(int i) const {
        if (i < 0 || i >= ndim())
            throw UsageError("tensor dim index " + std::to_string(i) + " out of range for rank " +
                             std::to_string(ndim()));
        return shape_[i];
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Row-major index helpers for ranks 2 and 3.
    float& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    float at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    float& at(int64_t i, int64_t j, int64_t k) {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    float at(int64_t i, int64_t j, int64_t k) const {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (int i = 0; i < ndim(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static int64_t check_shape(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d <= 0)
                throw ConfigError("tensor shape extent must be positive, got " + std::to_string(d));
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

// Throws NumericError naming `op` if any element of `t` is NaN or infinite.
void ensure_finite(const Tensor& t, const char* op);

// Elementwise in-place accumulate: dst += src. Shapes must match.
void accumulate(Tensor& dst, const Tensor& src);

} // namespace camforge
