#include "camforge/tensor.hpp"

#include <cmath>

namespace camforge {

void ensure_finite(const Tensor& t, const char* op) {
    const float* p = t.data();
    int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i]))
            throw NumericError(std::string(op) + " produced a non-finite value at flat index " +
                               std::to_string(i));
    }
}

void accumulate(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src))
        throw UsageError("gradient accumulate shape mismatch: " + dst.shape_str() + " vs " +
                         src.shape_str());
    float* d = dst.data();
    const float* s = src.data();
    int64_t n = dst.numel();
    for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}

} // namespace camforge
