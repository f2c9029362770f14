#include "camforge/params.hpp"

#include <cmath>

#include "camforge/rng.hpp"

namespace camforge {

Parameter& ParameterStore::add(const std::string& name, std::vector<int64_t> shape,
                               InitSpec init) {
    if (!names_.insert(name).second)
        throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(shape);
    p->grad = Tensor(std::move(shape));
    p->init = init;
    params_.push_back(std::move(p));
    return *params_.back();
}

Buffer& ParameterStore::add_buffer(const std::string& name, std::vector<int64_t> shape,
                                   float init_value) {
    if (!names_.insert(name).second)
        throw ConfigError("duplicate parameter name: " + name);
    auto b = std::make_unique<Buffer>();
    b->name = name;
    b->value = Tensor(std::move(shape));
    b->init_value = init_value;
    buffers_.push_back(std::move(b));
    return *buffers_.back();
}

int64_t ParameterStore::total_params() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
}

void ParameterStore::initialize(uint64_t seed) {
    Rng rng(seed);
    for (auto& p : params_) {
        float* d = p->value.data();
        int64_t n = p->value.numel();
        switch (p->init.kind) {
        case InitSpec::Zeros:
            for (int64_t i = 0; i < n; ++i) d[i] = 0.0f;
            break;
        case InitSpec::Ones:
            for (int64_t i = 0; i < n; ++i) d[i] = 1.0f;
            break;
        case InitSpec::KaimingUniform: {
            if (p->init.fan_in < 1)
                throw ConfigError("kaiming init needs a positive fan-in for " + p->name);
            double bound = std::sqrt(6.0 / static_cast<double>(p->init.fan_in));
            for (int64_t i = 0; i < n; ++i)
                d[i] = static_cast<float>(rng.uniform(-bound, bound));
            break;
        }
        }
    }
    for (auto& b : buffers_) {
        float* d = b->value.data();
        for (int64_t i = 0; i < b->value.numel(); ++i) d[i] = b->init_value;
    }
    zero_grads();
}

void ParameterStore::zero_grads() {
    for (auto& p : params_) {
        float* g = p->grad.data();
        for (int64_t i = 0; i < p->grad.numel(); ++i) g[i] = 0.0f;
    }
}

} // namespace camforge
