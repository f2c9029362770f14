#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "camforge/tensor.hpp"

namespace camforge {

struct InitSpec {
    enum Kind { Zeros, Ones, KaimingUniform };
    Kind kind = Zeros;
    int64_t fan_in = 0; // KaimingUniform only

    static InitSpec zeros() { return {Zeros, 0}; }
    static InitSpec ones() { return {Ones, 0}; }
    static InitSpec kaiming(int64_t fan_in) { return {KaimingUniform, fan_in}; }
};

// Trainable tensor. The gradient buffer always exists and matches the value
// shape; optimizers and backward passes accumulate into it.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    InitSpec init;
};

// Non-trainable state (batch-norm running statistics).
struct Buffer {
    std::string name;
    Tensor value;
    float init_value = 0.0f;
};

// Owns every parameter and buffer of a model, in creation order. Creation
// order is the serialization order and the initialization draw order, so a
// fixed seed reproduces values bit for bit.
class ParameterStore {
public:
    Parameter& add(const std::string& name, std::vector<int64_t> shape, InitSpec init);
    Buffer& add_buffer(const std::string& name, std::vector<int64_t> shape, float init_value);

    const std::vector<std::unique_ptr<Parameter>>& params() const { return params_; }
    const std::vector<std::unique_ptr<Buffer>>& buffers() const { return buffers_; }

    int64_t total_params() const;

    // Fills parameters per their InitSpec from a single seeded stream, resets
    // buffers to their init value, and zeroes gradients.
    void initialize(uint64_t seed);

    void zero_grads();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::vector<std::unique_ptr<Buffer>> buffers_;
    std::unordered_set<std::string> names_;
};

} // namespace camforge
