#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "camforge/model.hpp"
#include "camforge/tensor.hpp"

namespace camforge {

// Binary tensor-record container. Layout: magic "CAMW", version u32, then
// repeated records {name_len u32, name bytes, ndim u32, dims u32[], f32
// little-endian data}. Round trips are bit-exact.
inline constexpr uint32_t kWeightFileVersion = 1;

void write_tensor_records(const std::string& path,
                          const std::vector<std::pair<std::string, const Tensor*>>& records);
std::vector<std::pair<std::string, Tensor>> read_tensor_records(const std::string& path);

// Model weights: every parameter and batchnorm buffer, in creation order.
void save_weights(const Model& model, const std::string& path);

// Builds the architecture from `config` and fills it from `path`. Missing
// tensors, unknown extra tensors, and dimension mismatches raise FormatError
// naming the offending record.
Model load_weights(const ModelConfig& config, const std::string& path);

// Embedding store: tensor records keyed by utterance id, rank-1, equal dims.
void save_embeddings(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& embeddings);
std::map<std::string, Tensor> load_embeddings(const std::string& path);

} // namespace camforge
