#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace wavegms::io {

// Named-tensor archive: 8-byte magic, u64 manifest length, JSON manifest
// (tensor name -> dtype/shape/offset), then raw little-endian tensor data.
// Used for the frozen VAE weights and for model checkpoints.

using NamedTensorList = std::vector<std::pair<std::string, torch::Tensor>>;

struct TensorArchive {
    NamedTensorList tensors;
    nlohmann::json meta;

    const torch::Tensor* find(const std::string& name) const;
};

void save_named_tensors(const std::string& path, const NamedTensorList& tensors,
                        const nlohmann::json& meta = nlohmann::json::object());

// Throws std::runtime_error on a missing, truncated or malformed file; never
// returns partial state.
TensorArchive load_named_tensors(const std::string& path);

// FNV-1a over names, shapes and raw data. Stable across runs and platforms of
// the same endianness; used to pin the frozen VAE weights inside checkpoints.
uint64_t fingerprint_tensors(const NamedTensorList& tensors);

NamedTensorList named_parameters_of(const torch::nn::Module& module);

// Copies archive tensors into the module's parameters and buffers by name.
// Reports every missing/unexpected/shape-mismatched entry in one error.
void load_into_module(torch::nn::Module& module, const TensorArchive& archive,
                      const std::string& prefix = "");

}  // namespace wavegms::io
