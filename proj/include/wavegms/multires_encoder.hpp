#pragma once

#include <torch/torch.h>

#include "wavegms/core_types.hpp"
#include "wavegms/nn_blocks.hpp"

namespace wavegms {

// Defaults are sized so the full encoder lands on the ~1.03M trainable
// parameter budget.
struct EncoderConfig {
    int64_t per_level_channels = 48;
    int64_t aggregation_channels = 96;
    int64_t blocks_per_module = 3;
    bool conv_bias = true;
    int64_t parameter_budget = 1'030'000;
};

// Trainable multi-resolution encoder: a per-level feature extractor over each
// 12-channel Haar stack, dyadic average-pool downsampling to the coarsest
// grid, channel concatenation [vv F1 | v F2 | F3], and an aggregation network
// projecting to the 4-channel latent. No spatial resampling happens inside the
// per-level extractors or the aggregation network.
struct MultiResEncoderImpl : torch::nn::Module {
    explicit MultiResEncoderImpl(EncoderConfig config = {});

    // F_l for level in {1,2,3}; spatial size preserved.
    torch::Tensor extract_features(const torch::Tensor& level_stack, int level);

    // 2x2 average pooling twice on F1 and once on F2, then channel concat.
    static torch::Tensor fuse_levels(const torch::Tensor& f1,
                                     const torch::Tensor& f2,
                                     const torch::Tensor& f3);

    Latent aggregate(const torch::Tensor& fused);

    // Full path: decompose -> extract x3 -> fuse -> aggregate. Input must be
    // in signed range.
    Latent encode(const Image& img);

    int64_t trainable_parameter_count() const;

    EncoderConfig config;
    torch::nn::Sequential phi1{nullptr}, phi2{nullptr}, phi3{nullptr};
    torch::nn::Sequential agg{nullptr};
};
TORCH_MODULE(MultiResEncoder);

}  // namespace wavegms
