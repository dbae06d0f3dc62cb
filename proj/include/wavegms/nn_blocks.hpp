#pragma once

#include <torch/torch.h>

namespace wavegms {

// Pre-activation residual block at constant spatial resolution:
// GN -> SiLU -> conv3x3 -> GN -> SiLU -> conv3x3, plus a 1x1 projection on the
// skip path when the channel count changes. Channel counts must be divisible
// by the group-norm group count (8).
struct ResidualBlockImpl : torch::nn::Module {
    ResidualBlockImpl(int64_t in_channels, int64_t out_channels,
                      bool conv_bias = true);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::Conv2d skip{nullptr};  // null when in_channels == out_channels
};
TORCH_MODULE(ResidualBlock);

// Single-head spatial self-attention over the h*w positions with a residual
// add. q/k/v/proj are 1x1 convolutions; softmax rows sum to 1.
struct SpatialSelfAttentionImpl : torch::nn::Module {
    explicit SpatialSelfAttentionImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);
    // Row-stochastic weights [B, hw, hw]; recomputed, for inspection/tests.
    torch::Tensor attention_map(const torch::Tensor& x);

    torch::nn::GroupNorm norm{nullptr};
    torch::nn::Conv2d to_q{nullptr}, to_k{nullptr}, to_v{nullptr},
        proj{nullptr};
    int64_t channels_ = 0;
};
TORCH_MODULE(SpatialSelfAttention);

int64_t parameter_count(const torch::nn::Module& module, bool trainable_only = false);

}  // namespace wavegms
