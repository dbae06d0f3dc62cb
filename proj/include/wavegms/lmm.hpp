#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "wavegms/core_types.hpp"
#include "wavegms/nn_blocks.hpp"

namespace wavegms {

struct LmmConfig {
    // Channel widths of the four encoder stages; the decoder mirrors them.
    std::vector<int64_t> encoder_channels{32, 64, 96, 128};
    int64_t latent_channels = 4;
    int64_t parameter_budget = 1'560'000;
    double budget_tolerance = 0.15;
};

// Residual block followed by spatial self-attention, the repeating unit of
// the mapping model.
struct ResAttnBlockImpl : torch::nn::Module {
    ResAttnBlockImpl(int64_t in_channels, int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

    ResidualBlock res{nullptr};
    SpatialSelfAttention attn{nullptr};
};
TORCH_MODULE(ResAttnBlock);

// Maps a multi-resolution latent [B,4,h,w] to a predicted mask latent of the
// same shape. Encoder-decoder at constant spatial resolution: four widening
// encoder stages, four narrowing decoder stages with concatenation skips, and
// a 1x1 prediction head per decoder stage for deep supervision. The final
// head's output is the model's prediction; inference evaluates only that one.
struct LatentMappingModelImpl : torch::nn::Module {
    explicit LatentMappingModelImpl(LmmConfig config = {});

    // All four stage predictions, shallowest decoder stage first. The last
    // element is the final prediction.
    std::vector<Latent> forward(const Latent& z_input);

    // Final prediction only; bit-identical to forward(...).back().
    Latent forward_inference(const Latent& z_input);

    int64_t trainable_parameter_count() const;

    LmmConfig config;
    torch::nn::Conv2d stem{nullptr};
    ResAttnBlock enc1{nullptr}, enc2{nullptr}, enc3{nullptr}, enc4{nullptr};
    ResAttnBlock dec1{nullptr}, dec2{nullptr}, dec3{nullptr}, dec4{nullptr};
    torch::nn::Conv2d head1{nullptr}, head2{nullptr}, head3{nullptr},
        head4{nullptr};

  private:
    // Shared trunk: returns the four decoder stage features.
    std::vector<torch::Tensor> trunk(const torch::Tensor& z);
};
TORCH_MODULE(LatentMappingModel);

}  // namespace wavegms
