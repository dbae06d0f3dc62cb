#pragma once

#include <torch/torch.h>

#include <atomic>
#include <cstdint>
#include <string>

#include "wavegms/core_types.hpp"

namespace wavegms {

// Frozen compact VAE wrapping the public tiny autoencoder layout (TAESD-style:
// ~1.22M parameters per half, 8x downsampling, 4 latent channels, direct
// deterministic latents). Module names mirror the public release's state-dict
// keys, so converted weights load by name. The adapter speaks the project's
// signed [-1,1] convention at its boundary and maps to the network's native
// [0,1] internally.
struct TinyVaeImpl : torch::nn::Module {
    TinyVaeImpl();

    // [B,3,H,W] signed, H and W divisible by 8 -> latent [B,4,H/8,W/8].
    Latent encode(const torch::Tensor& x_signed,
                  LatentKind kind = LatentKind::Image);
    Latent encode_image(const Image& img);
    Latent encode_mask(const Mask& mask);

    // [B,4,h,w] -> [B,3,8h,8w], clamped to [-1,1].
    torch::Tensor decode(const torch::Tensor& z);
    torch::Tensor decode(const Latent& z) { return decode(z.data); }

    void freeze();
    bool frozen() const { return frozen_; }

    int64_t encoder_parameter_count() const;
    int64_t decoder_parameter_count() const;
    uint64_t weight_fingerprint() const;

    // Audit counter for the inference-path isolation check.
    int64_t encode_calls() const { return encode_calls_.load(); }
    void reset_encode_calls() { encode_calls_.store(0); }

    torch::nn::Sequential encoder{nullptr}, decoder{nullptr};

  private:
    bool frozen_ = false;
    mutable std::atomic<int64_t> encode_calls_{0};
};
TORCH_MODULE(TinyVae);

// Deterministic randomly initialized stand-in with the same architecture;
// used by tests so the pipeline runs without the external weight file.
TinyVae make_standin_vae(uint64_t seed);

// Loads converted pretrained weights from a named-tensor archive. Missing
// file errors tell the user how to provide weights; mismatched architectures
// report every offending tensor name/shape. The result is frozen.
TinyVae load_pretrained_vae(const std::string& path);

void save_vae_weights(const TinyVae& vae, const std::string& path);

// Channel mean of a signed decode, affinely mapped to [0,1].
torch::Tensor decoded_to_mask_probability(const torch::Tensor& decoded_signed);

}  // namespace wavegms
