#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavegms {

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Value convention for image tensors: Unit is [0,1], Signed is [-1,1].
// The frozen VAE and the multi-resolution encoder both consume Signed input.
enum class ValueRange { Unit, Signed };

// RGB image batch [B,3,H,W] with H and W divisible by 8.
struct Image {
    torch::Tensor data;
    ValueRange range = ValueRange::Unit;

    static Image from_unit(torch::Tensor data);
    static Image from_signed(torch::Tensor data);

    int64_t batch() const { return data.size(0); }
    int64_t height() const { return data.size(2); }
    int64_t width() const { return data.size(3); }
};

// Binary segmentation mask batch [B,1,H,W], values exactly {0,1}.
struct Mask {
    torch::Tensor data;

    static Mask from_binary(torch::Tensor data);

    // View broadcast to three identical channels, used only at the VAE boundary.
    torch::Tensor broadcast3() const;

    int64_t batch() const { return data.size(0); }
    int64_t height() const { return data.size(2); }
    int64_t width() const { return data.size(3); }
};

enum class LatentKind { Image, Mask, MultiRes, Predicted };

// 4-channel latent [B,4,H/8,W/8]; z_I, z_M, z_MR and the LMM prediction all
// share this shape.
struct Latent {
    torch::Tensor data;
    LatentKind kind = LatentKind::Image;

    static Latent make(torch::Tensor data, LatentKind kind);

    int64_t batch() const { return data.size(0); }
    int64_t height() const { return data.size(2); }
    int64_t width() const { return data.size(3); }
};

// Three stacked Haar levels; level l holds [B,12,H/2^l,W/2^l] ordered
// [LL|LH|HL|HH] with 3 RGB channels per subband.
struct MultiResDecomposition {
    std::vector<torch::Tensor> levels;

    static MultiResDecomposition make(std::vector<torch::Tensor> levels);
};

// Per-decoder-stage outputs of the latent mapping model. stage_latents has
// exactly 4 entries and the last one is the predicted mask latent. stage_masks
// is filled by the pipeline (decode + probability map) before the seg loss.
struct DeepSupervisionBundle {
    static constexpr size_t kStages = 4;

    std::vector<Latent> stage_latents;
    std::vector<torch::Tensor> stage_masks;  // each [B,1,H,W] in [0,1]

    const Latent& predicted_latent() const;
};

// Maps [0,1] to [-1,1] via 2x-1. Rejects inputs outside the declared range.
Image to_signed_range(const Image& img);

// Inverse of to_signed_range; round-trips within 1e-6.
Image to_unit_range(const Image& img);

// Strict greater-than threshold; threshold must lie in (0,1).
Mask binarize(const torch::Tensor& pred, double threshold = 0.5);

}  // namespace wavegms
