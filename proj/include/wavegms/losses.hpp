#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "wavegms/core_types.hpp"

namespace wavegms {

// One training step's objective, broken out by term. Values stay attached to
// the autograd graph; use the *_value accessors for logging.
struct LossReport {
    torch::Tensor seg, lm, align, total;
    std::vector<torch::Tensor> per_stage_seg, per_stage_lm;

    double seg_value() const { return seg.item<double>(); }
    double lm_value() const { return lm.item<double>(); }
    double align_value() const { return align.item<double>(); }
    double total_value() const { return total.item<double>(); }

    // Throws with a per-term dump if any component is NaN or infinite.
    void check_finite(const std::string& context) const;
};

inline constexpr double kDiceEps = 1e-5;

// 1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps), per sample, then averaged
// over the batch. pred holds probabilities in [0,1], target a binary mask.
torch::Tensor soft_dice(const torch::Tensor& pred, const torch::Tensor& target);
torch::Tensor soft_dice(const torch::Tensor& pred, const Mask& target);

// Mean of the four per-stage soft-dice losses against the ground truth. The
// bundle's stage_masks must already hold decoded mask probabilities.
std::pair<torch::Tensor, std::vector<torch::Tensor>> seg_loss(
    const DeepSupervisionBundle& bundle, const Mask& target);

// Mean over the four stages of the MSE between each stage latent and the
// target mask latent.
std::pair<torch::Tensor, std::vector<torch::Tensor>> lm_loss(
    const DeepSupervisionBundle& bundle, const Latent& z_m);

// 0.9*(1 - cos(z_mr, z_i)) + 0.1*mean|z_mr - z_i|. Cosine is taken between
// per-sample flattened vectors and averaged over the batch; the L1 term is
// the mean absolute difference over all elements. A zero-norm vector carries
// no direction, so its sample's (1 - cos) term is defined as 1.
torch::Tensor align_loss(const Latent& z_mr, const Latent& z_i);

// Unweighted sum of the three terms; the alignment term is zeroed when
// disabled (ablation switch).
LossReport total_loss(const DeepSupervisionBundle& bundle, const Mask& target,
                      const Latent& z_m, const Latent& z_mr, const Latent& z_i,
                      bool align_enabled);

}  // namespace wavegms
