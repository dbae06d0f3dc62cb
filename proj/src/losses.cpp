#include "wavegms/losses.hpp"

#include <cmath>
#include <sstream>

namespace wavegms {

namespace {

bool finite_scalar(const torch::Tensor& t) {
    return std::isfinite(t.item<double>());
}

}  // namespace

void LossReport::check_finite(const std::string& context) const {
    if (finite_scalar(seg) && finite_scalar(lm) && finite_scalar(align) &&
        finite_scalar(total)) {
        return;
    }
    std::ostringstream msg;
    msg << "non-finite loss at " << context << ": seg=" << seg.item<double>()
        << " lm=" << lm.item<double>() << " align=" << align.item<double>()
        << " total=" << total.item<double>() << "; per-stage seg=[";
    for (const auto& s : per_stage_seg) msg << s.item<double>() << " ";
    msg << "] per-stage lm=[";
    for (const auto& s : per_stage_lm) msg << s.item<double>() << " ";
    msg << "]";
    throw std::runtime_error(msg.str());
}

torch::Tensor soft_dice(const torch::Tensor& pred,
                        const torch::Tensor& target) {
    check(pred.sizes() == target.sizes(),
          "soft dice needs matching pred/target shapes");
    check(pred.dim() == 4 && pred.size(1) == 1,
          "soft dice expects [B,1,H,W] inputs");
    auto p = pred.flatten(1);
    auto t = target.flatten(1).to(p.dtype());
    auto inter = (p * t).sum(1);
    auto denom = p.sum(1) + t.sum(1);
    auto dice = (2.0 * inter + kDiceEps) / (denom + kDiceEps);
    return (1.0 - dice).mean();
}

torch::Tensor soft_dice(const torch::Tensor& pred, const Mask& target) {
    return soft_dice(pred, target.data);
}

std::pair<torch::Tensor, std::vector<torch::Tensor>> seg_loss(
    const DeepSupervisionBundle& bundle, const Mask& target) {
    check(bundle.stage_masks.size() == DeepSupervisionBundle::kStages,
          "segmentation loss needs all stage masks decoded");
    std::vector<torch::Tensor> per_stage;
    torch::Tensor sum;
    for (const auto& m : bundle.stage_masks) {
        auto l = soft_dice(m, target);
        per_stage.push_back(l);
        sum = sum.defined() ? sum + l : l;
    }
    return {sum / static_cast<double>(per_stage.size()), per_stage};
}

std::pair<torch::Tensor, std::vector<torch::Tensor>> lm_loss(
    const DeepSupervisionBundle& bundle, const Latent& z_m) {
    check(bundle.stage_latents.size() == DeepSupervisionBundle::kStages,
          "latent-matching loss needs all stage latents");
    std::vector<torch::Tensor> per_stage;
    torch::Tensor sum;
    for (const auto& z : bundle.stage_latents) {
        check(z.data.sizes() == z_m.data.sizes(),
              "stage latent shape differs from mask latent");
        auto l = torch::mse_loss(z.data, z_m.data);
        per_stage.push_back(l);
        sum = sum.defined() ? sum + l : l;
    }
    return {sum / static_cast<double>(per_stage.size()), per_stage};
}

torch::Tensor align_loss(const Latent& z_mr, const Latent& z_i) {
    check(z_mr.data.sizes() == z_i.data.sizes(),
          "alignment loss needs identically shaped latents");
    auto a = z_mr.data.flatten(1);
    auto b = z_i.data.flatten(1);

    auto na = a.norm(2, 1);
    auto nb = b.norm(2, 1);
    auto cos = (a * b).sum(1) / (na * nb).clamp_min(1e-12);
    auto one_minus_cos = 1.0 - cos;
    // A zero-norm vector has no direction to compare against.
    auto degenerate = (na < 1e-12).logical_or(nb < 1e-12);
    one_minus_cos = torch::where(degenerate,
                                 torch::ones_like(one_minus_cos),
                                 one_minus_cos);

    auto l1 = (a - b).abs().mean();
    return 0.9 * one_minus_cos.mean() + 0.1 * l1;
}

LossReport total_loss(const DeepSupervisionBundle& bundle, const Mask& target,
                      const Latent& z_m, const Latent& z_mr, const Latent& z_i,
                      bool align_enabled) {
    LossReport report;
    auto [seg, seg_stages] = seg_loss(bundle, target);
    auto [lm, lm_stages] = lm_loss(bundle, z_m);
    report.seg = seg;
    report.lm = lm;
    report.per_stage_seg = std::move(seg_stages);
    report.per_stage_lm = std::move(lm_stages);
    report.align = align_enabled
                       ? align_loss(z_mr, z_i)
                       : torch::zeros({}, seg.options());
    report.total = report.seg + report.lm + report.align;
    return report;
}

}  // namespace wavegms
