#include "wavegms/core_types.hpp"

namespace wavegms {

namespace {

constexpr double kRangeEps = 1e-6;

void check_image_shape(const torch::Tensor& t) {
    check(t.dim() == 4, "Image tensor must be [B,3,H,W], got " +
                            std::to_string(t.dim()) + " dims");
    check(t.size(1) == 3, "Image tensor must have 3 channels, got " +
                              std::to_string(t.size(1)));
    check(t.size(2) % 8 == 0 && t.size(3) % 8 == 0,
          "Image H and W must be divisible by 8, got " +
              std::to_string(t.size(2)) + "x" + std::to_string(t.size(3)));
}

void check_value_range(const torch::Tensor& t, double lo, double hi,
                       const char* what) {
    if (t.numel() == 0) return;
    const double mn = t.min().item<double>();
    const double mx = t.max().item<double>();
    check(mn >= lo - kRangeEps && mx <= hi + kRangeEps,
          std::string(what) + " values outside [" + std::to_string(lo) + "," +
              std::to_string(hi) + "]: observed [" + std::to_string(mn) + "," +
              std::to_string(mx) + "]");
}

}  // namespace

Image Image::from_unit(torch::Tensor data) {
    check_image_shape(data);
    check_value_range(data, 0.0, 1.0, "unit-range image");
    return Image{std::move(data), ValueRange::Unit};
}

Image Image::from_signed(torch::Tensor data) {
    check_image_shape(data);
    check_value_range(data, -1.0, 1.0, "signed-range image");
    return Image{std::move(data), ValueRange::Signed};
}

Mask Mask::from_binary(torch::Tensor data) {
    check(data.dim() == 4 && data.size(1) == 1,
          "Mask tensor must be [B,1,H,W]");
    check(((data == 0) | (data == 1)).all().item<bool>(),
          "Mask values must be exactly 0 or 1");
    return Mask{std::move(data)};
}

torch::Tensor Mask::broadcast3() const {
    return data.expand({data.size(0), 3, data.size(2), data.size(3)});
}

Latent Latent::make(torch::Tensor data, LatentKind kind) {
    check(data.dim() == 4, "Latent tensor must be [B,4,h,w]");
    check(data.size(1) == 4, "Latent tensor must have 4 channels, got " +
                                 std::to_string(data.size(1)));
    return Latent{std::move(data), kind};
}

MultiResDecomposition MultiResDecomposition::make(
    std::vector<torch::Tensor> levels) {
    check(levels.size() == 3, "decomposition must have exactly 3 levels, got " +
                                  std::to_string(levels.size()));
    for (size_t i = 0; i < levels.size(); ++i) {
        const auto& l = levels[i];
        check(l.dim() == 4 && l.size(1) == 12,
              "level " + std::to_string(i + 1) + " must be [B,12,h,w]");
        if (i > 0) {
            check(l.size(2) * 2 == levels[i - 1].size(2) &&
                      l.size(3) * 2 == levels[i - 1].size(3),
                  "level " + std::to_string(i + 1) +
                      " spatial size must halve the previous level");
        }
    }
    return MultiResDecomposition{std::move(levels)};
}

const Latent& DeepSupervisionBundle::predicted_latent() const {
    check(stage_latents.size() == 4, "bundle must hold exactly 4 stage latents");
    return stage_latents.back();
}

Image to_signed_range(const Image& img) {
    check(img.range == ValueRange::Unit,
          "to_signed_range expects a unit-range image");
    check_value_range(img.data, 0.0, 1.0, "unit-range image");
    return Image{img.data * 2.0 - 1.0, ValueRange::Signed};
}

Image to_unit_range(const Image& img) {
    check(img.range == ValueRange::Signed,
          "to_unit_range expects a signed-range image");
    check_value_range(img.data, -1.0, 1.0, "signed-range image");
    return Image{(img.data + 1.0) * 0.5, ValueRange::Unit};
}

Mask binarize(const torch::Tensor& pred, double threshold) {
    check(pred.dim() == 4 && pred.size(1) == 1,
          "binarize expects predictions [B,1,H,W]");
    check(threshold > 0.0 && threshold < 1.0,
          "binarize threshold must lie in (0,1)");
    return Mask{(pred > threshold).to(pred.dtype())};
}

}  // namespace wavegms
