#include "wavegms/multires_encoder.hpp"

#include "wavegms/wavelet.hpp"

namespace wavegms {

namespace {

torch::nn::Sequential make_level_extractor(const EncoderConfig& cfg) {
    torch::nn::Sequential seq;
    seq->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(12, cfg.per_level_channels, 3)
            .padding(1)
            .bias(cfg.conv_bias)));
    for (int64_t i = 0; i < cfg.blocks_per_module; ++i) {
        seq->push_back(ResidualBlock(cfg.per_level_channels,
                                     cfg.per_level_channels, cfg.conv_bias));
    }
    return seq;
}

torch::nn::Sequential make_aggregator(const EncoderConfig& cfg) {
    torch::nn::Sequential seq;
    seq->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(3 * cfg.per_level_channels,
                                 cfg.aggregation_channels, 3)
            .padding(1)
            .bias(cfg.conv_bias)));
    for (int64_t i = 0; i < cfg.blocks_per_module; ++i) {
        seq->push_back(ResidualBlock(cfg.aggregation_channels,
                                     cfg.aggregation_channels, cfg.conv_bias));
    }
    seq->push_back(torch::nn::GroupNorm(
        torch::nn::GroupNormOptions(8, cfg.aggregation_channels)));
    seq->push_back(torch::nn::SiLU());
    seq->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(cfg.aggregation_channels, 4, 3)
            .padding(1)
            .bias(cfg.conv_bias)));
    return seq;
}

}  // namespace

MultiResEncoderImpl::MultiResEncoderImpl(EncoderConfig cfg) : config(cfg) {
    check(cfg.per_level_channels > 0 && cfg.aggregation_channels > 0 &&
              cfg.blocks_per_module > 0,
          "encoder config values must be positive");
    phi1 = register_module("phi1", make_level_extractor(cfg));
    phi2 = register_module("phi2", make_level_extractor(cfg));
    phi3 = register_module("phi3", make_level_extractor(cfg));
    agg = register_module("agg", make_aggregator(cfg));
}

torch::Tensor MultiResEncoderImpl::extract_features(
    const torch::Tensor& level_stack, int level) {
    check(level >= 1 && level <= 3, "level must be 1, 2 or 3");
    check(level_stack.dim() == 4 && level_stack.size(1) == 12,
          "level stack must be [B,12,h,w]");
    auto& phi = level == 1 ? phi1 : level == 2 ? phi2 : phi3;
    auto out = phi->forward(level_stack);
    check(out.size(2) == level_stack.size(2) &&
              out.size(3) == level_stack.size(3),
          "feature extractor must preserve spatial size");
    return out;
}

torch::Tensor MultiResEncoderImpl::fuse_levels(const torch::Tensor& f1,
                                               const torch::Tensor& f2,
                                               const torch::Tensor& f3) {
    check(f1.size(2) == 2 * f2.size(2) && f2.size(2) == 2 * f3.size(2) &&
              f1.size(3) == 2 * f2.size(3) && f2.size(3) == 2 * f3.size(3),
          "fuse_levels expects dyadic spatial sizes F1=2*F2=4*F3");
    auto down = [](const torch::Tensor& t) {
        return torch::avg_pool2d(t, /*kernel_size=*/2, /*stride=*/2);
    };
    return torch::cat({down(down(f1)), down(f2), f3}, 1);
}

Latent MultiResEncoderImpl::aggregate(const torch::Tensor& fused) {
    check(fused.dim() == 4 &&
              fused.size(1) == 3 * config.per_level_channels,
          "aggregate expects " + std::to_string(3 * config.per_level_channels) +
              " channels");
    auto out = agg->forward(fused);
    check(out.size(2) == fused.size(2) && out.size(3) == fused.size(3),
          "aggregation must preserve spatial size");
    return Latent::make(out, LatentKind::MultiRes);
}

Latent MultiResEncoderImpl::encode(const Image& img) {
    check(img.range == ValueRange::Signed,
          "encoder input must be in signed range");
    auto decomposition = wavelet::multires_decompose(img);
    auto f1 = extract_features(decomposition.levels[0], 1);
    auto f2 = extract_features(decomposition.levels[1], 2);
    auto f3 = extract_features(decomposition.levels[2], 3);
    return aggregate(fuse_levels(f1, f2, f3));
}

int64_t MultiResEncoderImpl::trainable_parameter_count() const {
    return parameter_count(*this, /*trainable_only=*/true);
}

}  // namespace wavegms
