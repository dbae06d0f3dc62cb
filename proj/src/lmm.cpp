#include "wavegms/lmm.hpp"

namespace wavegms {

ResAttnBlockImpl::ResAttnBlockImpl(int64_t in_channels, int64_t out_channels) {
    res = ResidualBlock(in_channels, out_channels);
    attn = SpatialSelfAttention(out_channels);
    register_module("res", res);
    register_module("attn", attn);
}

torch::Tensor ResAttnBlockImpl::forward(const torch::Tensor& x) {
    return attn->forward(res->forward(x));
}

LatentMappingModelImpl::LatentMappingModelImpl(LmmConfig cfg)
    : config(std::move(cfg)) {
    check(config.encoder_channels.size() == 4,
          "mapping model expects exactly four encoder stages");
    const auto& c = config.encoder_channels;
    const int64_t zc = config.latent_channels;

    stem = torch::nn::Conv2d(
        torch::nn::Conv2dOptions(zc, c[0], 3).padding(1));
    enc1 = ResAttnBlock(c[0], c[0]);
    enc2 = ResAttnBlock(c[0], c[1]);
    enc3 = ResAttnBlock(c[1], c[2]);
    enc4 = ResAttnBlock(c[2], c[3]);

    // Decoder stage i consumes the previous decoder output concatenated with
    // the mirrored encoder feature; the deepest stage reads the bottleneck
    // directly.
    dec1 = ResAttnBlock(c[3], c[3]);
    dec2 = ResAttnBlock(c[3] + c[2], c[2]);
    dec3 = ResAttnBlock(c[2] + c[1], c[1]);
    dec4 = ResAttnBlock(c[1] + c[0], c[0]);

    head1 = torch::nn::Conv2d(torch::nn::Conv2dOptions(c[3], zc, 1));
    head2 = torch::nn::Conv2d(torch::nn::Conv2dOptions(c[2], zc, 1));
    head3 = torch::nn::Conv2d(torch::nn::Conv2dOptions(c[1], zc, 1));
    head4 = torch::nn::Conv2d(torch::nn::Conv2dOptions(c[0], zc, 1));

    register_module("stem", stem);
    register_module("enc1", enc1);
    register_module("enc2", enc2);
    register_module("enc3", enc3);
    register_module("enc4", enc4);
    register_module("dec1", dec1);
    register_module("dec2", dec2);
    register_module("dec3", dec3);
    register_module("dec4", dec4);
    register_module("head1", head1);
    register_module("head2", head2);
    register_module("head3", head3);
    register_module("head4", head4);
}

std::vector<torch::Tensor> LatentMappingModelImpl::trunk(
    const torch::Tensor& z) {
    auto s = stem->forward(z);
    auto e1 = enc1->forward(s);
    auto e2 = enc2->forward(e1);
    auto e3 = enc3->forward(e2);
    auto e4 = enc4->forward(e3);

    auto d1 = dec1->forward(e4);
    auto d2 = dec2->forward(torch::cat({d1, e3}, 1));
    auto d3 = dec3->forward(torch::cat({d2, e2}, 1));
    auto d4 = dec4->forward(torch::cat({d3, e1}, 1));
    return {d1, d2, d3, d4};
}

std::vector<Latent> LatentMappingModelImpl::forward(const Latent& z_input) {
    check(z_input.data.size(1) == config.latent_channels,
          "mapping model input has the wrong channel count");
    auto d = trunk(z_input.data);
    std::vector<Latent> stages;
    stages.push_back(Latent::make(head1->forward(d[0]), LatentKind::Predicted));
    stages.push_back(Latent::make(head2->forward(d[1]), LatentKind::Predicted));
    stages.push_back(Latent::make(head3->forward(d[2]), LatentKind::Predicted));
    stages.push_back(Latent::make(head4->forward(d[3]), LatentKind::Predicted));
    return stages;
}

Latent LatentMappingModelImpl::forward_inference(const Latent& z_input) {
    check(z_input.data.size(1) == config.latent_channels,
          "mapping model input has the wrong channel count");
    auto d = trunk(z_input.data);
    return Latent::make(head4->forward(d[3]), LatentKind::Predicted);
}

int64_t LatentMappingModelImpl::trainable_parameter_count() const {
    return parameter_count(*this, /*trainable_only=*/true);
}

}  // namespace wavegms
