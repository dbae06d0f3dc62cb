#include "wavegms/nn_blocks.hpp"

#include "wavegms/core_types.hpp"

namespace wavegms {

namespace {
constexpr int64_t kNormGroups = 8;
}

ResidualBlockImpl::ResidualBlockImpl(int64_t in_channels, int64_t out_channels,
                                     bool conv_bias) {
    check(in_channels % kNormGroups == 0 && out_channels % kNormGroups == 0,
          "residual block channels must be divisible by 8");
    norm1 = register_module(
        "norm1", torch::nn::GroupNorm(
                     torch::nn::GroupNormOptions(kNormGroups, in_channels)));
    conv1 = register_module(
        "conv1", torch::nn::Conv2d(
                     torch::nn::Conv2dOptions(in_channels, out_channels, 3)
                         .padding(1)
                         .bias(conv_bias)));
    norm2 = register_module(
        "norm2", torch::nn::GroupNorm(
                     torch::nn::GroupNormOptions(kNormGroups, out_channels)));
    conv2 = register_module(
        "conv2", torch::nn::Conv2d(
                     torch::nn::Conv2dOptions(out_channels, out_channels, 3)
                         .padding(1)
                         .bias(conv_bias)));
    if (in_channels != out_channels) {
        skip = register_module(
            "skip", torch::nn::Conv2d(
                        torch::nn::Conv2dOptions(in_channels, out_channels, 1)
                            .bias(conv_bias)));
    }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto h = conv1->forward(torch::silu(norm1->forward(x)));
    h = conv2->forward(torch::silu(norm2->forward(h)));
    auto identity = skip ? skip->forward(x) : x;
    return identity + h;
}

SpatialSelfAttentionImpl::SpatialSelfAttentionImpl(int64_t channels)
    : channels_(channels) {
    check(channels % kNormGroups == 0,
          "attention channels must be divisible by 8");
    norm = register_module(
        "norm", torch::nn::GroupNorm(
                    torch::nn::GroupNormOptions(kNormGroups, channels)));
    const auto opts = torch::nn::Conv2dOptions(channels, channels, 1);
    to_q = register_module("to_q", torch::nn::Conv2d(opts));
    to_k = register_module("to_k", torch::nn::Conv2d(opts));
    to_v = register_module("to_v", torch::nn::Conv2d(opts));
    proj = register_module("proj", torch::nn::Conv2d(opts));
}

torch::Tensor SpatialSelfAttentionImpl::forward(const torch::Tensor& x) {
    const int64_t b = x.size(0);
    const int64_t c = x.size(1);
    const int64_t h = x.size(2);
    const int64_t w = x.size(3);

    auto n = norm->forward(x);
    auto q = to_q->forward(n).reshape({b, c, h * w});
    auto k = to_k->forward(n).reshape({b, c, h * w});
    auto v = to_v->forward(n).reshape({b, c, h * w});

    const double scale = 1.0 / std::sqrt(static_cast<double>(c));
    auto attn = torch::softmax(torch::bmm(q.transpose(1, 2), k) * scale, 2);
    auto out = torch::bmm(v, attn.transpose(1, 2)).reshape({b, c, h, w});
    return x + proj->forward(out);
}

torch::Tensor SpatialSelfAttentionImpl::attention_map(const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    const int64_t b = x.size(0);
    const int64_t c = x.size(1);
    const int64_t hw = x.size(2) * x.size(3);
    auto n = norm->forward(x);
    auto q = to_q->forward(n).reshape({b, c, hw});
    auto k = to_k->forward(n).reshape({b, c, hw});
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));
    return torch::softmax(torch::bmm(q.transpose(1, 2), k) * scale, 2);
}

int64_t parameter_count(const torch::nn::Module& module, bool trainable_only) {
    int64_t total = 0;
    for (const auto& p : module.parameters()) {
        if (trainable_only && !p.requires_grad()) continue;
        total += p.numel();
    }
    return total;
}

}  // namespace wavegms
