#include "wavegms/vae_adapter.hpp"

#include <filesystem>
#include <utility>
#include <vector>

#include "wavegms/nn_blocks.hpp"
#include "wavegms/tensor_io.hpp"

namespace wavegms {

namespace {

torch::nn::Conv2d conv3(int64_t in, int64_t out, int64_t stride = 1,
                        bool bias = true) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3)
                                 .stride(stride)
                                 .padding(1)
                                 .bias(bias));
}

// Soft clamp applied to incoming latents before decoding.
struct LatentClampImpl : torch::nn::Module {
    torch::Tensor forward(const torch::Tensor& x) {
        return torch::tanh(x / 3.0) * 3.0;
    }
};
TORCH_MODULE(LatentClamp);

// Residual unit of the tiny autoencoder: three 3x3 convs with interleaved
// ReLU, identity skip, fused by a final ReLU. Channel counts never change
// inside a block, so the skip carries no weights. The inner stack registers
// as "conv" to line up with the public state-dict keys.
struct TaesdBlockImpl : torch::nn::Module {
    explicit TaesdBlockImpl(int64_t channels) {
        conv = torch::nn::Sequential(conv3(channels, channels),
                                     torch::nn::ReLU(),
                                     conv3(channels, channels),
                                     torch::nn::ReLU(),
                                     conv3(channels, channels));
        register_module("conv", conv);
    }

    torch::Tensor forward(const torch::Tensor& x) {
        return torch::relu(conv->forward(x) + x);
    }

    torch::nn::Sequential conv{nullptr};
};
TORCH_MODULE(TaesdBlock);

torch::nn::Upsample nearest_x2() {
    return torch::nn::Upsample(torch::nn::UpsampleOptions()
                                   .scale_factor(std::vector<double>{2.0, 2.0})
                                   .mode(torch::kNearest));
}

torch::nn::Sequential build_encoder() {
    torch::nn::Sequential seq;
    seq->push_back(conv3(3, 64));
    seq->push_back(TaesdBlock(64));
    for (int stage = 0; stage < 3; ++stage) {
        seq->push_back(conv3(64, 64, /*stride=*/2, /*bias=*/false));
        seq->push_back(TaesdBlock(64));
        seq->push_back(TaesdBlock(64));
        seq->push_back(TaesdBlock(64));
    }
    seq->push_back(conv3(64, 4));
    return seq;
}

torch::nn::Sequential build_decoder() {
    torch::nn::Sequential seq;
    seq->push_back(LatentClamp());
    seq->push_back(conv3(4, 64));
    seq->push_back(torch::nn::ReLU());
    for (int stage = 0; stage < 3; ++stage) {
        seq->push_back(TaesdBlock(64));
        seq->push_back(TaesdBlock(64));
        seq->push_back(TaesdBlock(64));
        seq->push_back(nearest_x2());
        seq->push_back(conv3(64, 64, /*stride=*/1, /*bias=*/false));
    }
    seq->push_back(TaesdBlock(64));
    seq->push_back(conv3(64, 3));
    return seq;
}

}  // namespace

TinyVaeImpl::TinyVaeImpl() {
    encoder = build_encoder();
    decoder = build_decoder();
    register_module("encoder", encoder);
    register_module("decoder", decoder);
}

Latent TinyVaeImpl::encode(const torch::Tensor& x_signed, LatentKind kind) {
    check(x_signed.dim() == 4 && x_signed.size(1) == 3,
          "tiny VAE encode expects [B,3,H,W]");
    check(x_signed.size(2) % 8 == 0 && x_signed.size(3) % 8 == 0,
          "tiny VAE encode needs H and W divisible by 8");
    check(x_signed.min().item<double>() >= -1.0 - 1e-6 &&
              x_signed.max().item<double>() <= 1.0 + 1e-6,
          "tiny VAE encode expects values in [-1,1]");
    encode_calls_.fetch_add(1);
    auto z = encoder->forward((x_signed + 1.0) / 2.0);
    return Latent::make(z, kind);
}

Latent TinyVaeImpl::encode_image(const Image& img) {
    check(img.range == ValueRange::Signed,
          "encode_image expects a signed-range image");
    return encode(img.data, LatentKind::Image);
}

Latent TinyVaeImpl::encode_mask(const Mask& mask) {
    return encode(mask.broadcast3() * 2.0 - 1.0, LatentKind::Mask);
}

torch::Tensor TinyVaeImpl::decode(const torch::Tensor& z) {
    check(z.dim() == 4 && z.size(1) == 4, "tiny VAE decode expects [B,4,h,w]");
    // The decoder's native output is nominally [0,1] but unconstrained, so
    // the signed mapping is applied raw and then clamped.
    auto y = decoder->forward(z);
    return torch::clamp(y * 2.0 - 1.0, -1.0, 1.0);
}

void TinyVaeImpl::freeze() {
    for (auto& p : parameters()) {
        p.set_requires_grad(false);
    }
    eval();
    frozen_ = true;
}

int64_t TinyVaeImpl::encoder_parameter_count() const {
    return parameter_count(*encoder, /*trainable_only=*/false);
}

int64_t TinyVaeImpl::decoder_parameter_count() const {
    return parameter_count(*decoder, /*trainable_only=*/false);
}

uint64_t TinyVaeImpl::weight_fingerprint() const {
    return io::fingerprint_tensors(io::named_parameters_of(*this));
}

TinyVae make_standin_vae(uint64_t seed) {
    torch::manual_seed(seed);
    TinyVae vae;
    vae->freeze();
    return vae;
}

TinyVae load_pretrained_vae(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error(
            "VAE weight file not found: " + path +
            ". Fetch the public tiny autoencoder release and convert it with "
            "tools/convert_taesd.py, or pass --vae-weights pointing at an "
            "existing archive.");
    }
    auto archive = io::load_named_tensors(path);
    TinyVae vae;
    io::load_into_module(*vae, archive);
    vae->freeze();
    return vae;
}

void save_vae_weights(const TinyVae& vae, const std::string& path) {
    nlohmann::json meta{{"format", "tiny-vae-weights"}};
    io::save_named_tensors(path, io::named_parameters_of(*vae), meta);
}

torch::Tensor decoded_to_mask_probability(const torch::Tensor& decoded_signed) {
    check(decoded_signed.dim() == 4 && decoded_signed.size(1) == 3,
          "mask probability expects a decoded [B,3,H,W] tensor");
    auto mean = decoded_signed.mean(/*dim=*/1, /*keepdim=*/true);
    return torch::clamp((mean + 1.0) / 2.0, 0.0, 1.0);
}

}  // namespace wavegms
