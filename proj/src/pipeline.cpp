#include "wavegms/pipeline.hpp"

namespace wavegms {

std::string latent_source_string(LatentSource source) {
    switch (source) {
        case LatentSource::MultiResWavelet: return "multires_wavelet";
        case LatentSource::TinyVae: return "tiny_vae";
    }
    throw std::invalid_argument("unknown latent source");
}

LatentSource latent_source_from_string(const std::string& s) {
    if (s == "multires_wavelet") return LatentSource::MultiResWavelet;
    if (s == "tiny_vae") return LatentSource::TinyVae;
    throw std::invalid_argument("unknown latent source: " + s);
}

WaveGmsImpl::WaveGmsImpl(PipelineConfig cfg, TinyVae shared_vae)
    : config(std::move(cfg)) {
    encoder = MultiResEncoder(config.encoder);
    lmm = LatentMappingModel(config.lmm);
    vae = std::move(shared_vae);
    check(vae->frozen(), "pipeline requires a frozen VAE");
    register_module("encoder", encoder);
    register_module("lmm", lmm);
    register_module("vae", vae);
}

Latent WaveGmsImpl::input_latent(const Image& img) {
    if (config.latent_source == LatentSource::MultiResWavelet) {
        return encoder->encode(img);
    }
    auto z = vae->encode_image(img);
    return Latent::make(z.data, LatentKind::MultiRes);
}

TrainForward WaveGmsImpl::forward_train(const Image& img, const Mask& mask) {
    TrainForward out;
    out.z_i = vae->encode_image(img);
    out.z_m = vae->encode_mask(mask);
    out.z_mr = config.latent_source == LatentSource::MultiResWavelet
                   ? encoder->encode(img)
                   : Latent::make(out.z_i.data, LatentKind::MultiRes);

    out.bundle.stage_latents = lmm->forward(out.z_mr);
    for (const auto& stage : out.bundle.stage_latents) {
        // Frozen weights still pass gradients through to the stage latents.
        auto decoded = vae->decode(stage);
        out.bundle.stage_masks.push_back(decoded_to_mask_probability(decoded));
    }
    return out;
}

torch::Tensor WaveGmsImpl::infer_probability(const Image& img) {
    torch::NoGradGuard no_grad;
    auto z = input_latent(img);
    auto z_hat = lmm->forward_inference(z);
    return decoded_to_mask_probability(vae->decode(z_hat));
}

Mask WaveGmsImpl::forward_infer(const Image& img) {
    return binarize(infer_probability(img));
}

std::vector<torch::Tensor> WaveGmsImpl::trainable_parameters() {
    std::vector<torch::Tensor> params;
    if (config.latent_source == LatentSource::MultiResWavelet) {
        for (auto& p : encoder->parameters()) params.push_back(p);
    }
    for (auto& p : lmm->parameters()) params.push_back(p);
    return params;
}

ParameterSummary WaveGmsImpl::parameter_summary() {
    ParameterSummary s;
    s.encoder_trainable = encoder->trainable_parameter_count();
    s.lmm_trainable = lmm->trainable_parameter_count();
    s.trainable_total =
        (config.latent_source == LatentSource::MultiResWavelet
             ? s.encoder_trainable
             : 0) +
        s.lmm_trainable;
    s.vae_encoder_frozen = vae->encoder_parameter_count();
    s.vae_decoder_frozen = vae->decoder_parameter_count();
    return s;
}

}  // namespace wavegms
