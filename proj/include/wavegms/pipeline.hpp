#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "wavegms/core_types.hpp"
#include "wavegms/lmm.hpp"
#include "wavegms/multires_encoder.hpp"
#include "wavegms/vae_adapter.hpp"

namespace wavegms {

// Which latent feeds the mapping model: the trainable multi-resolution
// wavelet encoder (the standard pipeline) or the frozen VAE's own image
// latent (ablation that trains the mapping model alone).
enum class LatentSource { MultiResWavelet, TinyVae };

std::string latent_source_string(LatentSource source);
LatentSource latent_source_from_string(const std::string& s);

struct PipelineConfig {
    EncoderConfig encoder;
    LmmConfig lmm;
    LatentSource latent_source = LatentSource::MultiResWavelet;
};

struct TrainForward {
    DeepSupervisionBundle bundle;
    Latent z_mr;  // mapping-model input latent
    Latent z_i;   // frozen VAE image latent
    Latent z_m;   // frozen VAE mask latent
};

struct ParameterSummary {
    int64_t encoder_trainable = 0;
    int64_t lmm_trainable = 0;
    int64_t trainable_total = 0;
    int64_t vae_encoder_frozen = 0;
    int64_t vae_decoder_frozen = 0;
};

// Full segmentation pipeline: multi-resolution encoder and mapping model are
// trainable, the shared VAE stays frozen across the image-encode, mask-encode,
// and decode paths.
struct WaveGmsImpl : torch::nn::Module {
    WaveGmsImpl(PipelineConfig config, TinyVae vae);

    // Training dataflow: input latent, image latent, mask latent, mapping
    // model stages, and each stage decoded to a mask probability.
    TrainForward forward_train(const Image& img, const Mask& mask);

    // Inference dataflow: input latent, final mapping stage only, decode,
    // binarize. With the wavelet source this never touches the VAE encoder.
    Mask forward_infer(const Image& img);

    // Same path without the final binarize, for threshold-free inspection.
    torch::Tensor infer_probability(const Image& img);

    // Parameters the optimizer may update (encoder + mapping model; the
    // encoder drops out under the TinyVae latent source).
    std::vector<torch::Tensor> trainable_parameters();

    ParameterSummary parameter_summary();

    PipelineConfig config;
    MultiResEncoder encoder{nullptr};
    LatentMappingModel lmm{nullptr};
    TinyVae vae{nullptr};

  private:
    Latent input_latent(const Image& img);
};
TORCH_MODULE(WaveGms);

}  // namespace wavegms
