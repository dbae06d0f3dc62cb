#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wavegms/data.hpp"
#include "wavegms/losses.hpp"
#include "wavegms/pipeline.hpp"

namespace wavegms {

struct TrainConfig {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-2;
    double eta_min = 0.0;    // cosine annealing floor
    double grad_clip = 0.0;  // 0 disables clipping
    int64_t batch_size = 12;
    int64_t epochs = 1000;
    uint64_t seed = 2333;
    bool align_enabled = true;
    double val_fraction = 0.1;
    bool augment_enabled = true;
    data::AugmentationPolicy augment;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Cosine annealing from lr down to eta_min across the epoch range; epoch 0
// returns lr, the final epoch returns eta_min.
double cosine_lr(int64_t epoch, int64_t total_epochs, double lr,
                 double eta_min);

struct LossRow {
    int64_t epoch, step;
    double seg, lm, align, total, lr;
};

struct ValRow {
    int64_t epoch;
    double val_dice;
    bool is_best;
};

struct FitResult {
    std::string best_checkpoint;
    std::string last_checkpoint;
    double best_val_dice = 0.0;
    int64_t best_epoch = -1;
    std::vector<LossRow> history;
    std::vector<ValRow> val_history;
};

struct CheckpointInfo {
    int64_t epoch_next = 0;
    double best_val_dice = 0.0;
    int64_t best_epoch = -1;
    uint64_t vae_fingerprint = 0;
    TrainConfig config;
    LatentSource latent_source = LatentSource::MultiResWavelet;
};

// Reads a checkpoint's manifest without touching weights, e.g. to build a
// matching pipeline before loading.
CheckpointInfo peek_checkpoint(const std::string& dir);

// Persists trainable weights, optimizer state, and a manifest (epoch, best
// validation Dice, config snapshot, frozen-VAE fingerprint) to a directory.
void save_checkpoint(const std::string& dir, WaveGms& model,
                     torch::optim::AdamW& optimizer,
                     const CheckpointInfo& info);

// Restores trainable weights (and optimizer state when given). Refuses a
// checkpoint whose recorded VAE fingerprint differs from the model's unless
// the check is disabled.
CheckpointInfo load_checkpoint(const std::string& dir, WaveGms& model,
                               torch::optim::AdamW* optimizer = nullptr,
                               bool check_vae_fingerprint = true);

class Trainer {
  public:
    Trainer(WaveGms model, TrainConfig config);

    // One optimization step: forward, three-term loss, backward, update.
    // Only encoder and mapping-model parameters move; a non-finite loss
    // aborts with a per-term dump.
    LossReport train_step(const Image& img, const Mask& mask);

    void set_epoch_lr(int64_t epoch);
    double current_lr() const;

    // Full schedule over a training set with a seeded validation carve-out.
    // Writes loss/validation CSVs plus best/ and last/ checkpoints under
    // out_dir. Optionally resumes from a checkpoint directory.
    FitResult fit(const std::vector<data::Sample>& train_samples,
                  const std::string& out_dir,
                  const std::optional<std::string>& resume_from = {});

    double evaluate_dice(const std::vector<data::Sample>& samples);

    WaveGms& model() { return model_; }
    torch::optim::AdamW& optimizer() { return *optimizer_; }
    const TrainConfig& config() const { return config_; }

  private:
    WaveGms model_;
    TrainConfig config_;
    std::unique_ptr<torch::optim::AdamW> optimizer_;
    int64_t global_step_ = 0;
};

// Seeds torch's RNG before building the pipeline so two runs with the same
// seed start from identical weights.
WaveGms make_seeded_pipeline(const PipelineConfig& config, uint64_t seed,
                             TinyVae vae);

Mask predict(WaveGms& model, const Image& img);

}  // namespace wavegms
