#include "wavegms/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wavegms/metrics.hpp"
#include "wavegms/tensor_io.hpp"

namespace fs = std::filesystem;

namespace wavegms {

namespace {

nlohmann::json augment_to_json(const data::AugmentationPolicy& p) {
    return {{"flip_horizontal_prob", p.flip_horizontal_prob},
            {"flip_vertical_prob", p.flip_vertical_prob},
            {"rotation_degrees", p.rotation_degrees},
            {"hue_jitter", p.hue_jitter},
            {"saturation_jitter", p.saturation_jitter},
            {"value_jitter", p.value_jitter}};
}

data::AugmentationPolicy augment_from_json(const nlohmann::json& j) {
    data::AugmentationPolicy p;
    p.flip_horizontal_prob = j.value("flip_horizontal_prob", p.flip_horizontal_prob);
    p.flip_vertical_prob = j.value("flip_vertical_prob", p.flip_vertical_prob);
    p.rotation_degrees = j.value("rotation_degrees", p.rotation_degrees);
    p.hue_jitter = j.value("hue_jitter", p.hue_jitter);
    p.saturation_jitter = j.value("saturation_jitter", p.saturation_jitter);
    p.value_jitter = j.value("value_jitter", p.value_jitter);
    return p;
}

void append_csv_row(std::ofstream& out, const LossRow& r) {
    out << r.epoch << ',' << r.step << ',' << r.seg << ',' << r.lm << ','
        << r.align << ',' << r.total << ',' << r.lr << '\n';
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"weight_decay", weight_decay},
            {"eta_min", eta_min},
            {"grad_clip", grad_clip},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed},
            {"align_enabled", align_enabled},
            {"val_fraction", val_fraction},
            {"augment_enabled", augment_enabled},
            {"augment", augment_to_json(augment)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.eta_min = j.value("eta_min", c.eta_min);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.align_enabled = j.value("align_enabled", c.align_enabled);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.augment_enabled = j.value("augment_enabled", c.augment_enabled);
    if (j.contains("augment")) c.augment = augment_from_json(j.at("augment"));
    check(c.batch_size >= 1, "batch_size must be at least 1");
    check(c.epochs >= 1, "epochs must be at least 1");
    return c;
}

double cosine_lr(int64_t epoch, int64_t total_epochs, double lr,
                 double eta_min) {
    check(total_epochs >= 1, "total_epochs must be at least 1");
    check(epoch >= 0 && epoch < total_epochs, "epoch outside schedule range");
    if (total_epochs == 1) return lr;
    double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
    return eta_min + 0.5 * (lr - eta_min) * (1.0 + std::cos(M_PI * t));
}

void save_checkpoint(const std::string& dir, WaveGms& model,
                     torch::optim::AdamW& optimizer,
                     const CheckpointInfo& info) {
    fs::create_directories(dir);

    io::NamedTensorList trainable;
    for (const auto& [name, t] : io::named_parameters_of(*model)) {
        if (name.rfind("vae.", 0) == 0) continue;
        trainable.emplace_back(name, t);
    }
    nlohmann::json meta{{"format", "wavegms-checkpoint"}};
    io::save_named_tensors((fs::path(dir) / "model.wt").string(), trainable,
                           meta);
    torch::save(optimizer, (fs::path(dir) / "optim.pt").string());

    nlohmann::json manifest{
        {"epoch_next", info.epoch_next},
        {"best_val_dice", info.best_val_dice},
        {"best_epoch", info.best_epoch},
        {"vae_fingerprint", info.vae_fingerprint},
        {"config", info.config.to_json()},
        {"latent_source", latent_source_string(model->config.latent_source)}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed to write manifest in " + dir);
}

CheckpointInfo peek_checkpoint(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) {
        throw std::runtime_error("checkpoint manifest missing in " + dir);
    }
    nlohmann::json manifest = nlohmann::json::parse(in);

    CheckpointInfo info;
    info.epoch_next = manifest.at("epoch_next").get<int64_t>();
    info.best_val_dice = manifest.at("best_val_dice").get<double>();
    info.best_epoch = manifest.value("best_epoch", int64_t{-1});
    info.vae_fingerprint = manifest.at("vae_fingerprint").get<uint64_t>();
    info.config = TrainConfig::from_json(manifest.at("config"));
    info.latent_source = latent_source_from_string(
        manifest.value("latent_source", std::string("multires_wavelet")));
    return info;
}

CheckpointInfo load_checkpoint(const std::string& dir, WaveGms& model,
                               torch::optim::AdamW* optimizer,
                               bool check_vae_fingerprint) {
    auto info = peek_checkpoint(dir);

    if (check_vae_fingerprint &&
        info.vae_fingerprint != model->vae->weight_fingerprint()) {
        throw std::runtime_error(
            "checkpoint was trained against different frozen VAE weights "
            "(fingerprint mismatch); pass matching weights or disable the "
            "check explicitly");
    }

    auto archive =
        io::load_named_tensors((fs::path(dir) / "model.wt").string());
    for (const auto& [name, t] : archive.tensors) {
        if (name.rfind("encoder.", 0) != 0 && name.rfind("lmm.", 0) != 0) {
            throw std::runtime_error("unexpected tensor in checkpoint: " +
                                     name);
        }
    }
    io::load_into_module(*model->encoder, archive, "encoder.");
    io::load_into_module(*model->lmm, archive, "lmm.");

    if (optimizer != nullptr) {
        torch::load(*optimizer, (fs::path(dir) / "optim.pt").string());
    }
    return info;
}

Trainer::Trainer(WaveGms model, TrainConfig config)
    : model_(std::move(model)), config_(config) {
    auto options = torch::optim::AdamWOptions(config_.lr)
                       .betas(std::make_tuple(config_.beta1, config_.beta2))
                       .weight_decay(config_.weight_decay);
    optimizer_ = std::make_unique<torch::optim::AdamW>(
        model_->trainable_parameters(), options);
}

LossReport Trainer::train_step(const Image& img, const Mask& mask) {
    model_->train();
    auto fwd = model_->forward_train(img, mask);
    auto report = total_loss(fwd.bundle, mask, fwd.z_m, fwd.z_mr, fwd.z_i,
                             config_.align_enabled);
    report.check_finite("step " + std::to_string(global_step_));

    optimizer_->zero_grad();
    report.total.backward();
    if (config_.grad_clip > 0.0) {
        torch::nn::utils::clip_grad_norm_(model_->trainable_parameters(),
                                          config_.grad_clip);
    }
    optimizer_->step();
    ++global_step_;

    report.seg = report.seg.detach();
    report.lm = report.lm.detach();
    report.align = report.align.detach();
    report.total = report.total.detach();
    for (auto& t : report.per_stage_seg) t = t.detach();
    for (auto& t : report.per_stage_lm) t = t.detach();
    return report;
}

void Trainer::set_epoch_lr(int64_t epoch) {
    double lr = cosine_lr(epoch, config_.epochs, config_.lr, config_.eta_min);
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    }
}

double Trainer::current_lr() const {
    return static_cast<const torch::optim::AdamWOptions&>(
               optimizer_->param_groups().front().options())
        .lr();
}

double Trainer::evaluate_dice(const std::vector<data::Sample>& samples) {
    check(!samples.empty(), "cannot evaluate on an empty sample set");
    model_->eval();
    torch::NoGradGuard no_grad;

    double sum = 0.0;
    int64_t count = 0;
    for (size_t start = 0; start < samples.size();
         start += static_cast<size_t>(config_.batch_size)) {
        std::vector<int64_t> idx;
        for (size_t i = start;
             i < std::min(samples.size(),
                          start + static_cast<size_t>(config_.batch_size));
             ++i) {
            idx.push_back(static_cast<int64_t>(i));
        }
        auto img = data::to_image_batch(samples, idx);
        auto gt = data::to_mask_batch(samples, idx);
        auto pred = model_->forward_infer(img);
        for (int64_t b = 0; b < pred.data.size(0); ++b) {
            sum += metrics::dice(pred.data[b], gt.data[b]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

FitResult Trainer::fit(const std::vector<data::Sample>& train_samples,
                       const std::string& out_dir,
                       const std::optional<std::string>& resume_from) {
    fs::create_directories(out_dir);
    auto [train_set, val_set] = data::make_validation_split(
        train_samples, config_.val_fraction, config_.seed);

    FitResult result;
    result.best_checkpoint = (fs::path(out_dir) / "best").string();
    result.last_checkpoint = (fs::path(out_dir) / "last").string();

    int64_t start_epoch = 0;
    if (resume_from) {
        auto info = load_checkpoint(*resume_from, model_, optimizer_.get());
        start_epoch = info.epoch_next;
        result.best_val_dice = info.best_val_dice;
        result.best_epoch = info.best_epoch;
    }

    const bool fresh = !resume_from;
    std::ofstream loss_csv(fs::path(out_dir) / "loss.csv",
                           fresh ? std::ios::trunc : std::ios::app);
    std::ofstream val_csv(fs::path(out_dir) / "val.csv",
                          fresh ? std::ios::trunc : std::ios::app);
    if (fresh) {
        loss_csv << "epoch,step,seg,lm,align,total,lr\n";
        val_csv << "epoch,val_dice,is_best\n";
    }

    const auto n = static_cast<int64_t>(train_set.size());
    for (int64_t epoch = start_epoch; epoch < config_.epochs; ++epoch) {
        set_epoch_lr(epoch);
        auto order = data::epoch_order(n, config_.seed, epoch);

        for (int64_t start = 0; start < n; start += config_.batch_size) {
            std::vector<data::Sample> batch;
            std::vector<int64_t> idx;
            for (int64_t j = start;
                 j < std::min(n, start + config_.batch_size); ++j) {
                const auto& s = train_set[order[j]];
                batch.push_back(config_.augment_enabled
                                    ? data::augment(s, config_.augment,
                                                    config_.seed, epoch,
                                                    order[j])
                                    : s);
                idx.push_back(static_cast<int64_t>(idx.size()));
            }
            auto img = data::to_image_batch(batch, idx);
            auto gt = data::to_mask_batch(batch, idx);

            LossReport report;
            try {
                report = train_step(img, gt);
            } catch (const std::bad_alloc&) {
                throw std::runtime_error(
                    "out of memory during training; reduce batch_size in the "
                    "config and retry");
            }
            LossRow row{epoch, global_step_, report.seg_value(),
                        report.lm_value(), report.align_value(),
                        report.total_value(), current_lr()};
            result.history.push_back(row);
            append_csv_row(loss_csv, row);
        }
        loss_csv.flush();

        double val_dice = evaluate_dice(val_set);
        bool is_best = val_dice > result.best_val_dice || result.best_epoch < 0;
        if (is_best) {
            result.best_val_dice = val_dice;
            result.best_epoch = epoch;
        }
        result.val_history.push_back({epoch, val_dice, is_best});
        val_csv << epoch << ',' << val_dice << ',' << (is_best ? 1 : 0) << '\n';
        val_csv.flush();

        CheckpointInfo info;
        info.epoch_next = epoch + 1;
        info.best_val_dice = result.best_val_dice;
        info.best_epoch = result.best_epoch;
        info.vae_fingerprint = model_->vae->weight_fingerprint();
        info.config = config_;
        if (is_best) {
            save_checkpoint(result.best_checkpoint, model_, *optimizer_, info);
        }
        save_checkpoint(result.last_checkpoint, model_, *optimizer_, info);
    }
    return result;
}

WaveGms make_seeded_pipeline(const PipelineConfig& config, uint64_t seed,
                             TinyVae vae) {
    torch::manual_seed(seed);
    return WaveGms(config, std::move(vae));
}

Mask predict(WaveGms& model, const Image& img) {
    return model->forward_infer(img);
}

}  // namespace wavegms
