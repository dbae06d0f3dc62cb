#include <CLI11.hpp>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "wavegms/data.hpp"
#include "wavegms/experiments.hpp"
#include "wavegms/metrics.hpp"
#include "wavegms/training.hpp"
#include "wavegms/wavelet.hpp"

namespace fs = std::filesystem;
using namespace wavegms;

namespace {

struct DatasetArgs {
    std::string name = "fixture";
    std::string root;

    void attach(CLI::App* cmd, bool required = true) {
        cmd->add_option("--dataset", name,
                        "dataset name (BUS, BUSI, kvasir, HAM10000, fixture)");
        auto* opt = cmd->add_option("--root", root, "dataset root directory");
        if (required) opt->required();
    }

    data::DatasetSpec spec() const {
        auto n = data::dataset_name_from_string(name);
        switch (n) {
            case data::DatasetName::BUS: return data::DatasetSpec::bus(root);
            case data::DatasetName::BUSI: return data::DatasetSpec::busi(root);
            case data::DatasetName::KvasirInstrument:
                return data::DatasetSpec::kvasir_instrument(root);
            case data::DatasetName::HAM10000:
                return data::DatasetSpec::ham10000(root);
            case data::DatasetName::Fixture:
                return data::DatasetSpec::fixture(root);
        }
        throw std::invalid_argument("unknown dataset");
    }
};

experiments::ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return experiments::ExperimentConfig::from_json(nlohmann::json::parse(in));
}

void print_report(const metrics::MetricsReport& r, const std::string& dir) {
    std::cout << "DSC " << r.dsc << "%  IoU " << r.iou << "%  HD95 " << r.hd95
              << " px over " << r.n_images << " images\n"
              << "outputs in " << dir << "\n";
}

TinyVae vae_from_args(const std::string& weights, uint64_t seed) {
    if (!weights.empty()) return load_pretrained_vae(weights);
    std::cout << "note: no VAE weights given, using a seeded random stand-in\n";
    return make_standin_vae(seed);
}

int cmd_train(const std::string& config_path, const std::string& resume,
              const DatasetArgs& dataset, const std::string& out_dir,
              const std::string& vae_weights, int64_t epochs,
              int64_t batch_size, int64_t seed, double val_fraction,
              bool no_augment) {
    experiments::ExperimentConfig config;
    if (!config_path.empty()) {
        config = load_config_file(config_path);
    } else {
        config.train_dataset = dataset.spec();
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (!vae_weights.empty()) config.vae_weights = vae_weights;
    if (epochs > 0) config.train.epochs = epochs;
    if (batch_size > 0) config.train.batch_size = batch_size;
    if (seed >= 0) config.train.seed = static_cast<uint64_t>(seed);
    if (val_fraction > 0) config.train.val_fraction = val_fraction;
    if (no_augment) config.train.augment_enabled = false;

    if (!resume.empty()) {
        auto dataset_full =
            data::load_dataset(config.train_dataset, "train:resume");
        auto info = peek_checkpoint(resume);
        PipelineConfig pipeline;
        pipeline.latent_source = info.latent_source;
        auto model = make_seeded_pipeline(pipeline, config.train.seed,
                                          vae_from_args(config.vae_weights,
                                                        config.train.seed));
        Trainer trainer(model, info.config);
        auto fit = trainer.fit(dataset_full.train, config.output_dir, resume);
        std::cout << "resumed through epoch " << info.config.epochs
                  << "; best validation Dice " << fit.best_val_dice
                  << " at epoch " << fit.best_epoch << "\n";
        return 0;
    }

    auto result = experiments::run_main(config);
    print_report(result.report, result.run_dir);
    return 0;
}

int cmd_eval(const std::string& ckpt, const DatasetArgs& dataset,
             const std::string& vae_weights, const std::string& out_dir) {
    auto info = peek_checkpoint(ckpt);
    PipelineConfig pipeline;
    pipeline.latent_source = info.latent_source;
    auto model = make_seeded_pipeline(pipeline, info.config.seed,
                                      vae_from_args(vae_weights,
                                                    info.config.seed));
    load_checkpoint(ckpt, model);

    auto spec = dataset.spec();
    auto loaded = data::load_dataset(spec, "eval");
    std::vector<Mask> preds, gts;
    std::vector<std::string> ids;
    model->eval();
    const int64_t bs = info.config.batch_size;
    for (size_t start = 0; start < loaded.test.size();
         start += static_cast<size_t>(bs)) {
        std::vector<int64_t> idx;
        for (size_t i = start;
             i < std::min(loaded.test.size(), start + static_cast<size_t>(bs));
             ++i) {
            idx.push_back(static_cast<int64_t>(i));
        }
        auto img = data::to_image_batch(loaded.test, idx);
        auto gt = data::to_mask_batch(loaded.test, idx);
        auto pred = model->forward_infer(img);
        for (int64_t b = 0; b < pred.data.size(0); ++b) {
            preds.push_back(Mask::from_binary(pred.data[b].unsqueeze(0)));
            gts.push_back(Mask::from_binary(gt.data[b].unsqueeze(0)));
            ids.push_back(loaded.test[idx[b]].id);
        }
    }
    auto report = metrics::evaluate_dataset(preds, gts, ids);

    fs::create_directories(out_dir);
    metrics::write_aggregate_json(report,
                                  (fs::path(out_dir) / "metrics.json").string());
    metrics::write_per_image_csv(
        report, (fs::path(out_dir) / "per_image.csv").string());
    std::vector<experiments::TableRow> rows{
        {"evaluation", report,
         experiments::published_reference_main(spec.name), ""}};
    experiments::emit_table(rows, (fs::path(out_dir) / "table").string());
    print_report(report, out_dir);
    return 0;
}

int cmd_decompose(const std::string& image_path, const std::string& out_dir) {
    cv::Mat img = cv::imread(image_path, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot read " + image_path);
    cv::resize(img, img, cv::Size(224, 224), 0, 0, cv::INTER_LINEAR);
    cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
    cv::Mat f;
    img.convertTo(f, CV_32FC3, 2.0 / 255.0, -1.0);

    auto t = torch::from_blob(f.data, {224, 224, 3}, torch::kFloat32)
                 .permute({2, 0, 1})
                 .unsqueeze(0)
                 .clone();
    auto decomp = wavelet::multires_decompose(Image::from_signed(t));

    fs::create_directories(out_dir);
    const char* bands[4] = {"ll", "lh", "hl", "hh"};
    for (size_t level = 0; level < decomp.levels.size(); ++level) {
        auto unpacked = wavelet::unpack_level(decomp.levels[level]);
        const torch::Tensor* sub[4] = {&unpacked.ll, &unpacked.lh,
                                       &unpacked.hl, &unpacked.hh};
        for (int b = 0; b < 4; ++b) {
            auto s = (*sub[b])[0];
            auto lo = s.min().item<double>(), hi = s.max().item<double>();
            auto norm = (s - lo) / std::max(hi - lo, 1e-9);
            auto u8 = (norm * 255.0)
                          .clamp(0, 255)
                          .to(torch::kUInt8)
                          .permute({1, 2, 0})
                          .contiguous();
            cv::Mat m(static_cast<int>(u8.size(0)),
                      static_cast<int>(u8.size(1)), CV_8UC3, u8.data_ptr());
            cv::Mat bgr;
            cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
            auto name = "level" + std::to_string(level + 1) + "_" + bands[b] +
                        ".png";
            cv::imwrite((fs::path(out_dir) / name).string(), bgr);
            std::cout << name << "  energy "
                      << s.pow(2).sum().item<double>() << "\n";
        }
    }
    std::cout << "subband images in " << out_dir << "\n";
    return 0;
}

// Compares two directories of mask files matched by filename (or two single
// files) and writes per-image CSV plus JSON aggregate.
int cmd_metrics(const std::string& pred_path, const std::string& gt_path,
                const std::string& out_dir) {
    auto load = [](const fs::path& p) {
        cv::Mat m = cv::imread(p.string(), cv::IMREAD_GRAYSCALE);
        if (m.empty()) throw std::runtime_error("cannot read " + p.string());
        cv::Mat b;
        cv::threshold(m, b, 127, 1, cv::THRESH_BINARY);
        auto t = torch::from_blob(b.data, {b.rows, b.cols}, torch::kUInt8)
                     .to(torch::kFloat32)
                     .clone()
                     .reshape({1, 1, b.rows, b.cols});
        return Mask::from_binary(t);
    };

    std::vector<Mask> preds, gts;
    std::vector<std::string> ids;
    if (fs::is_directory(pred_path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(pred_path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            fs::path gt_file = fs::path(gt_path) / f.filename();
            if (!fs::exists(gt_file)) {
                throw std::runtime_error("no ground-truth mask for " +
                                         f.filename().string());
            }
            preds.push_back(load(f));
            gts.push_back(load(gt_file));
            ids.push_back(f.stem().string());
        }
    } else {
        preds.push_back(load(pred_path));
        gts.push_back(load(gt_path));
        ids.push_back(fs::path(pred_path).stem().string());
    }

    auto report = metrics::evaluate_dataset(preds, gts, ids);
    fs::create_directories(out_dir);
    metrics::write_per_image_csv(
        report, (fs::path(out_dir) / "per_image.csv").string());
    metrics::write_aggregate_json(
        report, (fs::path(out_dir) / "metrics.json").string());
    std::cout << "DSC " << report.dsc << "%  IoU " << report.iou << "%  HD95 "
              << report.hd95 << " px over " << report.n_images << " images\n"
              << "reports in " << out_dir << "\n";
    return 0;
}

int cmd_params(const std::string& vae_weights) {
    auto vae = vae_weights.empty() ? make_standin_vae(2333)
                                   : load_pretrained_vae(vae_weights);
    PipelineConfig config;
    torch::manual_seed(2333);
    WaveGms model(config, vae);
    auto s = model->parameter_summary();
    std::cout << "multi-resolution encoder  " << s.encoder_trainable << "\n"
              << "latent mapping model      " << s.lmm_trainable << "\n"
              << "trainable total           " << s.trainable_total << "\n"
              << "VAE encoder (frozen)      " << s.vae_encoder_frozen << "\n"
              << "VAE decoder (frozen)      " << s.vae_decoder_frozen << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wave-GMS: wavelet-driven latent segmentation pipeline"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train on a dataset");
    std::string train_config, train_resume, train_out, train_vae;
    int64_t train_epochs = 0, train_batch = 0, train_seed = -1;
    double train_val_fraction = 0.0;
    DatasetArgs train_dataset;
    train->add_option("--config", train_config, "experiment config JSON");
    train->add_option("--resume", train_resume, "checkpoint dir to resume");
    train_dataset.attach(train, /*required=*/false);
    train->add_option("--out", train_out, "output directory");
    train->add_option("--vae-weights", train_vae, "frozen VAE weight archive");
    train->add_option("--epochs", train_epochs, "override epoch count");
    train->add_option("--batch-size", train_batch, "override batch size");
    train->add_option("--seed", train_seed, "override RNG seed");
    train->add_option("--val-fraction", train_val_fraction,
                      "override validation carve-out fraction");
    bool train_no_augment = false;
    train->add_flag("--no-augment", train_no_augment,
                    "disable data augmentation");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_vae, eval_out = "runs/eval";
    DatasetArgs eval_dataset;
    eval->add_option("--ckpt", eval_ckpt, "checkpoint directory")->required();
    eval_dataset.attach(eval);
    eval->add_option("--vae-weights", eval_vae, "frozen VAE weight archive");
    eval->add_option("--out", eval_out, "output directory");

    // cross-eval
    auto* cross = app.add_subcommand("cross-eval",
                                     "train on one dataset, test on another");
    std::string cross_config, cross_out = "runs/cross", cross_vae;
    std::string cross_train_name = "fixture", cross_train_root;
    std::string cross_eval_name = "fixture", cross_eval_root;
    int64_t cross_epochs = 0, cross_seed = -1;
    double cross_val_fraction = 0.0;
    cross->add_option("--config", cross_config, "experiment config JSON");
    cross->add_option("--train-dataset", cross_train_name, "source name");
    cross->add_option("--train-root", cross_train_root, "source root");
    cross->add_option("--eval-dataset", cross_eval_name, "target name");
    cross->add_option("--eval-root", cross_eval_root, "target root");
    cross->add_option("--out", cross_out, "output directory");
    cross->add_option("--vae-weights", cross_vae, "frozen VAE weight archive");
    cross->add_option("--epochs", cross_epochs, "override epoch count");
    cross->add_option("--seed", cross_seed, "override RNG seed");
    cross->add_option("--val-fraction", cross_val_fraction,
                      "override validation carve-out fraction");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run an ablation variant");
    std::string ablate_config, ablate_variant = "full";
    std::string ablate_out = "runs/ablation", ablate_vae, ablate_lmm;
    DatasetArgs ablate_dataset;
    int64_t ablate_epochs = 0, ablate_seed = -1;
    double ablate_val_fraction = 0.0;
    ablate->add_option("--config", ablate_config, "experiment config JSON");
    ablate->add_option("--variant", ablate_variant,
                       "full, no_alignment, tinyvae_trained, "
                       "tinyvae_model_mismatch, batch2, batch4");
    ablate_dataset.attach(ablate, /*required=*/false);
    ablate->add_option("--out", ablate_out, "output directory");
    ablate->add_option("--vae-weights", ablate_vae, "frozen VAE weights");
    ablate->add_option("--lmm-weights", ablate_lmm,
                       "external mapping-model weights (model mismatch)");
    ablate->add_option("--epochs", ablate_epochs, "override epoch count");
    ablate->add_option("--seed", ablate_seed, "override RNG seed");
    ablate->add_option("--val-fraction", ablate_val_fraction,
                       "override validation carve-out fraction");

    // fixture
    auto* fixture = app.add_subcommand("fixture",
                                       "generate a synthetic dataset");
    std::string fixture_out = "fixture_data";
    int64_t fixture_train = 8, fixture_test = 4, fixture_seed = 7;
    int64_t fixture_size = 224;
    fixture->add_option("--out", fixture_out, "dataset directory");
    fixture->add_option("--train", fixture_train, "train sample count");
    fixture->add_option("--test", fixture_test, "test sample count");
    fixture->add_option("--seed", fixture_seed, "generator seed");
    fixture->add_option("--size", fixture_size, "image side length");

    // decompose
    auto* decompose = app.add_subcommand("decompose",
                                         "write wavelet subband images");
    std::string dec_image, dec_out = "decomposition";
    decompose->add_option("--image", dec_image, "input image")->required();
    decompose->add_option("--out", dec_out, "output directory");

    // metrics
    auto* met = app.add_subcommand(
        "metrics", "compare predicted and ground-truth mask directories");
    std::string met_pred, met_gt, met_out = "metrics_report";
    met->add_option("--pred", met_pred, "predicted mask file or directory")
        ->required();
    met->add_option("--gt", met_gt, "ground-truth mask file or directory")
        ->required();
    met->add_option("--out", met_out, "report directory");

    // params
    auto* params = app.add_subcommand("params", "print parameter counts");
    std::string params_vae;
    params->add_option("--vae-weights", params_vae, "frozen VAE weights");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            return cmd_train(train_config, train_resume, train_dataset,
                             train_out, train_vae, train_epochs, train_batch,
                             train_seed, train_val_fraction, train_no_augment);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_ckpt, eval_dataset, eval_vae, eval_out);
        }
        if (cross->parsed()) {
            experiments::ExperimentConfig config;
            if (!cross_config.empty()) {
                config = load_config_file(cross_config);
            } else {
                DatasetArgs src{cross_train_name, cross_train_root};
                DatasetArgs dst{cross_eval_name, cross_eval_root};
                config.train_dataset = src.spec();
                config.eval_datasets = {dst.spec()};
            }
            config.protocol = experiments::Protocol::CrossDomain;
            if (!cross_out.empty()) config.output_dir = cross_out;
            if (!cross_vae.empty()) config.vae_weights = cross_vae;
            if (cross_epochs > 0) config.train.epochs = cross_epochs;
            if (cross_seed >= 0) {
                config.train.seed = static_cast<uint64_t>(cross_seed);
            }
            if (cross_val_fraction > 0) {
                config.train.val_fraction = cross_val_fraction;
            }
            auto result = experiments::run_cross_domain(config);
            print_report(result.report, result.run_dir);
            return 0;
        }
        if (ablate->parsed()) {
            experiments::ExperimentConfig config;
            if (!ablate_config.empty()) {
                config = load_config_file(ablate_config);
            } else {
                config.train_dataset = ablate_dataset.spec();
            }
            config.protocol = experiments::Protocol::Ablation;
            config.variant = experiments::variant_from_string(ablate_variant);
            if (!ablate_out.empty()) config.output_dir = ablate_out;
            if (!ablate_vae.empty()) config.vae_weights = ablate_vae;
            if (!ablate_lmm.empty()) config.lmm_weights = ablate_lmm;
            if (ablate_epochs > 0) config.train.epochs = ablate_epochs;
            if (ablate_seed >= 0) {
                config.train.seed = static_cast<uint64_t>(ablate_seed);
            }
            if (ablate_val_fraction > 0) {
                config.train.val_fraction = ablate_val_fraction;
            }
            auto result = experiments::run_ablation(config);
            print_report(result.report, result.run_dir);
            return 0;
        }
        if (fixture->parsed()) {
            auto spec = data::make_fixture_dataset(
                fixture_out, fixture_train, fixture_test,
                static_cast<uint64_t>(fixture_seed), fixture_size);
            std::cout << "fixture dataset at " << spec.root << " ("
                      << spec.expected_train << " train, "
                      << spec.expected_test << " test)\n";
            return 0;
        }
        if (decompose->parsed()) return cmd_decompose(dec_image, dec_out);
        if (met->parsed()) return cmd_metrics(met_pred, met_gt, met_out);
        if (params->parsed()) return cmd_params(params_vae);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
