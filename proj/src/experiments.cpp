#include "wavegms/experiments.hpp"

#include "wavegms/tensor_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace wavegms::experiments {

namespace {

nlohmann::json dataset_to_json(const data::DatasetSpec& spec) {
    return {{"name", data::dataset_name_string(spec.name)},
            {"root", spec.root},
            {"expected_train", spec.expected_train},
            {"expected_test", spec.expected_test},
            {"resize_to", spec.resize_to}};
}

data::DatasetSpec dataset_from_json(const nlohmann::json& j) {
    data::DatasetSpec spec;
    spec.name = data::dataset_name_from_string(j.at("name").get<std::string>());
    spec.root = j.at("root").get<std::string>();
    switch (spec.name) {
        case data::DatasetName::BUS: spec = data::DatasetSpec::bus(spec.root); break;
        case data::DatasetName::BUSI: spec = data::DatasetSpec::busi(spec.root); break;
        case data::DatasetName::KvasirInstrument:
            spec = data::DatasetSpec::kvasir_instrument(spec.root);
            break;
        case data::DatasetName::HAM10000:
            spec = data::DatasetSpec::ham10000(spec.root);
            break;
        case data::DatasetName::Fixture:
            spec = data::DatasetSpec::fixture(spec.root);
            break;
    }
    spec.expected_train = j.value("expected_train", spec.expected_train);
    spec.expected_test = j.value("expected_test", spec.expected_test);
    spec.resize_to = j.value("resize_to", spec.resize_to);
    return spec;
}

std::string with_separator(std::string root) {
    if (!root.empty() && root.back() != '/') root.push_back('/');
    return root;
}

TinyVae vae_for(const ExperimentConfig& config) {
    if (!config.vae_weights.empty()) {
        return load_pretrained_vae(config.vae_weights);
    }
    return make_standin_vae(config.train.seed);
}

// Resolves the variant into concrete training and pipeline settings.
std::pair<TrainConfig, PipelineConfig> resolve_variant(
    const ExperimentConfig& config) {
    TrainConfig train = config.train;
    PipelineConfig pipeline;
    switch (config.variant) {
        case Variant::Full:
            break;
        case Variant::NoAlignment:
            train.align_enabled = false;
            break;
        case Variant::TinyVaeTrained:
        case Variant::TinyVaeModelMismatch:
            pipeline.latent_source = LatentSource::TinyVae;
            break;
        case Variant::Batch2:
            train.batch_size = 2;
            break;
        case Variant::Batch4:
            train.batch_size = 4;
            break;
    }
    return {train, pipeline};
}

metrics::MetricsReport evaluate_on(WaveGms& model,
                                   const std::vector<data::Sample>& samples,
                                   int64_t batch_size) {
    std::vector<Mask> preds, gts;
    std::vector<std::string> ids;
    for (size_t start = 0; start < samples.size();
         start += static_cast<size_t>(batch_size)) {
        std::vector<int64_t> idx;
        for (size_t i = start;
             i < std::min(samples.size(),
                          start + static_cast<size_t>(batch_size));
             ++i) {
            idx.push_back(static_cast<int64_t>(i));
        }
        auto img = data::to_image_batch(samples, idx);
        auto gt = data::to_mask_batch(samples, idx);
        auto pred = model->forward_infer(img);
        for (int64_t b = 0; b < pred.data.size(0); ++b) {
            preds.push_back(Mask::from_binary(pred.data[b].unsqueeze(0)));
            gts.push_back(Mask::from_binary(gt.data[b].unsqueeze(0)));
            ids.push_back(samples[idx[b]].id);
        }
    }
    return metrics::evaluate_dataset(preds, gts, ids);
}

void persist_run(const ExperimentConfig& config, const RunResult& result,
                 const std::vector<TableRow>& rows) {
    fs::create_directories(result.run_dir);
    std::ofstream cfg(fs::path(result.run_dir) / "config.json");
    cfg << config.to_json().dump(2) << '\n';
    metrics::write_aggregate_json(
        result.report, (fs::path(result.run_dir) / "metrics.json").string());
    metrics::write_per_image_csv(
        result.report, (fs::path(result.run_dir) / "per_image.csv").string());
    emit_table(rows, (fs::path(result.run_dir) / "table").string());
}

}  // namespace

std::string protocol_string(Protocol p) {
    switch (p) {
        case Protocol::Main: return "main";
        case Protocol::CrossDomain: return "cross_domain";
        case Protocol::Ablation: return "ablation";
    }
    throw std::invalid_argument("unknown protocol");
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "main") return Protocol::Main;
    if (s == "cross_domain") return Protocol::CrossDomain;
    if (s == "ablation") return Protocol::Ablation;
    throw std::invalid_argument("unknown protocol: " + s);
}

std::string variant_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoAlignment: return "no_alignment";
        case Variant::TinyVaeTrained: return "tinyvae_trained";
        case Variant::TinyVaeModelMismatch: return "tinyvae_model_mismatch";
        case Variant::Batch2: return "batch2";
        case Variant::Batch4: return "batch4";
    }
    throw std::invalid_argument("unknown variant");
}

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "no_alignment") return Variant::NoAlignment;
    if (s == "tinyvae_trained") return Variant::TinyVaeTrained;
    if (s == "tinyvae_model_mismatch") return Variant::TinyVaeModelMismatch;
    if (s == "batch2") return Variant::Batch2;
    if (s == "batch4") return Variant::Batch4;
    throw std::invalid_argument("unknown variant: " + s);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& d : eval_datasets) evals.push_back(dataset_to_json(d));
    return {{"protocol", protocol_string(protocol)},
            {"variant", variant_string(variant)},
            {"train_dataset", dataset_to_json(train_dataset)},
            {"eval_datasets", evals},
            {"train", train.to_json()},
            {"output_dir", output_dir},
            {"vae_weights", vae_weights},
            {"lmm_weights", lmm_weights}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    c.variant = variant_from_string(j.value("variant", std::string("full")));
    c.train_dataset = dataset_from_json(j.at("train_dataset"));
    for (const auto& e : j.value("eval_datasets", nlohmann::json::array())) {
        c.eval_datasets.push_back(dataset_from_json(e));
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    c.output_dir = j.value("output_dir", c.output_dir);
    c.vae_weights = j.value("vae_weights", c.vae_weights);
    c.lmm_weights = j.value("lmm_weights", c.lmm_weights);
    return c;
}

std::optional<PublishedReference> published_reference_main(
    data::DatasetName dataset) {
    switch (dataset) {
        case data::DatasetName::BUS:
            return PublishedReference{"BUS", 90.14, 82.62, 5.36};
        case data::DatasetName::BUSI:
            return PublishedReference{"BUSI", 82.31, 73.42, 18.46};
        case data::DatasetName::HAM10000:
            return PublishedReference{"HAM10000", 93.93, 89.37, 9.25};
        case data::DatasetName::KvasirInstrument:
            return PublishedReference{"Kvasir-Instrument", 94.00, 89.40, 9.24};
        case data::DatasetName::Fixture:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<PublishedReference> published_reference_cross_domain(
    data::DatasetName source, data::DatasetName target) {
    using data::DatasetName;
    if (source == DatasetName::BUSI && target == DatasetName::BUS) {
        return PublishedReference{"BUSI to BUS", 82.10, std::nullopt, 15.35};
    }
    if (source == DatasetName::BUS && target == DatasetName::BUSI) {
        return PublishedReference{"BUS to BUSI", 66.75, std::nullopt, 32.57};
    }
    return std::nullopt;
}

std::optional<PublishedReference> published_reference_ablation(
    Variant variant, data::DatasetName dataset) {
    using data::DatasetName;
    auto pick = [&](double bus_d, double bus_i, double bus_h, double busi_d,
                    double busi_i, double busi_h, double kv_d, double kv_i,
                    double kv_h) -> std::optional<PublishedReference> {
        switch (dataset) {
            case DatasetName::BUS:
                return PublishedReference{"BUS", bus_d, bus_i, bus_h};
            case DatasetName::BUSI:
                return PublishedReference{"BUSI", busi_d, busi_i, busi_h};
            case DatasetName::KvasirInstrument:
                return PublishedReference{"Kvasir-Instrument", kv_d, kv_i,
                                          kv_h};
            default:
                return std::nullopt;
        }
    };
    switch (variant) {
        case Variant::Full:
            return pick(90.14, 82.62, 5.36, 82.31, 73.42, 18.46, 94.00, 89.40,
                        9.24);
        case Variant::TinyVaeModelMismatch:
            return pick(86.24, 77.88, 9.48, 79.02, 69.97, 20.79, 93.79, 89.33,
                        9.37);
        case Variant::TinyVaeTrained:
            return pick(89.38, 81.20, 6.03, 81.05, 72.15, 17.64, 92.08, 86.88,
                        14.25);
        case Variant::NoAlignment:
            return pick(89.54, 81.49, 6.11, 82.24, 72.88, 16.91, 93.92, 89.36,
                        9.68);
        case Variant::Batch2:
            return pick(89.84, 81.96, 5.52, 80.32, 71.07, 20.97, 92.93, 87.99,
                        12.23);
        case Variant::Batch4:
            return pick(90.11, 82.38, 6.24, 79.12, 70.21, 22.35, 92.00, 86.75,
                        10.67);
    }
    return std::nullopt;
}

std::optional<PublishedReference> published_reference_sft(
    data::DatasetName dataset) {
    using data::DatasetName;
    switch (dataset) {
        case DatasetName::BUS:
            return PublishedReference{"BUS", 89.95, 82.08, 6.28};
        case DatasetName::BUSI:
            return PublishedReference{"BUSI", 80.98, 72.26, 18.61};
        case DatasetName::KvasirInstrument:
            return PublishedReference{"Kvasir-Instrument", 93.11, 88.65,
                                      10.00};
        default:
            return std::nullopt;
    }
}

std::vector<TableRow> ablation_table(
    const std::vector<std::pair<Variant, metrics::MetricsReport>>& measured,
    data::DatasetName dataset) {
    auto find = [&](Variant v) -> std::optional<metrics::MetricsReport> {
        for (const auto& [variant, report] : measured) {
            if (variant == v) return report;
        }
        return std::nullopt;
    };
    auto row = [&](Variant v, const std::string& name) {
        return TableRow{name, find(v), published_reference_ablation(v, dataset),
                        ""};
    };
    std::vector<TableRow> rows{
        row(Variant::TinyVaeModelMismatch, "Tiny-VAE (model mismatch)"),
        row(Variant::TinyVaeTrained, "Tiny-VAE (trained)"),
        TableRow{"Tiny-VAE + MultiRes SFT", std::nullopt,
                 published_reference_sft(dataset), "not implemented"},
        row(Variant::NoAlignment, "Wave-GMS (w/o alignment)"),
        row(Variant::Batch2, "Wave-GMS (batch_size = 2)"),
        row(Variant::Batch4, "Wave-GMS (batch_size = 4)"),
        row(Variant::Full, "Wave-GMS"),
    };
    return rows;
}

RunResult run_main(const ExperimentConfig& config) {
    auto [train_cfg, pipeline_cfg] = resolve_variant(config);
    auto dataset = data::load_dataset(config.train_dataset, "main:train");

    auto model = make_seeded_pipeline(pipeline_cfg, train_cfg.seed,
                                      vae_for(config));
    Trainer trainer(model, train_cfg);
    auto fit = trainer.fit(dataset.train, config.output_dir);
    load_checkpoint(fit.best_checkpoint, model);

    RunResult result;
    result.run_dir = config.output_dir;
    result.checkpoint = fit.best_checkpoint;
    const auto& eval_samples = config.eval_datasets.empty()
                                   ? dataset.test
                                   : data::load_dataset(
                                         config.eval_datasets.front(),
                                         "main:eval")
                                         .test;
    result.report = evaluate_on(model, eval_samples, train_cfg.batch_size);

    std::vector<TableRow> rows;
    rows.push_back({variant_string(config.variant), result.report,
                    published_reference_main(config.train_dataset.name), ""});
    persist_run(config, result, rows);
    return result;
}

RunResult run_cross_domain(const ExperimentConfig& config) {
    check(!config.eval_datasets.empty(),
          "cross-domain evaluation needs a target dataset");
    const auto& target_spec = config.eval_datasets.front();

    auto source_root = fs::weakly_canonical(config.train_dataset.root);
    auto target_root = fs::weakly_canonical(target_spec.root);
    check(source_root != target_root,
          "cross-domain source and target must be distinct datasets");
    auto source_prefix = with_separator(source_root.string());
    auto target_prefix = with_separator(target_root.string());
    check(source_prefix.rfind(target_prefix, 0) != 0 &&
              target_prefix.rfind(source_prefix, 0) != 0,
          "cross-domain source and target roots overlap");

    auto [train_cfg, pipeline_cfg] = resolve_variant(config);
    auto source = data::load_dataset(config.train_dataset, "cross:source");

    auto model = make_seeded_pipeline(pipeline_cfg, train_cfg.seed,
                                      vae_for(config));
    Trainer trainer(model, train_cfg);
    auto fit = trainer.fit(source.train, config.output_dir);
    load_checkpoint(fit.best_checkpoint, model);

    auto boundary =
        data::LoaderAudit::instance().mark("cross:training_complete");
    auto target = data::load_dataset(target_spec, "cross:target");
    if (!data::LoaderAudit::instance().all_opens_after(
            with_separator(target_spec.root), boundary)) {
        throw std::runtime_error(
            "cross-domain isolation violated: target files were opened "
            "before training completed");
    }

    RunResult result;
    result.run_dir = config.output_dir;
    result.checkpoint = fit.best_checkpoint;
    result.report = evaluate_on(model, target.test, train_cfg.batch_size);

    std::vector<TableRow> rows;
    std::string row_name = data::dataset_name_string(
                               config.train_dataset.name) +
                           " to " +
                           data::dataset_name_string(target_spec.name);
    rows.push_back({row_name, result.report,
                    published_reference_cross_domain(
                        config.train_dataset.name, target_spec.name),
                    ""});
    persist_run(config, result, rows);
    return result;
}

RunResult run_ablation(const ExperimentConfig& config) {
    auto [train_cfg, pipeline_cfg] = resolve_variant(config);

    if (config.variant == Variant::TinyVaeModelMismatch) {
        check(!config.lmm_weights.empty(),
              "the model-mismatch variant needs external mapping-model "
              "weights (lmm_weights)");
        auto dataset =
            data::load_dataset(config.train_dataset, "ablation:eval");
        auto model = make_seeded_pipeline(pipeline_cfg, train_cfg.seed,
                                          vae_for(config));
        auto archive = io::load_named_tensors(config.lmm_weights);
        bool prefixed = !archive.tensors.empty() &&
                        archive.tensors.front().first.rfind("lmm.", 0) == 0;
        io::load_into_module(*model->lmm, archive, prefixed ? "lmm." : "");

        RunResult result;
        result.run_dir = config.output_dir;
        result.checkpoint = config.lmm_weights;
        result.report =
            evaluate_on(model, dataset.test, train_cfg.batch_size);
        std::vector<TableRow> rows;
        rows.push_back({variant_string(config.variant), result.report,
                        published_reference_ablation(
                            config.variant, config.train_dataset.name),
                        "no training performed"});
        persist_run(config, result, rows);
        return result;
    }

    ExperimentConfig effective = config;
    effective.train = train_cfg;
    auto dataset = data::load_dataset(effective.train_dataset,
                                      "ablation:train");
    auto model = make_seeded_pipeline(pipeline_cfg, train_cfg.seed,
                                      vae_for(effective));
    Trainer trainer(model, train_cfg);
    auto fit = trainer.fit(dataset.train, effective.output_dir);
    load_checkpoint(fit.best_checkpoint, model);

    RunResult result;
    result.run_dir = effective.output_dir;
    result.checkpoint = fit.best_checkpoint;
    result.report = evaluate_on(model, dataset.test, train_cfg.batch_size);

    std::vector<TableRow> rows;
    rows.push_back({variant_string(config.variant), result.report,
                    published_reference_ablation(config.variant,
                                                 config.train_dataset.name),
                    ""});
    persist_run(effective, result, rows);
    return result;
}

void emit_table(const std::vector<TableRow>& rows, const std::string& stem) {
    check(!rows.empty(), "cannot emit a table without rows");

    // Flag positions among measured rows: best and second best per column
    // (higher DSC/IoU, lower HD95).
    std::vector<size_t> measured_idx;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].measured) measured_idx.push_back(i);
    }
    enum Flag { kNone, kBest, kSecond };
    auto rank = [&](auto value_of, bool higher_better) {
        std::vector<Flag> flags(rows.size(), kNone);
        if (measured_idx.size() < 2) return flags;
        auto better = [&](double a, double b) {
            return higher_better ? a > b : a < b;
        };
        size_t best = measured_idx[0], second = measured_idx[0];
        bool have_second = false;
        for (size_t k = 1; k < measured_idx.size(); ++k) {
            size_t i = measured_idx[k];
            double v = value_of(*rows[i].measured);
            if (better(v, value_of(*rows[best].measured))) {
                second = best;
                have_second = true;
                best = i;
            } else if (!have_second ||
                       better(v, value_of(*rows[second].measured))) {
                second = i;
                have_second = true;
            }
        }
        flags[best] = kBest;
        if (have_second) flags[second] = kSecond;
        return flags;
    };
    auto dsc_flags = rank([](const auto& r) { return r.dsc; }, true);
    auto iou_flags = rank([](const auto& r) { return r.iou; }, true);
    auto hd_flags = rank([](const auto& r) { return r.hd95; }, false);

    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    auto cell = [&](double v, Flag f) {
        if (f == kBest) return "**" + fmt(v) + "**";
        if (f == kSecond) return "_" + fmt(v) + "_";
        return fmt(v);
    };

    std::ofstream md(stem + ".md");
    std::ofstream csv(stem + ".csv");
    if (!md || !csv) {
        throw std::runtime_error("cannot write table files at " + stem);
    }
    md << "| Method | DSC (%) | IoU (%) | HD95 (px) |\n";
    md << "|---|---|---|---|\n";
    csv << "method,source,dsc,iou,hd95,note\n";

    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.measured) {
            const auto& r = *row.measured;
            md << "| " << row.name << " | " << cell(r.dsc, dsc_flags[i])
               << " | " << cell(r.iou, iou_flags[i]) << " | "
               << cell(r.hd95, hd_flags[i]) << " |";
            if (!row.note.empty()) md << "  <!-- " << row.note << " -->";
            md << "\n";
            csv << row.name << ",measured," << fmt(r.dsc) << ',' << fmt(r.iou)
                << ',' << fmt(r.hd95) << ',' << row.note << '\n';
        } else if (!row.reference) {
            md << "| " << row.name << " | n/a | n/a | n/a | "
               << (row.note.empty() ? "" : row.note) << "\n";
            csv << row.name << ",none,,,," << row.note << '\n';
        }
        if (row.reference) {
            const auto& p = *row.reference;
            std::string label = row.name + " (published reference)";
            md << "| " << label << " | " << fmt(p.dsc) << " | "
               << (p.iou ? fmt(*p.iou) : std::string("n/a")) << " | "
               << fmt(p.hd95) << " |";
            if (!row.measured && !row.note.empty()) {
                md << "  <!-- " << row.note << " -->";
            }
            md << "\n";
            csv << label << ",published reference," << fmt(p.dsc) << ','
                << (p.iou ? fmt(*p.iou) : std::string()) << ',' << fmt(p.hd95)
                << ',' << (row.measured ? std::string() : row.note) << '\n';
        }
    }
}

}  // namespace wavegms::experiments
