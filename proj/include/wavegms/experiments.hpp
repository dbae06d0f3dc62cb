#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wavegms/data.hpp"
#include "wavegms/metrics.hpp"
#include "wavegms/training.hpp"

namespace wavegms::experiments {

enum class Protocol { Main, CrossDomain, Ablation };
enum class Variant {
    Full,
    NoAlignment,
    TinyVaeTrained,
    TinyVaeModelMismatch,
    Batch2,
    Batch4,
};

std::string protocol_string(Protocol p);
Protocol protocol_from_string(const std::string& s);
std::string variant_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ExperimentConfig {
    Protocol protocol = Protocol::Main;
    Variant variant = Variant::Full;
    data::DatasetSpec train_dataset;
    std::vector<data::DatasetSpec> eval_datasets;  // empty: own test split
    TrainConfig train;
    std::string output_dir = "runs/experiment";
    std::string vae_weights;  // empty: seeded random stand-in
    std::string lmm_weights;  // required by the model-mismatch variant

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

// Numbers reported by the publication, carried only as annotations on
// emitted tables; nothing in the build asserts against them.
struct PublishedReference {
    std::string label;
    double dsc = 0.0;
    std::optional<double> iou;
    double hd95 = 0.0;
};

std::optional<PublishedReference> published_reference_main(
    data::DatasetName dataset);
std::optional<PublishedReference> published_reference_cross_domain(
    data::DatasetName source, data::DatasetName target);
std::optional<PublishedReference> published_reference_ablation(
    Variant variant, data::DatasetName dataset);
// The SFT hybrid row of the ablation table; no Variant maps to it because it
// is out of scope (needs feature-transform blocks from other works).
std::optional<PublishedReference> published_reference_sft(
    data::DatasetName dataset);

struct RunResult {
    metrics::MetricsReport report;
    std::string run_dir;
    std::string checkpoint;  // best checkpoint used for evaluation
};

// Train on the dataset's train split, evaluate its test split, persist
// config snapshot, checkpoints, metrics JSON, per-image CSV, and a table.
RunResult run_main(const ExperimentConfig& config);

// Train on the source's train split, evaluate the target's test split. The
// target's files are provably unopened before evaluation (loader audit), and
// identical source/target roots abort.
RunResult run_cross_domain(const ExperimentConfig& config);

// Variant semantics: no_alignment disables the alignment loss term;
// tinyvae_trained feeds the frozen VAE's image latent to the mapping model
// (training it alone); tinyvae_model_mismatch loads external mapping-model
// weights and performs no training; batch2/batch4 override the batch size.
RunResult run_ablation(const ExperimentConfig& config);

struct TableRow {
    std::string name;
    std::optional<metrics::MetricsReport> measured;
    std::optional<PublishedReference> reference;
    std::string note;
};

// Writes stem.md and stem.csv. Per column the best measured value is bold
// and the second best italic; published-reference rows are annotations and
// never compete for flags.
void emit_table(const std::vector<TableRow>& rows, const std::string& stem);

// Ablation summary rows in publication order. Variants present in `measured`
// carry their report; every row keeps its published reference, and the SFT
// hybrid appears as a reference-only row marked "not implemented".
std::vector<TableRow> ablation_table(
    const std::vector<std::pair<Variant, metrics::MetricsReport>>& measured,
    data::DatasetName dataset);

}  // namespace wavegms::experiments
