#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "testing.hpp"
#include "wavegms/experiments.hpp"
#include "wavegms/tensor_io.hpp"

using namespace wavegms;
using namespace wavegms::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

metrics::MetricsReport report_with(double dsc, double iou, double hd95) {
    metrics::MetricsReport r;
    r.dsc = dsc;
    r.iou = iou;
    r.hd95 = hd95;
    r.n_images = 1;
    return r;
}

TrainConfig smoke_train_config() {
    TrainConfig t;
    t.epochs = 1;
    t.batch_size = 2;
    t.val_fraction = 0.34;
    t.augment_enabled = false;
    return t;
}

ExperimentConfig fixture_experiment(const std::string& data_dir,
                                    const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.train_dataset = data::make_fixture_dataset(data_dir, 6, 3, 42, 16);
    cfg.train = smoke_train_config();
    cfg.output_dir = out_dir;
    return cfg;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("protocol and variant names round-trip") {
    for (auto p : {Protocol::Main, Protocol::CrossDomain, Protocol::Ablation}) {
        CHECK(protocol_from_string(protocol_string(p)) == p);
    }
    for (auto v : {Variant::Full, Variant::NoAlignment, Variant::TinyVaeTrained,
                   Variant::TinyVaeModelMismatch, Variant::Batch2,
                   Variant::Batch4}) {
        CHECK(variant_from_string(variant_string(v)) == v);
    }
    CHECK_THROWS(protocol_from_string("sideways"));
    CHECK_THROWS(variant_from_string("batch3"));
}

TEST_CASE("experiment config round-trips through json") {
    ExperimentConfig cfg;
    cfg.protocol = Protocol::CrossDomain;
    cfg.variant = Variant::Batch2;
    cfg.train_dataset = data::DatasetSpec::busi("/data/busi");
    cfg.eval_datasets.push_back(data::DatasetSpec::bus("/data/bus"));
    cfg.train.epochs = 3;
    cfg.output_dir = "runs/cross";
    cfg.vae_weights = "weights/taesd.wt";
    cfg.lmm_weights = "weights/foreign_lmm.wt";

    auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.protocol == Protocol::CrossDomain);
    CHECK(back.variant == Variant::Batch2);
    CHECK(back.train_dataset.name == data::DatasetName::BUSI);
    CHECK(back.train_dataset.root == "/data/busi");
    REQUIRE(back.eval_datasets.size() == 1);
    CHECK(back.eval_datasets[0].name == data::DatasetName::BUS);
    CHECK(back.train.epochs == 3);
    CHECK(back.output_dir == "runs/cross");
    CHECK(back.vae_weights == "weights/taesd.wt");
    CHECK(back.lmm_weights == "weights/foreign_lmm.wt");
}

TEST_CASE("published single-domain references match the report") {
    auto bus = published_reference_main(data::DatasetName::BUS);
    REQUIRE(bus.has_value());
    CHECK(bus->dsc == doctest::Approx(90.14));
    CHECK(bus->iou.value() == doctest::Approx(82.62));
    CHECK(bus->hd95 == doctest::Approx(5.36));

    CHECK(published_reference_main(data::DatasetName::BUSI)->dsc ==
          doctest::Approx(82.31));
    CHECK(published_reference_main(data::DatasetName::HAM10000)->dsc ==
          doctest::Approx(93.93));
    CHECK(published_reference_main(data::DatasetName::KvasirInstrument)->dsc ==
          doctest::Approx(94.00));
    CHECK(!published_reference_main(data::DatasetName::Fixture).has_value());
}

TEST_CASE("published cross-domain references cover both directions only") {
    auto busi_bus = published_reference_cross_domain(data::DatasetName::BUSI,
                                                     data::DatasetName::BUS);
    REQUIRE(busi_bus.has_value());
    CHECK(busi_bus->dsc == doctest::Approx(82.10));
    CHECK(!busi_bus->iou.has_value());
    CHECK(busi_bus->hd95 == doctest::Approx(15.35));

    auto bus_busi = published_reference_cross_domain(data::DatasetName::BUS,
                                                     data::DatasetName::BUSI);
    REQUIRE(bus_busi.has_value());
    CHECK(bus_busi->dsc == doctest::Approx(66.75));
    CHECK(bus_busi->hd95 == doctest::Approx(32.57));

    CHECK(!published_reference_cross_domain(data::DatasetName::BUS,
                                            data::DatasetName::BUS)
               .has_value());
    CHECK(!published_reference_cross_domain(data::DatasetName::HAM10000,
                                            data::DatasetName::BUS)
               .has_value());
}

TEST_CASE("published ablation references match the report") {
    using data::DatasetName;
    auto no_align = published_reference_ablation(Variant::NoAlignment,
                                                 DatasetName::BUS);
    REQUIRE(no_align.has_value());
    CHECK(no_align->dsc == doctest::Approx(89.54));
    CHECK(no_align->iou.value() == doctest::Approx(81.49));
    CHECK(no_align->hd95 == doctest::Approx(6.11));

    CHECK(published_reference_ablation(Variant::Batch4, DatasetName::BUS)->dsc ==
          doctest::Approx(90.11));
    CHECK(published_reference_ablation(Variant::TinyVaeModelMismatch,
                                       DatasetName::KvasirInstrument)
              ->dsc == doctest::Approx(93.79));
    CHECK(published_reference_ablation(Variant::TinyVaeTrained,
                                       DatasetName::BUSI)
              ->dsc == doctest::Approx(81.05));

    // The full variant quotes the same numbers as the single-domain table.
    auto full = published_reference_ablation(Variant::Full, DatasetName::BUSI);
    auto main = published_reference_main(DatasetName::BUSI);
    CHECK(full->dsc == main->dsc);
    CHECK(full->hd95 == main->hd95);

    CHECK(!published_reference_ablation(Variant::Full, DatasetName::Fixture)
               .has_value());
}

TEST_CASE("published hybrid-transform references exist per dataset") {
    CHECK(published_reference_sft(data::DatasetName::BUS)->dsc ==
          doctest::Approx(89.95));
    CHECK(published_reference_sft(data::DatasetName::BUSI)->dsc ==
          doctest::Approx(80.98));
    CHECK(published_reference_sft(data::DatasetName::KvasirInstrument)->dsc ==
          doctest::Approx(93.11));
    CHECK(!published_reference_sft(data::DatasetName::Fixture).has_value());
}

TEST_CASE("emit_table flags the best and runner-up measured values") {
    fixtures::TempDir dir("table");
    std::vector<TableRow> rows{
        {"alpha", report_with(80.0, 70.0, 12.0), std::nullopt, ""},
        {"bravo", report_with(90.0, 60.0, 10.0), std::nullopt, ""},
        {"charlie", report_with(85.0, 65.0, 15.0), std::nullopt, ""},
    };
    emit_table(rows, dir.sub("t"));

    auto md = slurp(dir.sub("t.md"));
    CHECK(md.find("| Method | DSC (%) | IoU (%) | HD95 (px) |") !=
          std::string::npos);
    CHECK(md.find("**90.00**") != std::string::npos);  // best DSC
    CHECK(md.find("_85.00_") != std::string::npos);    // second DSC
    CHECK(md.find("**70.00**") != std::string::npos);  // best IoU
    CHECK(md.find("_65.00_") != std::string::npos);
    CHECK(md.find("**10.00**") != std::string::npos);  // lowest HD95 wins
    CHECK(md.find("_12.00_") != std::string::npos);

    auto csv = slurp(dir.sub("t.csv"));
    CHECK(csv.find("method,source,dsc,iou,hd95,note") != std::string::npos);
    CHECK(csv.find("bravo,measured,90.00,60.00,10.00,") != std::string::npos);
    // No markdown emphasis leaks into the CSV.
    CHECK(csv.find("**") == std::string::npos);
}

TEST_CASE("a single measured row gets no emphasis") {
    fixtures::TempDir dir("table_single");
    std::vector<TableRow> rows{
        {"solo", report_with(88.0, 79.0, 7.0), std::nullopt, ""}};
    emit_table(rows, dir.sub("t"));
    auto md = slurp(dir.sub("t.md"));
    CHECK(md.find("| 88.00 |") != std::string::npos);
    CHECK(md.find("**") == std::string::npos);
    CHECK(md.find("_88") == std::string::npos);
}

TEST_CASE("reference rows annotate but never compete") {
    fixtures::TempDir dir("table_ref");
    std::vector<TableRow> rows{
        {"ours", report_with(70.0, 60.0, 20.0),
         PublishedReference{"ours", 95.0, 90.0, 2.0}, ""},
        {"theirs", report_with(75.0, 65.0, 18.0), std::nullopt, ""},
    };
    emit_table(rows, dir.sub("t"));
    auto md = slurp(dir.sub("t.md"));

    // The reference figures outclass every measured value yet stay unflagged.
    CHECK(md.find("ours (published reference)") != std::string::npos);
    CHECK(md.find("**95.00**") == std::string::npos);
    CHECK(md.find("**75.00**") != std::string::npos);
    CHECK(md.find("_70.00_") != std::string::npos);

    auto csv = slurp(dir.sub("t.csv"));
    CHECK(csv.find("ours (published reference),published reference,95.00") !=
          std::string::npos);
}

TEST_CASE("a reference without an IoU figure renders a placeholder") {
    fixtures::TempDir dir("table_na");
    std::vector<TableRow> rows{
        {"crossing", std::nullopt,
         PublishedReference{"crossing", 82.10, std::nullopt, 15.35}, ""}};
    emit_table(rows, dir.sub("t"));
    auto md = slurp(dir.sub("t.md"));
    CHECK(md.find("| 82.10 | n/a | 15.35 |") != std::string::npos);
}

TEST_CASE("notes surface as markdown comments") {
    fixtures::TempDir dir("table_note");
    std::vector<TableRow> rows{
        {"flagged", report_with(50.0, 40.0, 30.0), std::nullopt,
         "no training performed"},
        {"second", report_with(55.0, 45.0, 25.0), std::nullopt, ""},
    };
    emit_table(rows, dir.sub("t"));
    auto md = slurp(dir.sub("t.md"));
    CHECK(md.find("<!-- no training performed -->") != std::string::npos);
    auto csv = slurp(dir.sub("t.csv"));
    CHECK(csv.find(",no training performed") != std::string::npos);
}

TEST_CASE("emit_table refuses an empty table") {
    fixtures::TempDir dir("table_empty");
    CHECK_THROWS(emit_table({}, dir.sub("t")));
}

TEST_CASE("ablation_table lists every variant in publication order") {
    auto rows = ablation_table({}, data::DatasetName::BUS);
    REQUIRE(rows.size() == 7);
    CHECK(rows[0].name == "Tiny-VAE (model mismatch)");
    CHECK(rows[1].name == "Tiny-VAE (trained)");
    CHECK(rows[2].name == "Tiny-VAE + MultiRes SFT");
    CHECK(rows[3].name == "Wave-GMS (w/o alignment)");
    CHECK(rows[4].name == "Wave-GMS (batch_size = 2)");
    CHECK(rows[5].name == "Wave-GMS (batch_size = 4)");
    CHECK(rows[6].name == "Wave-GMS");

    for (const auto& row : rows) {
        CHECK(!row.measured.has_value());
        REQUIRE(row.reference.has_value());
    }
    CHECK(rows[2].note == "not implemented");
    CHECK(rows[2].reference->dsc == doctest::Approx(89.95));
    CHECK(rows[6].reference->dsc == doctest::Approx(90.14));
}

TEST_CASE("ablation_table attaches measurements to their variants") {
    std::vector<std::pair<Variant, metrics::MetricsReport>> measured{
        {Variant::Full, report_with(88.0, 80.0, 6.0)},
        {Variant::Batch2, report_with(86.0, 78.0, 7.0)},
    };
    auto rows = ablation_table(measured, data::DatasetName::BUSI);
    REQUIRE(rows.size() == 7);
    CHECK(rows[6].measured.has_value());
    CHECK(rows[6].measured->dsc == doctest::Approx(88.0));
    CHECK(rows[4].measured.has_value());
    CHECK(!rows[0].measured.has_value());
    // The reference annotation rides along with the measurement.
    CHECK(rows[6].reference->dsc == doctest::Approx(82.31));

    // The hybrid row stays reference-only even on the fixture dataset,
    // where there is no reference at all.
    auto fixture_rows = ablation_table(measured, data::DatasetName::Fixture);
    CHECK(!fixture_rows[2].measured.has_value());
    CHECK(!fixture_rows[2].reference.has_value());
    CHECK(fixture_rows[2].note == "not implemented");
}

TEST_CASE("run_main trains on a fixture and persists its outputs") {
    fixtures::TempDir dir("run_main");
    auto cfg = fixture_experiment(dir.sub("data"), dir.sub("out"));

    auto result = run_main(cfg);
    CHECK(result.report.n_images == 3);
    CHECK(result.report.dsc >= 0.0);
    CHECK(fs::exists(result.checkpoint));
    CHECK(fs::exists(dir.sub("out") + "/config.json"));
    CHECK(fs::exists(dir.sub("out") + "/metrics.json"));
    CHECK(fs::exists(dir.sub("out") + "/per_image.csv"));
    CHECK(fs::exists(dir.sub("out") + "/table.md"));
    CHECK(fs::exists(dir.sub("out") + "/table.csv"));

    // Fixture datasets have no published numbers to annotate.
    auto md = slurp(dir.sub("out") + "/table.md");
    CHECK(md.find("published reference") == std::string::npos);
}

TEST_CASE("run_ablation without alignment logs a zero alignment column") {
    fixtures::TempDir dir("run_noalign");
    auto cfg = fixture_experiment(dir.sub("data"), dir.sub("out"));
    cfg.protocol = Protocol::Ablation;
    cfg.variant = Variant::NoAlignment;

    auto result = run_ablation(cfg);
    CHECK(result.report.n_images == 3);

    std::ifstream csv(dir.sub("out") + "/loss.csv");
    std::string line;
    std::getline(csv, line);
    REQUIRE(line == "epoch,step,seg,lm,align,total,lr");
    int rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        ++rows;
        std::stringstream ss(line);
        std::string field;
        for (int i = 0; i <= 4; ++i) std::getline(ss, field, ',');
        CHECK(std::stod(field) == 0.0);
    }
    CHECK(rows > 0);
}

TEST_CASE("the model-mismatch variant insists on external weights") {
    fixtures::TempDir dir("run_mismatch_bad");
    auto cfg = fixture_experiment(dir.sub("data"), dir.sub("out"));
    cfg.protocol = Protocol::Ablation;
    cfg.variant = Variant::TinyVaeModelMismatch;
    CHECK_THROWS_WITH_AS(run_ablation(cfg),
                         doctest::Contains("lmm_weights"),
                         std::invalid_argument);
}

TEST_CASE("the model-mismatch variant evaluates foreign weights untrained") {
    fixtures::TempDir dir("run_mismatch");
    auto cfg = fixture_experiment(dir.sub("data"), dir.sub("out"));
    cfg.protocol = Protocol::Ablation;
    cfg.variant = Variant::TinyVaeModelMismatch;

    // Stand in for weights trained elsewhere: a differently seeded model.
    auto donor = make_seeded_pipeline(PipelineConfig{}, 777,
                                      make_standin_vae(777));
    cfg.lmm_weights = dir.sub("foreign_lmm.wt");
    io::save_named_tensors(cfg.lmm_weights,
                           io::named_parameters_of(*donor->lmm));

    auto result = run_ablation(cfg);
    CHECK(result.report.n_images == 3);
    CHECK(result.checkpoint == cfg.lmm_weights);
    // No training happened, so no loss log was produced.
    CHECK(!fs::exists(dir.sub("out") + "/loss.csv"));
    auto csv = slurp(dir.sub("out") + "/table.csv");
    CHECK(csv.find("no training performed") != std::string::npos);
}

TEST_CASE("cross-domain runs refuse shared or nested roots") {
    fixtures::TempDir dir("cross_bad");
    auto cfg = fixture_experiment(dir.sub("data"), dir.sub("out"));
    cfg.protocol = Protocol::CrossDomain;

    SUBCASE("no target at all") {
        CHECK_THROWS(run_cross_domain(cfg));
    }
    SUBCASE("identical roots") {
        cfg.eval_datasets.push_back(cfg.train_dataset);
        CHECK_THROWS_WITH_AS(run_cross_domain(cfg),
                             doctest::Contains("distinct"),
                             std::invalid_argument);
    }
    SUBCASE("nested roots") {
        auto nested = cfg.train_dataset;
        nested.root = dir.sub("data") + "/train";
        cfg.eval_datasets.push_back(nested);
        CHECK_THROWS_WITH_AS(run_cross_domain(cfg),
                             doctest::Contains("overlap"),
                             std::invalid_argument);
    }
}

TEST_CASE("cross-domain evaluation opens the target only after training") {
    fixtures::TempDir dir("cross");
    auto cfg = fixture_experiment(dir.sub("source"), dir.sub("out"));
    cfg.protocol = Protocol::CrossDomain;
    cfg.eval_datasets.push_back(
        data::make_fixture_dataset(dir.sub("target"), 4, 2, 99, 16));

    data::LoaderAudit::instance().clear();
    auto result = run_cross_domain(cfg);
    CHECK(result.report.n_images == 2);  // the target's test split

    // Independent replay of the audit: no target open precedes the boundary.
    const auto& events = data::LoaderAudit::instance().events();
    std::optional<size_t> boundary;
    for (size_t i = 0; i < events.size(); ++i) {
        if (events[i].label == "cross:training_complete") boundary = i;
    }
    REQUIRE(boundary.has_value());
    for (size_t i = 0; i < *boundary; ++i) {
        CHECK(events[i].path.find(dir.sub("target")) == std::string::npos);
    }
}

}  // TEST_SUITE
