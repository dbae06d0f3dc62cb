#include <torch/torch.h>

#include "fixtures.hpp"
#include "testing.hpp"
#include "wavegms/losses.hpp"
#include "wavegms/pipeline.hpp"

using namespace wavegms;

namespace {

WaveGms make_pipeline(uint64_t seed = 1,
                      LatentSource source = LatentSource::MultiResWavelet) {
    torch::manual_seed(seed);
    PipelineConfig config;
    config.latent_source = source;
    return WaveGms(config, make_standin_vae(seed));
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("training forward produces the full latent set") {
    auto model = make_pipeline();
    auto img = fixtures::signed_image(1, 224, 2);
    auto mask = fixtures::binary_mask(1, 224, 3);
    auto fwd = model->forward_train(img, mask);

    CHECK(fwd.z_mr.kind == LatentKind::MultiRes);
    CHECK(fwd.z_i.kind == LatentKind::Image);
    CHECK(fwd.z_m.kind == LatentKind::Mask);
    for (const auto* z : {&fwd.z_mr, &fwd.z_i, &fwd.z_m}) {
        CHECK(z->data.sizes() == torch::IntArrayRef({1, 4, 28, 28}));
    }
    REQUIRE(fwd.bundle.stage_latents.size() == 4);
    REQUIRE(fwd.bundle.stage_masks.size() == 4);
    for (const auto& m : fwd.bundle.stage_masks) {
        CHECK(m.sizes() == torch::IntArrayRef({1, 1, 224, 224}));
        CHECK(m.min().item<double>() >= 0.0);
        CHECK(m.max().item<double>() <= 1.0);
    }
}

TEST_CASE("losses on a training forward are finite end to end") {
    auto model = make_pipeline(4);
    auto img = fixtures::signed_image(2, 16, 5);
    auto mask = fixtures::binary_mask(2, 16, 6);
    auto fwd = model->forward_train(img, mask);
    auto report = total_loss(fwd.bundle, mask, fwd.z_m, fwd.z_mr, fwd.z_i,
                             true);
    CHECK_NOTHROW(report.check_finite("pipeline smoke"));
}

TEST_CASE("backward reaches encoder and mapping model but not the VAE") {
    auto model = make_pipeline(7);
    auto img = fixtures::signed_image(1, 16, 8);
    auto mask = fixtures::binary_mask(1, 16, 9);
    auto fwd = model->forward_train(img, mask);
    auto report = total_loss(fwd.bundle, mask, fwd.z_m, fwd.z_mr, fwd.z_i,
                             true);
    report.total.backward();

    bool encoder_touched = false;
    for (const auto& p : model->encoder->parameters()) {
        if (p.grad().defined() && p.grad().abs().sum().item<double>() > 0) {
            encoder_touched = true;
        }
    }
    CHECK(encoder_touched);

    bool lmm_touched = false;
    for (const auto& p : model->lmm->parameters()) {
        if (p.grad().defined() && p.grad().abs().sum().item<double>() > 0) {
            lmm_touched = true;
        }
    }
    CHECK(lmm_touched);

    for (const auto& p : model->vae->parameters()) {
        CHECK(!p.grad().defined());
    }
}

TEST_CASE("inference on the wavelet source never calls the VAE encoder") {
    auto model = make_pipeline(10);
    model->vae->reset_encode_calls();
    auto mask = model->forward_infer(fixtures::signed_image(1, 16, 11));
    CHECK(model->vae->encode_calls() == 0);
    CHECK(mask.data.sizes() == torch::IntArrayRef({1, 1, 16, 16}));
}

TEST_CASE("inference output is binary and deterministic") {
    auto model = make_pipeline(12);
    auto img = fixtures::signed_image(2, 16, 13);
    auto a = model->forward_infer(img);
    auto b = model->forward_infer(img);
    CHECK(torch::equal(a.data, b.data));
    CHECK(((a.data == 0) | (a.data == 1)).all().item<bool>());

    auto prob = model->infer_probability(img);
    CHECK(prob.min().item<double>() >= 0.0);
    CHECK(prob.max().item<double>() <= 1.0);
    CHECK(torch::equal(binarize(prob).data, a.data));
}

TEST_CASE("the tinyvae source trains strictly fewer parameters") {
    auto full = make_pipeline(14, LatentSource::MultiResWavelet);
    auto reduced = make_pipeline(14, LatentSource::TinyVae);

    auto count = [](const std::vector<torch::Tensor>& params) {
        int64_t n = 0;
        for (const auto& p : params) n += p.numel();
        return n;
    };
    auto full_count = count(full->trainable_parameters());
    auto reduced_count = count(reduced->trainable_parameters());
    CHECK(reduced_count < full_count);
    CHECK(reduced_count == reduced->lmm->trainable_parameter_count());
}

TEST_CASE("the tinyvae source feeds the image latent to the mapping model") {
    auto model = make_pipeline(15, LatentSource::TinyVae);
    auto img = fixtures::signed_image(1, 16, 16);
    auto mask = fixtures::binary_mask(1, 16, 17);
    model->vae->reset_encode_calls();
    auto fwd = model->forward_train(img, mask);
    // Image and mask encodes, plus the mapping-model input reuses the image
    // latent rather than re-encoding.
    CHECK(model->vae->encode_calls() == 2);
    CHECK(torch::equal(fwd.z_mr.data, fwd.z_i.data));
}

TEST_CASE("parameter summary matches the component budgets") {
    auto model = make_pipeline(18);
    auto summary = model->parameter_summary();
    CHECK(summary.encoder_trainable == 1'019'092);
    CHECK(summary.lmm_trainable == 1'519'376);
    CHECK(summary.trainable_total == 2'538'468);
    CHECK(summary.vae_encoder_frozen == 1'222'532);
    CHECK(summary.vae_decoder_frozen == 1'222'531);

    // Full trainable total lands within 15% of the 2.6M figure.
    CHECK(std::abs(summary.trainable_total - 2'600'000.0) / 2'600'000.0 <
          0.15);
}

TEST_CASE("construction requires a frozen VAE") {
    torch::manual_seed(19);
    TinyVae thawed;
    CHECK_THROWS_AS(WaveGms(PipelineConfig{}, thawed), std::invalid_argument);
}

TEST_CASE("latent source names round-trip") {
    for (auto s : {LatentSource::MultiResWavelet, LatentSource::TinyVae}) {
        CHECK(latent_source_from_string(latent_source_string(s)) == s);
    }
    CHECK_THROWS_AS(latent_source_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("two same-seed pipelines agree on a forward pass") {
    auto a = make_pipeline(20);
    auto b = make_pipeline(20);
    auto img = fixtures::signed_image(1, 16, 21);
    CHECK(torch::equal(a->infer_probability(img), b->infer_probability(img)));
}

}  // TEST_SUITE
