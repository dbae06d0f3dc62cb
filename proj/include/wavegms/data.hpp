#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wavegms/core_types.hpp"

namespace wavegms::data {

enum class DatasetName { BUS, BUSI, KvasirInstrument, HAM10000, Fixture };

std::string dataset_name_string(DatasetName name);
DatasetName dataset_name_from_string(const std::string& s);

// Expected directory layout under root:
//   root/train/images/*.png|jpg   root/train/masks/*
//   root/test/images/*            root/test/masks/*
// Masks pair with images by filename stem, optionally suffixed _mask or
// _segmentation. expected_* of -1 disables the count check (fixtures).
struct DatasetSpec {
    DatasetName name = DatasetName::Fixture;
    std::string root;
    int64_t expected_train = -1;
    int64_t expected_test = -1;
    int64_t resize_to = 224;

    static DatasetSpec bus(std::string root);
    static DatasetSpec busi(std::string root);
    static DatasetSpec kvasir_instrument(std::string root);
    static DatasetSpec ham10000(std::string root);
    static DatasetSpec fixture(std::string root, int64_t resize_to = 224);
};

// One resized pair, stored compactly; image is [3,S,S] uint8 RGB, mask is
// [1,S,S] uint8 in {0,1}.
struct Sample {
    torch::Tensor image_u8;
    torch::Tensor mask_u8;
    std::string id;
};

struct LoadedDataset {
    DatasetSpec spec;
    std::vector<Sample> train;
    std::vector<Sample> test;
};

// Process-global record of every file the loader opened, used to prove that
// cross-domain evaluation never reads target data early.
class LoaderAudit {
  public:
    struct Event {
        int64_t seq;
        std::string path;
        std::string label;
    };

    static LoaderAudit& instance();

    void record(const std::string& path, const std::string& label);
    // Inserts a boundary marker (empty path) into the event stream.
    int64_t mark(const std::string& label);
    std::vector<Event> events() const;
    void clear();

    // Every opened path under `root_prefix` has seq greater than `after_seq`.
    bool all_opens_after(const std::string& root_prefix,
                        int64_t after_seq) const;

  private:
    LoaderAudit() = default;
    mutable std::mutex mu_;
    std::vector<Event> events_;
    int64_t next_seq_ = 0;
};

// Loads both splits: images resized bilinearly, masks nearest-neighbor and
// re-binarized, grayscale replicated to 3 channels, pairs ordered by
// filename. Errors name the offending file (missing mask) or report
// expected/actual counts.
LoadedDataset load_dataset(const DatasetSpec& spec,
                           const std::string& audit_label = "load");

// Seeded disjoint carve-out: floor(n * fraction) samples become validation,
// the rest stay training, both in original order.
std::pair<std::vector<Sample>, std::vector<Sample>> make_validation_split(
    const std::vector<Sample>& train, double fraction, uint64_t seed);

struct AugmentationPolicy {
    double flip_horizontal_prob = 0.5;
    double flip_vertical_prob = 0.5;
    double rotation_degrees = 15.0;
    double hue_jitter = 0.02;        // additive, fraction of a full hue turn
    double saturation_jitter = 0.2;  // multiplicative range 1 +- x
    double value_jitter = 0.2;

    static AugmentationPolicy identity();
};

// Augmentation draws are a pure function of (seed, epoch, index): geometric
// transforms hit image and mask identically, HSV jitter touches the image
// only, and the mask stays binary.
Sample augment(const Sample& sample, const AugmentationPolicy& policy,
               uint64_t seed, int64_t epoch, int64_t index);

// Batch assembly: images to signed [-1,1] float, masks to {0,1} float.
Image to_image_batch(const std::vector<Sample>& samples,
                     const std::vector<int64_t>& indices);
Mask to_mask_batch(const std::vector<Sample>& samples,
                   const std::vector<int64_t>& indices);

// Deterministic epoch shuffle, a pure function of (seed, epoch).
std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int64_t epoch);

// Writes a tiny synthetic dataset (noisy background, bright ellipse
// foreground, mask = the ellipse) in the canonical layout; returns a spec
// with matching expected counts.
DatasetSpec make_fixture_dataset(const std::string& dir, int64_t n_train,
                                 int64_t n_test, uint64_t seed,
                                 int64_t image_size = 224);

}  // namespace wavegms::data
