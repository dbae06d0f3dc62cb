#include "wavegms/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace wavegms::data {

namespace {

const std::set<std::string> kImageExtensions = {".png", ".jpg", ".jpeg",
                                                ".bmp", ".tif", ".tiff"};

bool has_image_extension(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return kImageExtensions.count(ext) > 0;
}

// Mask files may share the image's stem or append one of these suffixes.
std::string strip_mask_suffix(const std::string& stem) {
    for (const char* suffix : {"_mask", "_segmentation"}) {
        auto n = std::string(suffix).size();
        if (stem.size() > n && stem.compare(stem.size() - n, n, suffix) == 0) {
            return stem.substr(0, stem.size() - n);
        }
    }
    return stem;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("dataset directory missing: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

torch::Tensor mat_to_chw_u8(const cv::Mat& m) {
    cv::Mat c = m.isContinuous() ? m : m.clone();
    auto t = torch::from_blob(c.data, {c.rows, c.cols, c.channels()},
                              torch::kUInt8)
                 .permute({2, 0, 1})
                 .clone();
    return t;
}

cv::Mat chw_u8_to_mat(const torch::Tensor& t) {
    auto hwc = t.permute({1, 2, 0}).contiguous();
    int type = t.size(0) == 3 ? CV_8UC3 : CV_8UC1;
    cv::Mat m(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), type);
    std::memcpy(m.data, hwc.data_ptr<uint8_t>(), hwc.numel());
    return m;
}

Sample load_pair(const fs::path& image_path, const fs::path& mask_path,
                 int64_t resize_to, const std::string& audit_label) {
    LoaderAudit::instance().record(image_path.string(), audit_label);
    cv::Mat img = cv::imread(image_path.string(), cv::IMREAD_COLOR);
    if (img.empty()) {
        throw std::runtime_error("failed to read image: " +
                                 image_path.string());
    }
    LoaderAudit::instance().record(mask_path.string(), audit_label);
    cv::Mat mask = cv::imread(mask_path.string(), cv::IMREAD_GRAYSCALE);
    if (mask.empty()) {
        throw std::runtime_error("failed to read mask: " + mask_path.string());
    }

    auto size = cv::Size(static_cast<int>(resize_to),
                         static_cast<int>(resize_to));
    cv::resize(img, img, size, 0, 0, cv::INTER_LINEAR);
    cv::resize(mask, mask, size, 0, 0, cv::INTER_NEAREST);
    cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
    cv::Mat binary;
    cv::threshold(mask, binary, 127, 1, cv::THRESH_BINARY);

    Sample s;
    s.image_u8 = mat_to_chw_u8(img);
    s.mask_u8 = mat_to_chw_u8(binary);
    s.id = image_path.stem().string();
    return s;
}

std::vector<Sample> load_split(const fs::path& split_dir, int64_t resize_to,
                               const std::string& audit_label) {
    auto images = list_images(split_dir / "images");
    auto masks = list_images(split_dir / "masks");

    std::map<std::string, std::vector<fs::path>> mask_by_stem;
    for (const auto& m : masks) {
        mask_by_stem[strip_mask_suffix(m.stem().string())].push_back(m);
    }

    std::vector<Sample> out;
    out.reserve(images.size());
    for (const auto& img : images) {
        auto it = mask_by_stem.find(img.stem().string());
        if (it == mask_by_stem.end() || it->second.empty()) {
            throw std::runtime_error("no mask found for image: " +
                                     img.string());
        }
        if (it->second.size() > 1) {
            throw std::runtime_error("multiple masks match image: " +
                                     img.string());
        }
        out.push_back(load_pair(img, it->second.front(), resize_to,
                                audit_label));
    }
    return out;
}

void check_count(const std::string& what, int64_t expected, size_t actual) {
    if (expected >= 0 && static_cast<int64_t>(actual) != expected) {
        std::ostringstream msg;
        msg << what << " count mismatch: expected " << expected << ", found "
            << actual;
        throw std::runtime_error(msg.str());
    }
}

std::mt19937_64 rng_for(std::initializer_list<uint64_t> words) {
    std::vector<std::seed_seq::result_type> seq;
    for (auto w : words) {
        seq.push_back(static_cast<uint32_t>(w));
        seq.push_back(static_cast<uint32_t>(w >> 32));
    }
    std::seed_seq ss(seq.begin(), seq.end());
    return std::mt19937_64(ss);
}

// Stream tags keeping the shuffle, split, and augmentation draws independent.
constexpr uint64_t kTagEpochOrder = 0x6f72646572;
constexpr uint64_t kTagValSplit = 0x73706c6974;
constexpr uint64_t kTagAugment = 0x6175676d74;
constexpr uint64_t kTagFixture = 0x66697874;

}  // namespace

std::string dataset_name_string(DatasetName name) {
    switch (name) {
        case DatasetName::BUS: return "BUS";
        case DatasetName::BUSI: return "BUSI";
        case DatasetName::KvasirInstrument: return "Kvasir-Instrument";
        case DatasetName::HAM10000: return "HAM10000";
        case DatasetName::Fixture: return "fixture";
    }
    throw std::invalid_argument("unknown dataset name");
}

DatasetName dataset_name_from_string(const std::string& s) {
    if (s == "BUS" || s == "bus") return DatasetName::BUS;
    if (s == "BUSI" || s == "busi") return DatasetName::BUSI;
    if (s == "Kvasir-Instrument" || s == "kvasir" || s == "kvasir-instrument")
        return DatasetName::KvasirInstrument;
    if (s == "HAM10000" || s == "ham10000") return DatasetName::HAM10000;
    if (s == "fixture") return DatasetName::Fixture;
    throw std::invalid_argument("unknown dataset name: " + s);
}

DatasetSpec DatasetSpec::bus(std::string root) {
    return {DatasetName::BUS, std::move(root), 132, 31, 224};
}
DatasetSpec DatasetSpec::busi(std::string root) {
    return {DatasetName::BUSI, std::move(root), 517, 130, 224};
}
DatasetSpec DatasetSpec::kvasir_instrument(std::string root) {
    return {DatasetName::KvasirInstrument, std::move(root), 472, 118, 224};
}
DatasetSpec DatasetSpec::ham10000(std::string root) {
    return {DatasetName::HAM10000, std::move(root), 8015, 2000, 224};
}
DatasetSpec DatasetSpec::fixture(std::string root, int64_t resize_to) {
    return {DatasetName::Fixture, std::move(root), -1, -1, resize_to};
}

LoaderAudit& LoaderAudit::instance() {
    static LoaderAudit audit;
    return audit;
}

void LoaderAudit::record(const std::string& path, const std::string& label) {
    std::lock_guard<std::mutex> lock(mu_);
    events_.push_back({next_seq_++, path, label});
}

int64_t LoaderAudit::mark(const std::string& label) {
    std::lock_guard<std::mutex> lock(mu_);
    int64_t seq = next_seq_++;
    events_.push_back({seq, "", label});
    return seq;
}

std::vector<LoaderAudit::Event> LoaderAudit::events() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_;
}

void LoaderAudit::clear() {
    std::lock_guard<std::mutex> lock(mu_);
    events_.clear();
    next_seq_ = 0;
}

bool LoaderAudit::all_opens_after(const std::string& root_prefix,
                                 int64_t after_seq) const {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& e : events_) {
        if (!e.path.empty() && e.path.rfind(root_prefix, 0) == 0 &&
            e.seq <= after_seq) {
            return false;
        }
    }
    return true;
}

LoadedDataset load_dataset(const DatasetSpec& spec,
                           const std::string& audit_label) {
    LoadedDataset ds;
    ds.spec = spec;
    fs::path root(spec.root);
    ds.train = load_split(root / "train", spec.resize_to, audit_label);
    ds.test = load_split(root / "test", spec.resize_to, audit_label);

    auto name = dataset_name_string(spec.name);
    check_count(name + " train", spec.expected_train, ds.train.size());
    check_count(name + " test", spec.expected_test, ds.test.size());

    std::set<std::string> train_ids, test_ids;
    for (const auto& s : ds.train) train_ids.insert(s.id);
    for (const auto& s : ds.test) test_ids.insert(s.id);
    for (const auto& id : test_ids) {
        if (train_ids.count(id)) {
            throw std::runtime_error("sample appears in both splits: " + id);
        }
    }
    return ds;
}

std::pair<std::vector<Sample>, std::vector<Sample>> make_validation_split(
    const std::vector<Sample>& train, double fraction, uint64_t seed) {
    check(fraction > 0.0 && fraction < 1.0,
          "validation fraction must lie in (0,1)");
    auto n = static_cast<int64_t>(train.size());
    auto n_val = static_cast<int64_t>(
        std::floor(static_cast<double>(n) * fraction));
    check(n_val >= 1 && n - n_val >= 1,
          "validation fraction yields an empty split");

    std::vector<int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = rng_for({seed, kTagValSplit});
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<int64_t> val_idx(idx.begin(), idx.begin() + n_val);
    std::vector<int64_t> train_idx(idx.begin() + n_val, idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (auto i : train_idx) out.first.push_back(train[i]);
    for (auto i : val_idx) out.second.push_back(train[i]);
    return out;
}

AugmentationPolicy AugmentationPolicy::identity() {
    AugmentationPolicy p;
    p.flip_horizontal_prob = 0.0;
    p.flip_vertical_prob = 0.0;
    p.rotation_degrees = 0.0;
    p.hue_jitter = 0.0;
    p.saturation_jitter = 0.0;
    p.value_jitter = 0.0;
    return p;
}

Sample augment(const Sample& sample, const AugmentationPolicy& policy,
               uint64_t seed, int64_t epoch, int64_t index) {
    auto rng = rng_for({seed, kTagAugment, static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(index)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Draw every parameter unconditionally so the stream layout does not
    // depend on the policy.
    double u_fliph = unit(rng);
    double u_flipv = unit(rng);
    double angle = (unit(rng) * 2.0 - 1.0) * policy.rotation_degrees;
    double dh = (unit(rng) * 2.0 - 1.0) * policy.hue_jitter;
    double ks = 1.0 + (unit(rng) * 2.0 - 1.0) * policy.saturation_jitter;
    double kv = 1.0 + (unit(rng) * 2.0 - 1.0) * policy.value_jitter;

    cv::Mat img = chw_u8_to_mat(sample.image_u8);
    cv::Mat mask = chw_u8_to_mat(sample.mask_u8);

    if (u_fliph < policy.flip_horizontal_prob) {
        cv::flip(img, img, 1);
        cv::flip(mask, mask, 1);
    }
    if (u_flipv < policy.flip_vertical_prob) {
        cv::flip(img, img, 0);
        cv::flip(mask, mask, 0);
    }
    if (policy.rotation_degrees > 0.0 && angle != 0.0) {
        cv::Point2f center((img.cols - 1) / 2.0f, (img.rows - 1) / 2.0f);
        cv::Mat rot = cv::getRotationMatrix2D(center, angle, 1.0);
        cv::warpAffine(img, img, rot, img.size(), cv::INTER_LINEAR,
                       cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
        cv::warpAffine(mask, mask, rot, mask.size(), cv::INTER_NEAREST,
                       cv::BORDER_CONSTANT, cv::Scalar(0));
    }

    if (policy.hue_jitter > 0.0 || policy.saturation_jitter > 0.0 ||
        policy.value_jitter > 0.0) {
        cv::Mat f;
        img.convertTo(f, CV_32FC3, 1.0 / 255.0);
        cv::cvtColor(f, f, cv::COLOR_RGB2HSV);  // H in [0,360)
        std::vector<cv::Mat> ch;
        cv::split(f, ch);
        ch[0] += static_cast<float>(dh * 360.0);
        ch[0].forEach<float>([](float& h, const int*) {
            h = std::fmod(h + 360.0f, 360.0f);
        });
        ch[1] = cv::min(cv::max(ch[1] * ks, 0.0), 1.0);
        ch[2] = cv::min(cv::max(ch[2] * kv, 0.0), 1.0);
        cv::merge(ch, f);
        cv::cvtColor(f, f, cv::COLOR_HSV2RGB);
        f = cv::min(cv::max(f, 0.0), 1.0);
        f.convertTo(img, CV_8UC3, 255.0);
    }

    // Nearest-neighbor geometry keeps values in {0,1}; threshold anyway to
    // hold the binary invariant.
    cv::threshold(mask, mask, 0, 1, cv::THRESH_BINARY);

    Sample out;
    out.image_u8 = mat_to_chw_u8(img);
    out.mask_u8 = mat_to_chw_u8(mask);
    out.id = sample.id;
    return out;
}

Image to_image_batch(const std::vector<Sample>& samples,
                     const std::vector<int64_t>& indices) {
    check(!indices.empty(), "empty batch");
    std::vector<torch::Tensor> imgs;
    imgs.reserve(indices.size());
    for (auto i : indices) {
        check(i >= 0 && i < static_cast<int64_t>(samples.size()),
              "batch index out of range");
        imgs.push_back(samples[i].image_u8);
    }
    auto x = torch::stack(imgs).to(torch::kFloat32) / 255.0;
    return Image::from_signed(x * 2.0 - 1.0);
}

Mask to_mask_batch(const std::vector<Sample>& samples,
                   const std::vector<int64_t>& indices) {
    check(!indices.empty(), "empty batch");
    std::vector<torch::Tensor> masks;
    masks.reserve(indices.size());
    for (auto i : indices) {
        check(i >= 0 && i < static_cast<int64_t>(samples.size()),
              "batch index out of range");
        masks.push_back(samples[i].mask_u8);
    }
    return Mask::from_binary(torch::stack(masks).to(torch::kFloat32));
}

std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int64_t epoch) {
    std::vector<int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = rng_for({seed, kTagEpochOrder, static_cast<uint64_t>(epoch)});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

DatasetSpec make_fixture_dataset(const std::string& dir, int64_t n_train,
                                 int64_t n_test, uint64_t seed,
                                 int64_t image_size) {
    auto write_split = [&](const std::string& split, int64_t count,
                           uint64_t split_tag) {
        fs::path images = fs::path(dir) / split / "images";
        fs::path masks = fs::path(dir) / split / "masks";
        fs::create_directories(images);
        fs::create_directories(masks);
        int s = static_cast<int>(image_size);

        for (int64_t i = 0; i < count; ++i) {
            auto rng = rng_for({seed, kTagFixture, split_tag,
                                static_cast<uint64_t>(i)});
            std::uniform_int_distribution<int> bg(40, 90);
            std::uniform_int_distribution<int> fg(150, 220);
            std::uniform_real_distribution<double> unit(0.0, 1.0);

            cv::Mat img(s, s, CV_8UC3);
            for (int r = 0; r < s; ++r) {
                for (int c = 0; c < s; ++c) {
                    auto& px = img.at<cv::Vec3b>(r, c);
                    px[0] = static_cast<uint8_t>(bg(rng));
                    px[1] = static_cast<uint8_t>(bg(rng));
                    px[2] = static_cast<uint8_t>(bg(rng));
                }
            }

            cv::Point center(
                static_cast<int>(s * (0.3 + 0.4 * unit(rng))),
                static_cast<int>(s * (0.3 + 0.4 * unit(rng))));
            cv::Size axes(static_cast<int>(s * (0.12 + 0.15 * unit(rng))),
                          static_cast<int>(s * (0.12 + 0.15 * unit(rng))));
            double tilt = unit(rng) * 180.0;
            cv::Scalar color(fg(rng), fg(rng), fg(rng));

            cv::Mat mask = cv::Mat::zeros(s, s, CV_8UC1);
            cv::ellipse(mask, center, axes, tilt, 0, 360, cv::Scalar(255),
                        cv::FILLED);
            cv::Mat fg_layer(s, s, CV_8UC3, color);
            fg_layer.copyTo(img, mask);

            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04d", split.c_str(),
                          (int)i);
            cv::Mat bgr;
            cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
            cv::imwrite((images / (std::string(name) + ".png")).string(),
                        bgr);
            cv::imwrite((masks / (std::string(name) + "_mask.png")).string(),
                        mask);
        }
    };

    write_split("train", n_train, 1);
    write_split("test", n_test, 2);

    DatasetSpec spec = DatasetSpec::fixture(dir, image_size);
    spec.expected_train = n_train;
    spec.expected_test = n_test;
    return spec;
}

}  // namespace wavegms::data
