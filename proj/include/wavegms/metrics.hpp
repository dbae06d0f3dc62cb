#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include <string>
#include <vector>

#include "wavegms/core_types.hpp"

namespace wavegms::metrics {

// Dice coefficient 2|P^G| / (|P|+|G|) over a binary mask pair of equal shape.
// Both masks empty -> 1.0.
double dice(const torch::Tensor& pred, const torch::Tensor& gt);
double dice(const Mask& pred, const Mask& gt);

// Intersection over union |P^G| / |PvG|; both empty -> 1.0.
double iou(const torch::Tensor& pred, const torch::Tensor& gt);
double iou(const Mask& pred, const Mask& gt);

// 95th percentile (linear interpolation between order statistics) of the
// pooled boundary-to-boundary nearest Euclidean distances, both directions.
// A foreground pixel is boundary if any 4-neighbor is background or it touches
// the image edge. Sentinels: both masks empty -> 0; exactly one empty -> image
// diagonal sqrt(H^2+W^2).
double hd95(const torch::Tensor& pred, const torch::Tensor& gt);
double hd95(const Mask& pred, const Mask& gt);

struct PerImageMetrics {
    std::string id;
    double dice = 0.0;
    double iou = 0.0;
    double hd95 = 0.0;
};

// Arithmetic per-image averages; dsc/iou stored as percentages.
struct MetricsReport {
    double dsc = 0.0;   // percent
    double iou = 0.0;   // percent
    double hd95 = 0.0;  // pixels
    int64_t n_images = 0;
    std::vector<PerImageMetrics> per_image;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

MetricsReport evaluate_dataset(const std::vector<Mask>& preds,
                               const std::vector<Mask>& gts,
                               const std::vector<std::string>& ids = {});

// Percentages formatted to 2 decimals, one row per image.
void write_per_image_csv(const MetricsReport& report, const std::string& path);
void write_aggregate_json(const MetricsReport& report, const std::string& path);

// Extraction helpers shared with the HD95 implementation and its tests.
std::vector<std::pair<int64_t, int64_t>> boundary_pixels(
    const torch::Tensor& mask);
double percentile_linear(std::vector<double> values, double q);

}  // namespace wavegms::metrics
