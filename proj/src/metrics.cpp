#include "wavegms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace wavegms::metrics {

namespace {

void check_binary_pair(const torch::Tensor& pred, const torch::Tensor& gt) {
    check(pred.sizes() == gt.sizes(), "metric inputs must share one shape");
    check(((pred == 0) | (pred == 1)).all().item<bool>(),
          "prediction mask must be binary");
    check(((gt == 0) | (gt == 1)).all().item<bool>(),
          "ground-truth mask must be binary");
}

// Squared Euclidean distance transform, Felzenszwalb-Huttenlocher two-pass.
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

// Squared distances to the nearest set pixel of `sites` on an h x w grid.
// Empty cells seed with a large finite value: the lower-envelope recurrence
// produces NaN on inf-inf, and any true site distance beats the sentinel.
std::vector<double> edt_2d(const std::vector<std::pair<int64_t, int64_t>>& sites,
                           int64_t h, int64_t w) {
    const double big = 1e12;
    std::vector<double> grid(h * w, big);
    for (const auto& [r, c] : sites) grid[r * w + c] = 0.0;

    std::vector<double> col(h), out_col(h);
    for (int64_t c = 0; c < w; ++c) {
        for (int64_t r = 0; r < h; ++r) col[r] = grid[r * w + c];
        edt_1d(col, out_col);
        for (int64_t r = 0; r < h; ++r) grid[r * w + c] = out_col[r];
    }
    std::vector<double> row(w), out_row(w);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) row[c] = grid[r * w + c];
        edt_1d(row, out_row);
        for (int64_t c = 0; c < w; ++c) grid[r * w + c] = out_row[c];
    }
    return grid;
}

torch::Tensor flatten_to_2d(const torch::Tensor& mask) {
    // Accepts [H,W], [1,H,W] or [1,1,H,W]; metrics are per image.
    auto m = mask;
    while (m.dim() > 2) {
        check(m.size(0) == 1, "per-image metrics expect a single mask");
        m = m.squeeze(0);
    }
    check(m.dim() == 2, "mask must reduce to [H,W]");
    return m.to(torch::kFloat64).contiguous();
}

}  // namespace

double dice(const torch::Tensor& pred, const torch::Tensor& gt) {
    check_binary_pair(pred, gt);
    const double inter = (pred * gt).sum().item<double>();
    const double total = pred.sum().item<double>() + gt.sum().item<double>();
    if (total == 0.0) return 1.0;
    return 2.0 * inter / total;
}

double iou(const torch::Tensor& pred, const torch::Tensor& gt) {
    check_binary_pair(pred, gt);
    const double inter = (pred * gt).sum().item<double>();
    const double uni =
        pred.sum().item<double>() + gt.sum().item<double>() - inter;
    if (uni == 0.0) return 1.0;
    return inter / uni;
}

std::vector<std::pair<int64_t, int64_t>> boundary_pixels(
    const torch::Tensor& mask) {
    auto m = flatten_to_2d(mask);
    const int64_t h = m.size(0);
    const int64_t w = m.size(1);
    auto acc = m.accessor<double, 2>();
    std::vector<std::pair<int64_t, int64_t>> out;
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            if (acc[r][c] == 0.0) continue;
            const bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            if (edge || acc[r - 1][c] == 0.0 || acc[r + 1][c] == 0.0 ||
                acc[r][c - 1] == 0.0 || acc[r][c + 1] == 0.0) {
                out.emplace_back(r, c);
            }
        }
    }
    return out;
}

double percentile_linear(std::vector<double> values, double q) {
    check(!values.empty(), "percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(rank));
    const auto hi = static_cast<size_t>(std::ceil(rank));
    if (lo == hi) return values[lo];
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double hd95(const torch::Tensor& pred, const torch::Tensor& gt) {
    check_binary_pair(pred, gt);
    auto p2 = flatten_to_2d(pred);
    auto g2 = flatten_to_2d(gt);
    const int64_t h = p2.size(0);
    const int64_t w = p2.size(1);

    const auto pb = boundary_pixels(p2);
    const auto gb = boundary_pixels(g2);
    if (pb.empty() && gb.empty()) return 0.0;
    if (pb.empty() || gb.empty()) {
        return std::sqrt(static_cast<double>(h * h + w * w));
    }

    const auto dist_to_g = edt_2d(gb, h, w);
    const auto dist_to_p = edt_2d(pb, h, w);

    std::vector<double> pooled;
    pooled.reserve(pb.size() + gb.size());
    for (const auto& [r, c] : pb) pooled.push_back(std::sqrt(dist_to_g[r * w + c]));
    for (const auto& [r, c] : gb) pooled.push_back(std::sqrt(dist_to_p[r * w + c]));
    return percentile_linear(std::move(pooled), 95.0);
}

double dice(const Mask& pred, const Mask& gt) { return dice(pred.data, gt.data); }
double iou(const Mask& pred, const Mask& gt) { return iou(pred.data, gt.data); }
double hd95(const Mask& pred, const Mask& gt) { return hd95(pred.data, gt.data); }

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : per_image) {
        per.push_back({{"id", m.id},
                       {"dice", m.dice},
                       {"iou", m.iou},
                       {"hd95", m.hd95}});
    }
    return {{"dsc", dsc},
            {"iou", iou},
            {"hd95", hd95},
            {"n_images", n_images},
            {"per_image", per}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.dsc = j.at("dsc").get<double>();
    r.iou = j.at("iou").get<double>();
    r.hd95 = j.at("hd95").get<double>();
    r.n_images = j.at("n_images").get<int64_t>();
    for (const auto& m : j.value("per_image", nlohmann::json::array())) {
        r.per_image.push_back({m.at("id").get<std::string>(),
                               m.at("dice").get<double>(),
                               m.at("iou").get<double>(),
                               m.at("hd95").get<double>()});
    }
    return r;
}

MetricsReport evaluate_dataset(const std::vector<Mask>& preds,
                               const std::vector<Mask>& gts,
                               const std::vector<std::string>& ids) {
    check(preds.size() == gts.size(),
          "evaluate_dataset: prediction/ground-truth length mismatch (" +
              std::to_string(preds.size()) + " vs " + std::to_string(gts.size()) +
              ")");
    check(!preds.empty(), "evaluate_dataset: empty sequence");
    check(ids.empty() || ids.size() == preds.size(),
          "evaluate_dataset: ids length mismatch");

    MetricsReport report;
    double dsum = 0.0, isum = 0.0, hsum = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        PerImageMetrics m;
        m.id = ids.empty() ? std::to_string(i) : ids[i];
        m.dice = dice(preds[i], gts[i]);
        m.iou = iou(preds[i], gts[i]);
        m.hd95 = hd95(preds[i], gts[i]);
        dsum += m.dice;
        isum += m.iou;
        hsum += m.hd95;
        report.per_image.push_back(std::move(m));
    }
    const auto n = static_cast<double>(preds.size());
    report.n_images = static_cast<int64_t>(preds.size());
    report.dsc = 100.0 * dsum / n;
    report.iou = 100.0 * isum / n;
    report.hd95 = hsum / n;
    return report;
}

void write_per_image_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    out << "id,dice,iou,hd95\n";
    char line[256];
    for (const auto& m : report.per_image) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f\n", m.id.c_str(),
                      m.dice, m.iou, m.hd95);
        out << line;
    }
}

void write_aggregate_json(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write json: " + path);
    out << report.to_json().dump(2) << "\n";
}

}  // namespace wavegms::metrics
