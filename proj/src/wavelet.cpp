#include "wavegms/wavelet.hpp"

namespace wavegms::wavelet {

namespace {

void check_subband_shapes(const HaarLevel& level) {
    const auto shape = level.ll.sizes();
    check(level.lh.sizes() == shape && level.hl.sizes() == shape &&
              level.hh.sizes() == shape,
          "Haar subbands must share one shape");
    check(level.ll.dim() == 4, "Haar subbands must be [B,C,h,w]");
}

}  // namespace

HaarLevel dwt2_haar(const torch::Tensor& x, int level_index) {
    check(x.dim() == 4, "dwt2_haar expects [B,C,H,W]");
    const int64_t h = x.size(2);
    const int64_t w = x.size(3);
    check(h % 2 == 0 && w % 2 == 0,
          "dwt2_haar requires even spatial dimensions, got " +
              std::to_string(h) + "x" + std::to_string(w));

    auto a = x.slice(2, 0, h, 2).slice(3, 0, w, 2);
    auto b = x.slice(2, 0, h, 2).slice(3, 1, w, 2);
    auto c = x.slice(2, 1, h, 2).slice(3, 0, w, 2);
    auto d = x.slice(2, 1, h, 2).slice(3, 1, w, 2);

    HaarLevel level;
    level.ll = (a + b + c + d) * 0.5;
    level.lh = (a - b + c - d) * 0.5;
    level.hl = (a + b - c - d) * 0.5;
    level.hh = (a - b - c + d) * 0.5;
    level.level_index = level_index;
    return level;
}

torch::Tensor idwt2_haar(const HaarLevel& level) {
    check_subband_shapes(level);
    const auto& ll = level.ll;
    const auto& lh = level.lh;
    const auto& hl = level.hl;
    const auto& hh = level.hh;

    auto a = (ll + lh + hl + hh) * 0.5;
    auto b = (ll - lh + hl - hh) * 0.5;
    auto c = (ll + lh - hl - hh) * 0.5;
    auto d = (ll - lh - hl + hh) * 0.5;

    const int64_t hh2 = ll.size(2) * 2;
    const int64_t ww2 = ll.size(3) * 2;
    auto out = torch::empty({ll.size(0), ll.size(1), hh2, ww2}, ll.options());
    out.slice(2, 0, hh2, 2).slice(3, 0, ww2, 2).copy_(a);
    out.slice(2, 0, hh2, 2).slice(3, 1, ww2, 2).copy_(b);
    out.slice(2, 1, hh2, 2).slice(3, 0, ww2, 2).copy_(c);
    out.slice(2, 1, hh2, 2).slice(3, 1, ww2, 2).copy_(d);
    return out;
}

torch::Tensor pack_level(const HaarLevel& level) {
    check_subband_shapes(level);
    return torch::cat({level.ll, level.lh, level.hl, level.hh}, 1);
}

HaarLevel unpack_level(const torch::Tensor& stack, int level_index) {
    check(stack.dim() == 4 && stack.size(1) % 4 == 0,
          "packed level must be [B,4C,h,w]");
    const int64_t c = stack.size(1) / 4;
    HaarLevel level;
    level.ll = stack.slice(1, 0, c);
    level.lh = stack.slice(1, c, 2 * c);
    level.hl = stack.slice(1, 2 * c, 3 * c);
    level.hh = stack.slice(1, 3 * c, 4 * c);
    level.level_index = level_index;
    return level;
}

MultiResDecomposition multires_decompose(const Image& img) {
    check(img.height() % 8 == 0 && img.width() % 8 == 0,
          "multires_decompose requires H and W divisible by 8");
    std::vector<torch::Tensor> levels;
    torch::Tensor current = img.data;
    for (int l = 1; l <= 3; ++l) {
        HaarLevel level = dwt2_haar(current, l);
        levels.push_back(pack_level(level));
        current = level.ll;
    }
    return MultiResDecomposition::make(std::move(levels));
}

torch::Tensor multires_reconstruct(const MultiResDecomposition& decomposition) {
    check(decomposition.levels.size() == 3,
          "reconstruction expects a 3-level decomposition");
    torch::Tensor current;
    for (int l = 2; l >= 0; --l) {
        HaarLevel level = unpack_level(decomposition.levels[l], l + 1);
        if (current.defined()) level.ll = current;
        current = idwt2_haar(level);
    }
    return current;
}

}  // namespace wavegms::wavelet
