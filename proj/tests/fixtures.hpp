#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <random>
#include <string>

#include "wavegms/core_types.hpp"

namespace fixtures {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        path = base / ("wavegms_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const {
        return (path / name).string();
    }
};

inline torch::Tensor random_signed_image(int64_t b, int64_t size,
                                         uint64_t seed) {
    torch::manual_seed(seed);
    return torch::rand({b, 3, size, size}) * 2.0 - 1.0;
}

inline torch::Tensor random_binary_mask(int64_t b, int64_t size, uint64_t seed,
                                        double fill = 0.3) {
    torch::manual_seed(seed);
    return (torch::rand({b, 1, size, size}) < fill).to(torch::kFloat32);
}

// Random 2D binary mask of independently drawn dimensions, for metric fuzzing.
inline torch::Tensor random_mask_2d(int64_t h, int64_t w, uint64_t seed,
                                    double fill) {
    torch::manual_seed(seed);
    return (torch::rand({h, w}) < fill).to(torch::kFloat32);
}

inline wavegms::Image signed_image(int64_t b, int64_t size, uint64_t seed) {
    return wavegms::Image::from_signed(random_signed_image(b, size, seed));
}

inline wavegms::Mask binary_mask(int64_t b, int64_t size, uint64_t seed,
                                 double fill = 0.3) {
    return wavegms::Mask::from_binary(random_binary_mask(b, size, seed, fill));
}

}  // namespace fixtures
