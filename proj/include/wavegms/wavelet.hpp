#pragma once

#include <torch/torch.h>

#include "wavegms/core_types.hpp"

namespace wavegms::wavelet {

// Orthonormal 2D Haar analysis. Filter taps are +-1/sqrt(2) per dimension, so
// on a 2x2 patch [[a,b],[c,d]] (rows x columns):
//
//   LL = (a+b+c+d)/2
//   LH = (a-b+c-d)/2
//   HL = (a+b-c-d)/2
//   HH = (a-b-c+d)/2
//
// Naming convention, frozen for checkpoint portability: the first letter is
// the filter along rows (height), the second along columns (width). A constant
// input c therefore gives LL = 2c and zero detail bands, and the transform
// preserves energy exactly.
struct HaarLevel {
    torch::Tensor ll, lh, hl, hh;
    int level_index = 1;
};

// Single analysis level of a [B,C,H,W] tensor with even H and W. No padding:
// odd spatial sizes are rejected.
HaarLevel dwt2_haar(const torch::Tensor& x, int level_index = 1);

// Exact inverse of dwt2_haar; subbands must share one shape.
torch::Tensor idwt2_haar(const HaarLevel& level);

// [LL|LH|HL|HH] stacked along channels -> [B,4C,h,w].
torch::Tensor pack_level(const HaarLevel& level);
HaarLevel unpack_level(const torch::Tensor& stack, int level_index = 1);

// Three recursive analysis levels of the LL band, each packed as a 12-channel
// stack. Level l has spatial size H/2^l x W/2^l.
MultiResDecomposition multires_decompose(const Image& img);

// Cascaded inverse from the deepest LL and the stored detail bands; test
// oracle for the decomposition.
torch::Tensor multires_reconstruct(const MultiResDecomposition& decomposition);

}  // namespace wavegms::wavelet
