#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/haze_synth.hpp"

namespace dfrnet {

struct Batch {
  torch::Tensor hazy;   // (N,3,p,p)
  torch::Tensor clear;  // (N,3,p,p)
  std::vector<std::string> ids;
};

/// Draws `batch_size` random pairs, each randomly cropped to `patch` and
/// randomly flipped horizontally and vertically (the same crop and flips for
/// hazy and clear). The draw is a pure function of (seed, iteration).
Batch sample_batch(const std::vector<haze::ImagePair>& pairs, int64_t batch_size, int64_t patch,
                   uint64_t seed, int64_t iteration);

/// Stacks full images of every pair into one batch (evaluation order).
Batch full_batch(const std::vector<haze::ImagePair>& pairs);

/// Center-crops a (...,H,W) tensor so that H and W are multiples of `multiple`.
torch::Tensor center_crop_to_multiple(const torch::Tensor& image, int64_t multiple);

}  // namespace dfrnet
