#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/haze_synth.hpp"
#include "dfrnet/model_config.hpp"
#include "dfrnet/nn_core.hpp"

namespace dfrnet {

/// Proposal Image Generator: a small residual U-Net over ResBlocks with
/// additive skips. P = clamp(I + residual(I), 0, 1).
class ProposalGeneratorImpl : public torch::nn::Module {
 public:
  explicit ProposalGeneratorImpl(const PigConfig& config);

  torch::Tensor residual(const torch::Tensor& hazy);
  torch::Tensor forward(const torch::Tensor& hazy);

  /// Input height/width must be multiples of this value.
  int64_t spatial_multiple() const { return int64_t{1} << levels_; }

 private:
  PigConfig config_;
  int64_t levels_;
  torch::nn::Conv2d embed_{nullptr}, out_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::vector<nn::Downsample> downs_;
  std::vector<nn::Upsample> ups_;
};
TORCH_MODULE(ProposalGenerator);

struct PigPretrainOptions {
  int64_t steps = 2000;
  uint64_t seed = 0;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int64_t batch_size = 4;
  int64_t patch = 32;
};

struct PigPretrainResult {
  std::vector<double> losses;  // one L1 value per step
};

/// Minimizes mean |P - J| with AdamW at a fixed learning rate. Batches are
/// drawn from (seed, step), so runs are reproducible. Throws DataError when
/// `pairs` is empty. With steps = 0 the parameters are left untouched.
PigPretrainResult pretrain_pig(ProposalGenerator& pig, const std::vector<haze::ImagePair>& pairs,
                               const PigPretrainOptions& options);
PigPretrainResult pretrain_pig(ProposalGenerator& pig, const haze::DatasetManifest& manifest,
                               const PigPretrainOptions& options);

}  // namespace dfrnet
