#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "dfrnet/global_branch.hpp"
#include "dfrnet/local_branch.hpp"
#include "dfrnet/model_config.hpp"
#include "dfrnet/pig.hpp"

namespace dfrnet {

struct DfrOutput {
  torch::Tensor j;            // clamp(alpha * J_GB + (1 - alpha) * J_LB, 0, 1)
  torch::Tensor j_preclamp;
  torch::Tensor proposal;
  GbOutput gb;
  LbOutput lb;
};

class DfrNetImpl : public torch::nn::Module {
 public:
  explicit DfrNetImpl(const ModelConfig& config);

  DfrOutput forward(const torch::Tensor& hazy);

  /// Fuses two pseudo results with the current alpha (before clamping).
  torch::Tensor fuse(const torch::Tensor& j_gb, const torch::Tensor& j_lb);

  const ModelConfig& config() const { return config_; }
  torch::Tensor& alpha() { return alpha_; }
  const torch::Tensor& alpha() const { return alpha_; }
  ProposalGenerator& pig() { return pig_; }
  GlobalBranch& gb() { return gb_; }
  LocalBranch& lb() { return lb_; }

 private:
  ModelConfig config_;
  ProposalGenerator pig_{nullptr};
  GlobalBranch gb_{nullptr};
  LocalBranch lb_{nullptr};
  torch::Tensor alpha_;
};
TORCH_MODULE(DfrNet);

/// Builds the model and initializes it from `seed`.
DfrNet make_model(const ModelConfig& config, uint64_t seed);

/// Exact number of scalar parameters of the configured model.
int64_t count_parameters(const ModelConfig& config);

}  // namespace dfrnet
