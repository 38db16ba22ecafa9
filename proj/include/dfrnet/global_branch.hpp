#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/model_config.hpp"
#include "dfrnet/nn_core.hpp"

namespace dfrnet {

struct GlobalBlockState {
  torch::Tensor f_i;      // hazy-image tower feature
  torch::Tensor f_p;      // proposal tower feature
  torch::Tensor f_tilde;  // F_I scaled by W_c
  torch::Tensor f_g;      // refined global density feature
  torch::Tensor w_c;      // (N,C,1,1)
  torch::Tensor w_s;      // (N,1,H,W)
};

/// D = (F_P - F_I)^2, W_c = sigmoid(GAP(D)), W_s = sigmoid(mean_c(D)),
/// F_G = (1 - W_s) * (W_c * F_I) + F_I. With ws_uses_wc the spatial map is
/// taken from W_c * D instead of D.
GlobalBlockState gdfr(const torch::Tensor& f_i, const torch::Tensor& f_p, bool ws_uses_wc = false);

/// One tower of the global U-Net: embedding conv, 7 ResBlock stacks and the
/// resamplers between them. A Siamese GB applies the same tower to I and P.
class GbTowerImpl : public torch::nn::Module {
 public:
  explicit GbTowerImpl(const GbConfig& config);

  torch::Tensor embed(const torch::Tensor& image);
  torch::Tensor stage(int64_t s, const torch::Tensor& x);  // s is 0-based
  torch::Tensor down(int64_t s, const torch::Tensor& x);   // after encoder stage s in 0..2
  torch::Tensor up(int64_t s, const torch::Tensor& x);     // ahead of decoder stage s in 4..6

 private:
  torch::nn::Conv2d embed_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::vector<nn::Downsample> downs_;
  std::vector<nn::Upsample> ups_;
};
TORCH_MODULE(GbTower);

struct GbOutput {
  torch::Tensor j_gb;           // clamp(I + res, 0, 1)
  torch::Tensor j_gb_preclamp;  // I + res
  std::vector<torch::Tensor> f_i, f_p, f_g, w_c, w_s;  // one entry per stage
};

class GlobalBranchImpl : public torch::nn::Module {
 public:
  GlobalBranchImpl(const GbConfig& config, const AblationFlags& flags);

  /// Runs stage s (0-based) of both towers on (F_I, F_P).
  std::pair<torch::Tensor, torch::Tensor> siamese_stage(int64_t s, const torch::Tensor& f_i,
                                                        const torch::Tensor& f_p);
  GbOutput forward(const torch::Tensor& hazy, const torch::Tensor& proposal);

  bool shared() const { return tower_i_.get() == tower_p_.get(); }
  GbTower& tower_i() { return tower_i_; }
  GbTower& tower_p() { return tower_p_; }

 private:
  GbConfig config_;
  AblationFlags flags_;
  GbTower tower_i_{nullptr}, tower_p_{nullptr};
  nn::RestoreBlock restore_{nullptr};
};
TORCH_MODULE(GlobalBranch);

}  // namespace dfrnet
