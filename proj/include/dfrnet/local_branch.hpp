#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/model_config.hpp"
#include "dfrnet/nn_core.hpp"

namespace dfrnet {

/// Shallow embeddings: 3x3 conv of I to `image_channels`, multi-scale conv of
/// the dehazing residual to `local_channels`.
class LbEmbedImpl : public torch::nn::Module {
 public:
  LbEmbedImpl(int64_t image_channels, int64_t local_channels);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& hazy, const torch::Tensor& residual);

 private:
  torch::nn::Conv2d image_{nullptr};
  nn::MultiScaleEmbed local_{nullptr};
};
TORCH_MODULE(LbEmbed);

/// Split-and-merge between encoder stages. The input carries
/// (width + C_L) channels: image part first, local part last.
class SplitMergeImpl : public torch::nn::Module {
 public:
  SplitMergeImpl(int64_t width, int64_t next_width, int64_t local_channels);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& f_g);

 private:
  int64_t width_, local_channels_;
  nn::Downsample image_{nullptr};
  torch::nn::Conv2d local_{nullptr};
};
TORCH_MODULE(SplitMerge);

/// Channel-spatial density attention: body convs, channel attention, then
/// Y = X' * (1 - M) + X'.
class CsdaImpl : public torch::nn::Module {
 public:
  CsdaImpl(int64_t channels, int64_t body_depth, double leaky_slope);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& m_local);

  static torch::Tensor modulate(const torch::Tensor& x, const torch::Tensor& m_local);

 private:
  double slope_;
  std::vector<torch::nn::Conv2d> body_;
  nn::ChannelAttention ca_{nullptr};
};
TORCH_MODULE(Csda);

struct DaffOutput {
  torch::Tensor fused;    // (N, width + C_L, H, W)
  torch::Tensor m_local;  // (N, 1, H, W); undefined on the concat path
};

/// Density-aware feature fusion of a shallow LB feature, a deep LB feature and
/// a GB feature, all already at the decoder stage resolution. With
/// use_daff = false it is a 1x1 conv over the plain concatenation.
class DaffImpl : public torch::nn::Module {
 public:
  DaffImpl(int64_t width, int64_t local_channels, int64_t guide_depth, int64_t body_depth, double leaky_slope,
           bool use_daff = true);
  DaffOutput forward(const torch::Tensor& shallow, const torch::Tensor& deep, const torch::Tensor& f_g);

 private:
  int64_t width_, local_channels_;
  double slope_;
  bool use_daff_;
  std::vector<torch::nn::Conv2d> guide_;
  torch::nn::Conv2d mask_{nullptr}, compress_{nullptr};
  Csda csda_shallow_{nullptr}, csda_deep_{nullptr};
};
TORCH_MODULE(Daff);

struct IdrfOutput {
  torch::Tensor res_inter;
  torch::Tensor j_inter;           // clamp(I_down + res_inter, 0, 1)
  torch::Tensor j_inter_preclamp;  // I_down + res_inter
  torch::Tensor f_l_prime;         // (N, C_L, H, W)
};

/// Intermediate restore block plus the residual projection to C_L channels.
/// update_local() merges F_L' into the running local feature.
class IdrfImpl : public torch::nn::Module {
 public:
  IdrfImpl(int64_t width, int64_t local_channels, int64_t irb_blocks);
  IdrfOutput forward(const torch::Tensor& f_img, const torch::Tensor& hazy_down);
  torch::Tensor update_local(const torch::Tensor& f_local, const torch::Tensor& f_l_prime);

 private:
  nn::RestoreBlock irb_{nullptr};
  torch::nn::Conv2d project_{nullptr}, merge_{nullptr};
};
TORCH_MODULE(Idrf);

/// Area-average pooling of (N,C,H,W) to (h, w); H, W must be integer multiples.
torch::Tensor area_downsample(const torch::Tensor& x, int64_t h, int64_t w);

struct LbOutput {
  torch::Tensor j_lb;
  torch::Tensor j_lb_preclamp;
  std::vector<torch::Tensor> j_inter;           // one per IDRF placement, stage order
  std::vector<torch::Tensor> j_inter_preclamp;
  std::vector<int64_t> inter_stages;            // 1-based stage of each intermediate
  std::vector<torch::Tensor> stage_out;         // 7 stage outputs (after IDRF updates)
  std::vector<torch::Tensor> local_mean;        // 7 maps (N,1,H,W): channel mean of the local part
  std::vector<torch::Tensor> m_local;           // decoder stages 5..7 (undefined without DAFF)
};

class LocalBranchImpl : public torch::nn::Module {
 public:
  LocalBranchImpl(const LbConfig& config, const AblationFlags& flags);

  /// f_g holds the 7 GB stage features.
  LbOutput forward(const torch::Tensor& hazy, const torch::Tensor& proposal, const std::vector<torch::Tensor>& f_g);

  bool has_idrf(int64_t stage1) const;

 private:
  LbConfig config_;
  AblationFlags flags_;
  LbEmbed embed_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::vector<SplitMerge> merges_;
  std::vector<nn::Upsample> up_deep_, up_global_;
  std::vector<Daff> fusers_;
  std::vector<Idrf> idrf_;  // indexed by 0-based stage; null where absent
  nn::RestoreBlock restore_{nullptr};
};
TORCH_MODULE(LocalBranch);

}  // namespace dfrnet
