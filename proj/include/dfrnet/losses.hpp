#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/model.hpp"
#include "dfrnet/model_config.hpp"

namespace dfrnet {

struct LossWeights {
  double perceptual = 0.2;  // lambda_1
  double rd = 0.001;        // lambda_2
  double ldr = 0.1;         // lambda_3
};

struct LossReport {
  torch::Tensor total_tensor;  // differentiable total
  double total = 0, rec = 0, perceptual = 0, rd = 0, ldr = 0;
};

/// rec + w.perceptual * perceptual + w.rd * rd + w.ldr * ldr
double combine_losses(const LossWeights& w, double rec, double perceptual, double rd, double ldr);

/// Maps an image batch to a list of feature maps.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& images) = 0;
};

/// Returns the input unchanged (one level).
class IdentityExtractor : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& images) override { return {images}; }
};

/// Frozen conv pyramid: each level is conv3x3 + ReLU, with 2x average pooling
/// ahead of every level but the first. The default is a seeded random
/// 3-level pyramid (3 -> 8 -> 16 -> 32 channels); other weights can be loaded
/// from a checkpoint archive holding "level<k>.weight" / "level<k>.bias".
class ConvPyramidExtractor : public FeatureExtractor {
 public:
  explicit ConvPyramidExtractor(uint64_t seed = 20240607, std::vector<int64_t> widths = {8, 16, 32});
  static std::unique_ptr<ConvPyramidExtractor> load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<torch::Tensor> features(const torch::Tensor& images) override;
  size_t levels() const { return weights_.size(); }

 private:
  struct Empty {};
  explicit ConvPyramidExtractor(Empty) {}
  std::vector<torch::Tensor> weights_, biases_;
};

/// Mean absolute error. Throws DimensionError on shape mismatch.
torch::Tensor l_rec(const torch::Tensor& pred, const torch::Tensor& target);

/// Sum over extractor levels of the mean squared feature difference.
torch::Tensor l_perceptual(const torch::Tensor& pred, const torch::Tensor& target, FeatureExtractor& extractor);

/// Sum over stages of the batch-averaged cosine similarity between
/// per-sample flattened features; a zero vector has cosine 0 with anything.
torch::Tensor l_rd(const std::vector<torch::Tensor>& f_p, const std::vector<torch::Tensor>& f_i);

/// (1/k) sum_j mean|J_inter_j - Down_j(J)| with area-average downsampling.
/// An empty list gives 0.
torch::Tensor l_ldr(const std::vector<torch::Tensor>& j_inter, const torch::Tensor& target);

/// Full objective on a forward result. The reconstruction terms use the
/// fused output (pre-clamp when `preclamp` is set); L_RD and L_LDR are
/// included only when their flags are on.
LossReport total_loss(const DfrOutput& out, const torch::Tensor& target, const LossWeights& weights,
                      const AblationFlags& flags, FeatureExtractor& extractor, bool preclamp = false);

}  // namespace dfrnet
