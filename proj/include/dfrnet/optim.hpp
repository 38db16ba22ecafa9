#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace dfrnet {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Decoupled-weight-decay Adam. One step with learning rate lr:
///   p <- p - lr * wd * p
///   m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Parameters without a gradient are skipped (their moments are untouched).
class AdamW {
 public:
  using NamedParams = std::vector<std::pair<std::string, torch::Tensor>>;

  AdamW(NamedParams params, AdamWOptions options);

  void zero_grad();
  void step(double lr);

  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t steps) { step_count_ = steps; }

  const NamedParams& params() const { return params_; }
  /// First/second moment tensors, index-aligned with params().
  std::vector<torch::Tensor>& first_moments() { return m_; }
  std::vector<torch::Tensor>& second_moments() { return v_; }
  const AdamWOptions& options() const { return options_; }

 private:
  NamedParams params_;
  AdamWOptions options_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  int64_t step_count_ = 0;
};

/// Collects (name, tensor) pairs of a module in registration order.
AdamW::NamedParams named_parameters_of(const torch::nn::Module& module);

/// Cosine annealing from lr_max at iteration 0 to lr_min at total_iters.
/// Throws ParameterError when iter lies outside [0, total_iters].
double cosine_lr(int64_t iter, int64_t total_iters, double lr_max, double lr_min);

}  // namespace dfrnet
