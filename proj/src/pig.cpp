#include "dfrnet/pig.hpp"

#include "dfrnet/batch.hpp"
#include "dfrnet/errors.hpp"
#include "dfrnet/optim.hpp"

namespace dfrnet {

ProposalGeneratorImpl::ProposalGeneratorImpl(const PigConfig& config) : config_(config) {
  config_.validate();
  const auto& w = config_.widths;
  const auto n = static_cast<int64_t>(w.size());
  levels_ = n / 2;
  embed_ = register_module("embed", nn::make_conv(3, w.front(), 3));
  for (int64_t s = 0; s < n; ++s) {
    stages_.push_back(register_module("stage" + std::to_string(s + 1),
                                      nn::make_res_stack(w[s], config_.blocks_per_stage)));
    if (s < levels_) {
      downs_.push_back(register_module("down" + std::to_string(s + 1), nn::Downsample(w[s], w[s + 1])));
    } else if (s + 1 < n) {
      ups_.push_back(register_module("up" + std::to_string(s + 1), nn::Upsample(w[s], w[s + 1])));
    }
  }
  out_ = register_module("out", nn::make_conv(w.back(), 3, 3));
}

torch::Tensor ProposalGeneratorImpl::residual(const torch::Tensor& hazy) {
  nn::expect_channels(hazy, 3, "PIG");
  if (hazy.size(2) % spatial_multiple() != 0 || hazy.size(3) % spatial_multiple() != 0) {
    throw DimensionError("PIG input height/width must be multiples of " + std::to_string(spatial_multiple()));
  }
  const auto n = static_cast<int64_t>(stages_.size());
  std::vector<torch::Tensor> skips;
  auto x = embed_(hazy);
  for (int64_t s = 0; s < n; ++s) {
    if (s > levels_) x = ups_[static_cast<size_t>(s - levels_ - 1)](x) + skips[static_cast<size_t>(n - 1 - s)];
    if (!stages_[s]->is_empty()) x = stages_[s]->forward(x);
    if (s < levels_) {
      skips.push_back(x);
      x = downs_[static_cast<size_t>(s)](x);
    }
  }
  return out_(x);
}

torch::Tensor ProposalGeneratorImpl::forward(const torch::Tensor& hazy) {
  return torch::clamp(hazy + residual(hazy), 0.0, 1.0);
}

PigPretrainResult pretrain_pig(ProposalGenerator& pig, const std::vector<haze::ImagePair>& pairs,
                               const PigPretrainOptions& options) {
  if (pairs.empty()) throw DataError("PIG pretraining needs at least one image pair");
  if (options.steps < 0) throw ParameterError("steps must be >= 0");
  PigPretrainResult result;
  if (options.steps == 0) return result;

  AdamW optimizer(named_parameters_of(*pig), AdamWOptions{0.9, 0.999, 1e-8, options.weight_decay});
  const auto dtype = pig->parameters().front().scalar_type();
  pig->train();
  for (int64_t step = 0; step < options.steps; ++step) {
    auto batch = sample_batch(pairs, options.batch_size, options.patch, options.seed, step);
    auto hazy = batch.hazy.to(dtype);
    auto clear = batch.clear.to(dtype);
    optimizer.zero_grad();
    auto loss = torch::l1_loss(pig->forward(hazy), clear);
    loss.backward();
    optimizer.step(options.lr);
    result.losses.push_back(loss.item<double>());
  }
  return result;
}

PigPretrainResult pretrain_pig(ProposalGenerator& pig, const haze::DatasetManifest& manifest,
                               const PigPretrainOptions& options) {
  if (manifest.empty()) throw DataError("PIG pretraining needs a non-empty manifest");
  return pretrain_pig(pig, haze::load_pairs(manifest), options);
}

}  // namespace dfrnet
