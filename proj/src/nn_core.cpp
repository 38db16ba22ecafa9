#include "dfrnet/nn_core.hpp"

#include <algorithm>
#include <cmath>

#include "dfrnet/errors.hpp"

namespace dfrnet::nn {

int64_t attention_width(int64_t channels, int64_t reduction) {
  return std::max<int64_t>(1, channels / std::max<int64_t>(1, reduction));
}

torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel,
                            torch::nn::detail::conv_padding_mode_t mode) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2).bias(true).padding_mode(mode));
}

void expect_channels(const torch::Tensor& x, int64_t channels, const char* where) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw DimensionError(std::string(where) + ": expected (N," + std::to_string(channels) +
                         ",H,W), got " + c10::str(x.sizes()));
  }
}

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t reduction) {
  const auto hidden = attention_width(channels, reduction);
  squeeze_ = register_module("squeeze", make_conv(channels, hidden, 1));
  excite_ = register_module("excite", make_conv(hidden, channels, 1));
}

torch::Tensor ChannelAttentionImpl::weights(const torch::Tensor& x) {
  auto pooled = x.mean({2, 3}, /*keepdim=*/true);
  return torch::sigmoid(excite_(torch::relu(squeeze_(pooled))));
}

torch::Tensor ChannelAttentionImpl::forward(const torch::Tensor& x) { return x * weights(x); }

PixelAttentionImpl::PixelAttentionImpl(int64_t channels, int64_t reduction) {
  const auto hidden = attention_width(channels, reduction);
  squeeze_ = register_module("squeeze", make_conv(channels, hidden, 1));
  project_ = register_module("project", make_conv(hidden, 1, 1));
}

torch::Tensor PixelAttentionImpl::forward(const torch::Tensor& x) {
  return x * torch::sigmoid(project_(torch::relu(squeeze_(x))));
}

ResBlockImpl::ResBlockImpl(const BlockSpec& spec) : spec_(spec) {
  if (spec.channels < 1 || spec.kernel_size < 1 || spec.kernel_size % 2 == 0) {
    throw ParameterError("ResBlock needs channels >= 1 and an odd kernel size");
  }
  conv1_ = register_module("conv1", make_conv(spec.channels, spec.channels, spec.kernel_size));
  conv2_ = register_module("conv2", make_conv(spec.channels, spec.channels, spec.kernel_size));
  ca_ = register_module("ca", ChannelAttention(spec.channels, spec.reduction));
  pa_ = register_module("pa", PixelAttention(spec.channels, spec.reduction));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  expect_channels(x, spec_.channels, "ResBlock");
  auto r = torch::relu(conv1_(x)) + x;
  r = pa_(ca_(conv2_(r)));
  return r + x;
}

torch::nn::Sequential make_res_stack(int64_t channels, int64_t count) {
  torch::nn::Sequential stack;
  for (int64_t i = 0; i < count; ++i) stack->push_back(ResBlock(BlockSpec{channels}));
  return stack;
}

torch::Tensor pixel_unshuffle2(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(2) % 2 != 0 || x.size(3) % 2 != 0) {
    throw DimensionError("pixel-unshuffle needs (N,C,H,W) with even H and W, got " + c10::str(x.sizes()));
  }
  return torch::pixel_unshuffle(x, 2);
}

torch::Tensor pixel_shuffle2(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) % 4 != 0) {
    throw DimensionError("pixel-shuffle needs (N,4k,H,W), got " + c10::str(x.sizes()));
  }
  return torch::pixel_shuffle(x, 2);
}

DownsampleImpl::DownsampleImpl(int64_t in_channels, int64_t out_channels) : in_channels_(in_channels) {
  conv_ = register_module("conv", make_conv(4 * in_channels, out_channels, 1));
}

torch::Tensor DownsampleImpl::forward(const torch::Tensor& x) {
  expect_channels(x, in_channels_, "Downsample");
  return conv_(pixel_unshuffle2(x));
}

UpsampleImpl::UpsampleImpl(int64_t in_channels, int64_t out_channels) : in_channels_(in_channels) {
  conv_ = register_module("conv", make_conv(in_channels, 4 * out_channels, 1));
}

torch::Tensor UpsampleImpl::forward(const torch::Tensor& x) {
  expect_channels(x, in_channels_, "Upsample");
  return pixel_shuffle2(conv_(x));
}

MultiScaleEmbedImpl::MultiScaleEmbedImpl(int64_t out_channels,
                                         torch::nn::detail::conv_padding_mode_t mode) {
  k3_ = register_module("k3", make_conv(3, out_channels, 3, mode));
  k5_ = register_module("k5", make_conv(3, out_channels, 5, mode));
  k7_ = register_module("k7", make_conv(3, out_channels, 7, mode));
  fuse_ = register_module("fuse", make_conv(3 * out_channels, out_channels, 1));
}

torch::Tensor MultiScaleEmbedImpl::forward(const torch::Tensor& x) {
  expect_channels(x, 3, "MultiScaleEmbed");
  return fuse_(torch::cat({k3_(x), k5_(x), k7_(x)}, 1));
}

RestoreBlockImpl::RestoreBlockImpl(int64_t channels, int64_t n_res) : channels_(channels) {
  if (n_res < 0) throw ParameterError("restore block needs n_res >= 0");
  blocks_ = register_module("blocks", make_res_stack(channels, n_res));
  out_ = register_module("out", make_conv(channels, 3, 3));
}

torch::Tensor RestoreBlockImpl::forward(const torch::Tensor& x) {
  expect_channels(x, channels_, "RestoreBlock");
  auto y = blocks_->is_empty() ? x : blocks_->forward(x);
  return out_(y);
}

void init_parameters(torch::nn::Module& module, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  // Inverse-CDF sampling of N(0,1) truncated to [-2, 2].
  const double lo = 0.5 * std::erfc(2.0 / std::sqrt(2.0));
  const double hi = 1.0 - lo;
  for (auto& p : module.named_parameters(/*recurse=*/true)) {
    auto& t = p.value();
    if (t.dim() >= 2) {
      const auto fan_in = t.numel() / t.size(0);
      auto u = at::empty(t.sizes(), at::TensorOptions().dtype(torch::kFloat64)).uniform_(lo, hi, gen);
      auto z = at::erfinv(u * 2.0 - 1.0) * std::sqrt(2.0);
      t.copy_(z / std::sqrt(static_cast<double>(fan_in)));
    } else if (t.dim() == 1) {
      t.zero_();
    }
  }
}

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters(/*recurse=*/true)) p.zero_();
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters(/*recurse=*/true)) total += p.numel();
  return total;
}

}  // namespace dfrnet::nn
