#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

namespace dfrnet::nn {

/// Shape of one FFA-style ResBlock.
struct BlockSpec {
  int64_t channels = 32;
  int64_t kernel_size = 3;
  int64_t reduction = 8;
};

/// Hidden width of the attention MLPs: max(1, channels / reduction).
int64_t attention_width(int64_t channels, int64_t reduction);

/// Same-padded convolution with bias.
torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel,
                            torch::nn::detail::conv_padding_mode_t mode = torch::kZeros);

// GAP -> 1x1 -> ReLU -> 1x1 -> sigmoid, multiplied back channel-wise.
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  ChannelAttentionImpl(int64_t channels, int64_t reduction);
  torch::Tensor weights(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d squeeze_{nullptr}, excite_{nullptr};
};
TORCH_MODULE(ChannelAttention);

// 1x1 -> ReLU -> 1x1 (to one map) -> sigmoid, multiplied back pixel-wise.
class PixelAttentionImpl : public torch::nn::Module {
 public:
  PixelAttentionImpl(int64_t channels, int64_t reduction);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d squeeze_{nullptr}, project_{nullptr};
};
TORCH_MODULE(PixelAttention);

/// FFA-Net basic block:
///   r = relu(conv1(x)) + x;  r = PA(CA(conv2(r)));  y = r + x
/// With every weight and bias zero the block is the identity.
class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(const BlockSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);
  const BlockSpec& spec() const { return spec_; }

 private:
  BlockSpec spec_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  ChannelAttention ca_{nullptr};
  PixelAttention pa_{nullptr};
};
TORCH_MODULE(ResBlock);

/// `count` ResBlocks of the given width applied in sequence (count may be 0).
torch::nn::Sequential make_res_stack(int64_t channels, int64_t count);

/// Space-to-depth by 2. Output channel c*4 + (2*dy + dx) holds input channel
/// c at offset (dy, dx) of each 2x2 cell (row-major within the cell).
/// Checkpoints depend on this ordering.
torch::Tensor pixel_unshuffle2(const torch::Tensor& x);
/// Inverse of pixel_unshuffle2.
torch::Tensor pixel_shuffle2(const torch::Tensor& x);

/// pixel-unshuffle(2) then 1x1 conv 4C -> out. Requires even H and W.
class DownsampleImpl : public torch::nn::Module {
 public:
  DownsampleImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int64_t in_channels_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Downsample);

/// 1x1 conv C -> 4*out then pixel-shuffle(2).
class UpsampleImpl : public torch::nn::Module {
 public:
  UpsampleImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d& conv() { return conv_; }

 private:
  int64_t in_channels_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Upsample);

/// Parallel 3x3 / 5x5 / 7x7 convolutions from RGB, each to `out_channels`,
/// concatenated and fused by a 1x1 conv back to `out_channels`.
class MultiScaleEmbedImpl : public torch::nn::Module {
 public:
  explicit MultiScaleEmbedImpl(int64_t out_channels,
                               torch::nn::detail::conv_padding_mode_t mode = torch::kZeros);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d k3_{nullptr}, k5_{nullptr}, k7_{nullptr}, fuse_{nullptr};
};
TORCH_MODULE(MultiScaleEmbed);

/// n_res ResBlocks followed by a 3x3 conv to 3 channels. The output is an
/// unclamped residual image.
class RestoreBlockImpl : public torch::nn::Module {
 public:
  RestoreBlockImpl(int64_t channels, int64_t n_res);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int64_t channels_;
  torch::nn::Sequential blocks_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(RestoreBlock);

/// Weights (dim >= 2): truncated normal (+-2 sigma), sigma = 1/sqrt(fan_in).
/// Biases: zero. Scalars (e.g. the fusion alpha) are left untouched.
/// Parameters are visited in registration order, so the result is a pure
/// function of (module layout, seed).
void init_parameters(torch::nn::Module& module, uint64_t seed);

/// Sets every parameter of `module` to zero.
void zero_parameters(torch::nn::Module& module);

int64_t count_parameters(const torch::nn::Module& module);

/// Throws DimensionError unless x is (N, channels, H, W).
void expect_channels(const torch::Tensor& x, int64_t channels, const char* where);

}  // namespace dfrnet::nn
