#include "dfrnet/local_branch.hpp"

#include <algorithm>

#include "dfrnet/errors.hpp"

namespace dfrnet {
namespace {

torch::Tensor leaky(const torch::Tensor& x, double slope) { return torch::leaky_relu(x, slope); }

void expect_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* where) {
  if (a.dim() != 4 || b.dim() != 4 || a.size(0) != b.size(0) || a.size(2) != b.size(2) || a.size(3) != b.size(3)) {
    throw DimensionError(std::string(where) + ": resolution mismatch " + c10::str(a.sizes()) + " vs " +
                         c10::str(b.sizes()));
  }
}

}  // namespace

LbEmbedImpl::LbEmbedImpl(int64_t image_channels, int64_t local_channels) {
  image_ = register_module("image", nn::make_conv(3, image_channels, 3));
  local_ = register_module("local", nn::MultiScaleEmbed(local_channels));
}

std::pair<torch::Tensor, torch::Tensor> LbEmbedImpl::forward(const torch::Tensor& hazy, const torch::Tensor& residual) {
  if (hazy.sizes() != residual.sizes()) {
    throw DimensionError("LB embed: image " + c10::str(hazy.sizes()) + " vs residual " + c10::str(residual.sizes()));
  }
  nn::expect_channels(hazy, 3, "LB embed");
  return {image_(hazy), local_(residual)};
}

SplitMergeImpl::SplitMergeImpl(int64_t width, int64_t next_width, int64_t local_channels)
    : width_(width), local_channels_(local_channels) {
  image_ = register_module("image", nn::Downsample(2 * width, next_width));
  local_ = register_module("local", nn::make_conv(4 * local_channels, local_channels, 1));
}

torch::Tensor SplitMergeImpl::forward(const torch::Tensor& x, const torch::Tensor& f_g) {
  nn::expect_channels(x, width_ + local_channels_, "S&M input");
  nn::expect_channels(f_g, width_, "S&M global feature");
  expect_spatial(x, f_g, "S&M");
  auto img = x.narrow(1, 0, width_);
  auto loc = x.narrow(1, width_, local_channels_);
  auto img_next = image_(torch::cat({img, f_g}, 1));
  auto loc_next = local_(nn::pixel_unshuffle2(loc));
  return torch::cat({img_next, loc_next}, 1);
}

CsdaImpl::CsdaImpl(int64_t channels, int64_t body_depth, double leaky_slope) : slope_(leaky_slope) {
  for (int64_t i = 0; i < body_depth; ++i) {
    body_.push_back(register_module("body" + std::to_string(i + 1), nn::make_conv(channels, channels, 3)));
  }
  ca_ = register_module("ca", nn::ChannelAttention(channels, 8));
}

torch::Tensor CsdaImpl::modulate(const torch::Tensor& x, const torch::Tensor& m_local) {
  if (m_local.dim() != 4 || m_local.size(1) != 1) throw DimensionError("M_local must be (N,1,H,W)");
  expect_spatial(x, m_local, "CSDA");
  return x * (1.0 - m_local) + x;
}

torch::Tensor CsdaImpl::forward(const torch::Tensor& x, const torch::Tensor& m_local) {
  auto b = x;
  for (auto& conv : body_) b = leaky(conv(b), slope_);
  return modulate(ca_(b), m_local);
}

DaffImpl::DaffImpl(int64_t width, int64_t local_channels, int64_t guide_depth, int64_t body_depth,
                   double leaky_slope, bool use_daff)
    : width_(width), local_channels_(local_channels), slope_(leaky_slope), use_daff_(use_daff) {
  const auto cat_width = width + local_channels;
  if (!use_daff_) {
    compress_ = register_module("compress", nn::make_conv(2 * cat_width + width, cat_width, 1));
    return;
  }
  for (int64_t i = 0; i < guide_depth; ++i) {
    guide_.push_back(register_module("guide" + std::to_string(i + 1), nn::make_conv(width, width, 3)));
  }
  mask_ = register_module("mask", nn::make_conv(local_channels, 1, 3));
  csda_shallow_ = register_module("csda_shallow", Csda(2 * width, body_depth, leaky_slope));
  csda_deep_ = register_module("csda_deep", Csda(2 * width, body_depth, leaky_slope));
  compress_ = register_module("compress", nn::make_conv(4 * width + local_channels, cat_width, 1));
}

DaffOutput DaffImpl::forward(const torch::Tensor& shallow, const torch::Tensor& deep, const torch::Tensor& f_g) {
  const auto cat_width = width_ + local_channels_;
  nn::expect_channels(shallow, cat_width, "DAFF shallow");
  nn::expect_channels(deep, cat_width, "DAFF deep");
  nn::expect_channels(f_g, width_, "DAFF global");
  expect_spatial(shallow, deep, "DAFF");
  expect_spatial(shallow, f_g, "DAFF");
  DaffOutput out;
  if (!use_daff_) {
    out.fused = compress_(torch::cat({shallow, deep, f_g}, 1));
    return out;
  }
  auto guide = f_g;
  for (auto& conv : guide_) guide = leaky(conv(guide), slope_);
  auto deep_loc = deep.narrow(1, width_, local_channels_);
  out.m_local = torch::sigmoid(leaky(mask_(deep_loc), slope_));
  auto y1 = csda_shallow_(torch::cat({guide, shallow.narrow(1, 0, width_)}, 1), out.m_local);
  auto y2 = csda_deep_(torch::cat({guide, deep.narrow(1, 0, width_)}, 1), out.m_local);
  out.fused = compress_(torch::cat({y1, y2, deep_loc}, 1));
  return out;
}

IdrfImpl::IdrfImpl(int64_t width, int64_t local_channels, int64_t irb_blocks) {
  irb_ = register_module("irb", nn::RestoreBlock(width, irb_blocks));
  project_ = register_module("project", nn::make_conv(3, local_channels, 3));
  merge_ = register_module("merge", nn::make_conv(2 * local_channels, local_channels, 1));
}

IdrfOutput IdrfImpl::forward(const torch::Tensor& f_img, const torch::Tensor& hazy_down) {
  nn::expect_channels(hazy_down, 3, "IDRF image");
  expect_spatial(f_img, hazy_down, "IDRF");
  IdrfOutput out;
  out.res_inter = irb_(f_img);
  out.j_inter_preclamp = hazy_down + out.res_inter;
  out.j_inter = torch::clamp(out.j_inter_preclamp, 0.0, 1.0);
  out.f_l_prime = project_(out.res_inter);
  return out;
}

torch::Tensor IdrfImpl::update_local(const torch::Tensor& f_local, const torch::Tensor& f_l_prime) {
  return merge_(torch::cat({f_local, f_l_prime}, 1));
}

torch::Tensor area_downsample(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.dim() != 4 || h < 1 || w < 1 || x.size(2) % h != 0 || x.size(3) % w != 0 ||
      x.size(2) / h != x.size(3) / w) {
    throw DimensionError("cannot area-downsample " + c10::str(x.sizes()) + " to " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  const auto k = x.size(2) / h;
  return k == 1 ? x : torch::avg_pool2d(x, k);
}

LocalBranchImpl::LocalBranchImpl(const LbConfig& config, const AblationFlags& flags)
    : config_(config), flags_(flags) {
  config_.validate();
  const auto& w = config_.widths;
  const auto cl = config_.local_channels;
  embed_ = register_module("embed", LbEmbed(w[0], cl));
  idrf_.resize(7, nullptr);
  for (int64_t s = 0; s < 7; ++s) {
    const auto n = std::to_string(s + 1);
    stages_.push_back(register_module("stage" + n, nn::make_res_stack(config_.stage_channels(s), config_.blocks[s])));
    if (s < 3) merges_.push_back(register_module("merge" + n, SplitMerge(w[s], w[s + 1], cl)));
    if (s >= 4) {
      up_deep_.push_back(register_module("up_deep" + n, nn::Upsample(config_.stage_channels(s - 1), config_.stage_channels(s))));
      up_global_.push_back(register_module("up_global" + n, nn::Upsample(w[s - 1], w[s])));
      fusers_.push_back(register_module("daff" + n, Daff(w[s], cl, config_.daff_guide_depth, config_.csda_body_depth,
                                                         config_.leaky_slope, flags_.daff)));
    }
    if (has_idrf(s + 1)) idrf_[static_cast<size_t>(s)] = register_module("idrf" + n, Idrf(w[s], cl, config_.irb_blocks));
  }
  restore_ = register_module("restore", nn::RestoreBlock(config_.stage_channels(6), config_.restore_blocks));
}

bool LocalBranchImpl::has_idrf(int64_t stage1) const {
  return flags_.idrf && std::find(config_.idrf_stages.begin(), config_.idrf_stages.end(), stage1) !=
                            config_.idrf_stages.end();
}

LbOutput LocalBranchImpl::forward(const torch::Tensor& hazy, const torch::Tensor& proposal,
                                  const std::vector<torch::Tensor>& f_g) {
  if (f_g.size() != 7) throw DimensionError("LB needs 7 global features, got " + std::to_string(f_g.size()));
  if (hazy.size(2) % 8 != 0 || hazy.size(3) % 8 != 0) {
    throw DimensionError("LB input height/width must be multiples of 8, got " + c10::str(hazy.sizes()));
  }
  const auto& w = config_.widths;
  const auto cl = config_.local_channels;
  LbOutput out;

  auto residual = flags_.dr ? proposal - hazy : torch::zeros_like(hazy);
  auto [f_img, f_loc] = embed_(hazy, residual);
  auto x = torch::cat({f_img, f_loc}, 1);
  for (int64_t s = 0; s < 7; ++s) {
    const auto su = static_cast<size_t>(s);
    if (s >= 1 && s <= 3) {
      x = merges_[su - 1](out.stage_out[su - 1], f_g[su - 1]);
    } else if (s >= 4) {
      const auto shallow = static_cast<size_t>(6 - s);
      auto deep = up_deep_[su - 4](out.stage_out[su - 1]);
      auto glob = up_global_[su - 4](f_g[su - 1]);
      auto fused = fusers_[su - 4](out.stage_out[shallow], deep, glob);
      x = fused.fused;
      out.m_local.push_back(fused.m_local);
    }
    if (!stages_[su]->is_empty()) x = stages_[su]->forward(x);
    if (idrf_[su]) {
      auto img = x.narrow(1, 0, w[su]);
      auto loc = x.narrow(1, w[su], cl);
      auto hazy_down = area_downsample(hazy, x.size(2), x.size(3));
      auto r = idrf_[su](img, hazy_down);
      x = torch::cat({img, idrf_[su]->update_local(loc, r.f_l_prime)}, 1);
      out.j_inter.push_back(r.j_inter);
      out.j_inter_preclamp.push_back(r.j_inter_preclamp);
      out.inter_stages.push_back(s + 1);
    }
    out.local_mean.push_back(x.narrow(1, w[su], cl).mean(1, /*keepdim=*/true));
    out.stage_out.push_back(x);
  }
  out.j_lb_preclamp = hazy + restore_(x);
  out.j_lb = torch::clamp(out.j_lb_preclamp, 0.0, 1.0);
  return out;
}

}  // namespace dfrnet
