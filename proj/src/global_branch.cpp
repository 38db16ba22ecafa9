#include "dfrnet/global_branch.hpp"

#include "dfrnet/errors.hpp"

namespace dfrnet {
namespace {

void expect_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* where) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError(std::string(where) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                         c10::str(b.sizes()));
  }
}

}  // namespace

GlobalBlockState gdfr(const torch::Tensor& f_i, const torch::Tensor& f_p, bool ws_uses_wc) {
  expect_same_shape(f_i, f_p, "GDFR");
  if (f_i.dim() != 4) throw DimensionError("GDFR expects (N,C,H,W) features");
  GlobalBlockState st;
  st.f_i = f_i;
  st.f_p = f_p;
  auto d = (f_p - f_i).pow(2);
  st.w_c = torch::sigmoid(d.mean({2, 3}, /*keepdim=*/true));
  st.f_tilde = f_i * st.w_c;
  st.w_s = torch::sigmoid((ws_uses_wc ? d * st.w_c : d).mean(1, /*keepdim=*/true));
  st.f_g = (1.0 - st.w_s) * st.f_tilde + f_i;
  return st;
}

GbTowerImpl::GbTowerImpl(const GbConfig& config) {
  config.validate();
  const auto& w = config.widths;
  embed_ = register_module("embed", nn::make_conv(3, w[0], 3));
  for (int64_t s = 0; s < 7; ++s) {
    stages_.push_back(register_module("stage" + std::to_string(s + 1), nn::make_res_stack(w[s], config.blocks[s])));
  }
  for (int64_t s = 0; s < 3; ++s) {
    downs_.push_back(register_module("down" + std::to_string(s + 1), nn::Downsample(w[s], w[s + 1])));
  }
  for (int64_t s = 4; s < 7; ++s) {
    ups_.push_back(register_module("up" + std::to_string(s + 1), nn::Upsample(w[s - 1], w[s])));
  }
}

torch::Tensor GbTowerImpl::embed(const torch::Tensor& image) {
  nn::expect_channels(image, 3, "GB embed");
  return embed_(image);
}

torch::Tensor GbTowerImpl::stage(int64_t s, const torch::Tensor& x) {
  auto& st = stages_.at(static_cast<size_t>(s));
  return st->is_empty() ? x : st->forward(x);
}

torch::Tensor GbTowerImpl::down(int64_t s, const torch::Tensor& x) { return downs_.at(static_cast<size_t>(s))(x); }

torch::Tensor GbTowerImpl::up(int64_t s, const torch::Tensor& x) { return ups_.at(static_cast<size_t>(s - 4))(x); }

GlobalBranchImpl::GlobalBranchImpl(const GbConfig& config, const AblationFlags& flags)
    : config_(config), flags_(flags) {
  tower_i_ = register_module("tower_i", GbTower(config_));
  if (flags_.siamese) {
    tower_p_ = tower_i_;
  } else {
    tower_p_ = register_module("tower_p", GbTower(config_));
  }
  restore_ = register_module("restore", nn::RestoreBlock(2 * config_.widths[6], config_.restore_blocks));
}

std::pair<torch::Tensor, torch::Tensor> GlobalBranchImpl::siamese_stage(int64_t s, const torch::Tensor& f_i,
                                                                        const torch::Tensor& f_p) {
  expect_same_shape(f_i, f_p, "Siamese stage");
  return {tower_i_->stage(s, f_i), tower_p_->stage(s, f_p)};
}

GbOutput GlobalBranchImpl::forward(const torch::Tensor& hazy, const torch::Tensor& proposal) {
  expect_same_shape(hazy, proposal, "GB");
  nn::expect_channels(hazy, 3, "GB");
  if (hazy.size(2) % 8 != 0 || hazy.size(3) % 8 != 0) {
    throw DimensionError("GB input height/width must be multiples of 8, got " + c10::str(hazy.sizes()));
  }
  GbOutput out;
  auto xi = tower_i_->embed(hazy);
  auto xp = tower_p_->embed(proposal);
  std::vector<torch::Tensor> skip_i, skip_p;
  for (int64_t s = 0; s < 7; ++s) {
    if (s >= 4) {
      const auto mirror = static_cast<size_t>(6 - s);
      xi = tower_i_->up(s, xi) + skip_i[mirror];
      xp = tower_p_->up(s, xp) + skip_p[mirror];
    }
    std::tie(xi, xp) = siamese_stage(s, xi, xp);
    auto st = flags_.gdfr ? gdfr(xi, xp, config_.ws_uses_wc) : GlobalBlockState{};
    out.f_i.push_back(xi);
    out.f_p.push_back(xp);
    out.f_g.push_back(flags_.gdfr ? st.f_g : xi);
    out.w_c.push_back(st.w_c);
    out.w_s.push_back(st.w_s);
    if (s < 3) {
      skip_i.push_back(xi);
      skip_p.push_back(xp);
      xi = tower_i_->down(s, xi);
      xp = tower_p_->down(s, xp);
    }
  }
  auto res = restore_(torch::cat({out.f_p.back(), out.f_g.back()}, 1));
  out.j_gb_preclamp = hazy + res;
  out.j_gb = torch::clamp(out.j_gb_preclamp, 0.0, 1.0);
  return out;
}

}  // namespace dfrnet
