#include "dfrnet/model.hpp"

#include "dfrnet/errors.hpp"

namespace dfrnet {

DfrNetImpl::DfrNetImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  pig_ = register_module("pig", ProposalGenerator(config_.pig));
  gb_ = register_module("gb", GlobalBranch(config_.gb, config_.flags));
  lb_ = register_module("lb", LocalBranch(config_.lb, config_.flags));
  alpha_ = register_parameter("alpha", torch::tensor(config_.alpha_init, torch::kFloat32));
}

torch::Tensor DfrNetImpl::fuse(const torch::Tensor& j_gb, const torch::Tensor& j_lb) {
  return alpha_ * j_gb + (1.0 - alpha_) * j_lb;
}

DfrOutput DfrNetImpl::forward(const torch::Tensor& hazy) {
  nn::expect_channels(hazy, 3, "DFR-Net");
  const auto m = ModelConfig::kSpatialMultiple;
  if (hazy.size(2) % m != 0 || hazy.size(3) % m != 0) {
    throw DimensionError("input height/width must be multiples of " + std::to_string(m) + ", got " +
                         c10::str(hazy.sizes()));
  }
  DfrOutput out;
  out.proposal = pig_(hazy);
  out.gb = gb_(hazy, out.proposal);
  out.lb = lb_(hazy, out.proposal, out.gb.f_g);
  out.j_preclamp = fuse(out.gb.j_gb, out.lb.j_lb);
  out.j = torch::clamp(out.j_preclamp, 0.0, 1.0);
  return out;
}

DfrNet make_model(const ModelConfig& config, uint64_t seed) {
  DfrNet model(config);
  nn::init_parameters(*model, seed);
  return model;
}

int64_t count_parameters(const ModelConfig& config) {
  DfrNet model(config);
  return nn::count_parameters(*model);
}

}  // namespace dfrnet
