#include "dfrnet/optim.hpp"

#include <cmath>

#include "dfrnet/errors.hpp"

namespace dfrnet {

AdamW::AdamW(NamedParams params, AdamWOptions options) : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p, torch::MemoryFormat::Contiguous));
    v_.push_back(torch::zeros_like(p, torch::MemoryFormat::Contiguous));
  }
}

void AdamW::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad().defined()) {
      p.mutable_grad().detach_();
      p.mutable_grad().zero_();
    }
  }
}

void AdamW::step(double lr) {
  torch::NoGradGuard no_grad;
  ++step_count_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    const auto& g = p.grad();
    if (!g.defined()) continue;
    p.mul_(1.0 - lr * options_.weight_decay);
    m_[i].mul_(options_.beta1).add_(g, 1.0 - options_.beta1);
    v_[i].mul_(options_.beta2).addcmul_(g, g, 1.0 - options_.beta2);
    auto denom = (v_[i] / bias2).sqrt_().add_(options_.eps);
    p.addcdiv_(m_[i], denom, -lr / bias1);
  }
}

AdamW::NamedParams named_parameters_of(const torch::nn::Module& module) {
  AdamW::NamedParams out;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) out.emplace_back(item.key(), item.value());
  return out;
}

double cosine_lr(int64_t iter, int64_t total_iters, double lr_max, double lr_min) {
  if (total_iters <= 0) throw ParameterError("total_iters must be positive");
  if (iter < 0 || iter > total_iters) {
    throw ParameterError("iteration " + std::to_string(iter) + " outside [0, " + std::to_string(total_iters) + "]");
  }
  const double progress = static_cast<double>(iter) / static_cast<double>(total_iters);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * progress));
}

}  // namespace dfrnet
