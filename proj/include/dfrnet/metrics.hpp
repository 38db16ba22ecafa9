#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/haze_synth.hpp"
#include "dfrnet/model.hpp"

namespace dfrnet::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for images in [0,1]; kPsnrCap when MSE = 0.
double psnr(const torch::Tensor& x, const torch::Tensor& y);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1, averaged over valid window positions, per channel, then
/// over channels. Accepts (C,H,W) or (1,C,H,W); H and W must be >= 11.
double ssim(const torch::Tensor& x, const torch::Tensor& y);

struct EvalResult {
  std::vector<std::string> ids;
  std::vector<double> psnr, ssim;
  std::vector<double> baseline_psnr, baseline_ssim;  // hazy input vs clear
  double mean_psnr = 0, mean_ssim = 0;
  double mean_baseline_psnr = 0, mean_baseline_ssim = 0;
};

/// Maps a (1,3,H,W) hazy batch to a (1,3,H,W) estimate of the clear image.
using Dehazer = std::function<torch::Tensor(const torch::Tensor&)>;

/// Runs `dehaze` on every pair (center-cropped to multiples of 8) and scores
/// the result against the clear image.
EvalResult evaluate(const Dehazer& dehaze, const std::vector<haze::ImagePair>& pairs);
/// Evaluates the fused output of `model` without gradients.
EvalResult evaluate(DfrNet& model, const std::vector<haze::ImagePair>& pairs);
EvalResult evaluate(DfrNet& model, const haze::DatasetManifest& manifest);

/// CSV with one row per image plus a final "mean" row.
std::string results_csv(const EvalResult& r);
std::string results_summary(const EvalResult& r);

}  // namespace dfrnet::metrics
