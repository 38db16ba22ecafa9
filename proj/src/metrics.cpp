#include "dfrnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "dfrnet/batch.hpp"
#include "dfrnet/errors.hpp"

namespace dfrnet::metrics {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

torch::Tensor as_chw_double(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kCPU, torch::kFloat64);
  if (x.dim() == 4 && x.size(0) == 1) x = x.squeeze(0);
  if (x.dim() != 3) throw DimensionError("expected a (C,H,W) image, got " + c10::str(t.sizes()));
  return x.contiguous();
}

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[static_cast<size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double psnr(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) {
    throw DimensionError("PSNR: shape mismatch " + c10::str(x.sizes()) + " vs " + c10::str(y.sizes()));
  }
  auto a = x.detach().to(torch::kFloat64);
  auto b = y.detach().to(torch::kFloat64);
  const double mse = (a - b).pow(2).mean().item<double>();
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const torch::Tensor& x_in, const torch::Tensor& y_in) {
  if (x_in.sizes() != y_in.sizes()) {
    throw DimensionError("SSIM: shape mismatch " + c10::str(x_in.sizes()) + " vs " + c10::str(y_in.sizes()));
  }
  auto x = as_chw_double(x_in);
  auto y = as_chw_double(y_in);
  const auto C = x.size(0), H = x.size(1), W = x.size(2);
  if (H < kWindow || W < kWindow) throw DimensionError("SSIM needs images of at least 11x11");
  const auto g = gaussian_window();
  const double* px = x.data_ptr<double>();
  const double* py = y.data_ptr<double>();
  double total = 0;
  for (int64_t c = 0; c < C; ++c) {
    const double* cx = px + c * H * W;
    const double* cy = py + c * H * W;
    double channel = 0;
    for (int64_t i = 0; i + kWindow <= H; ++i) {
      for (int64_t j = 0; j + kWindow <= W; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int u = 0; u < kWindow; ++u) {
          for (int v = 0; v < kWindow; ++v) {
            const double w = g[static_cast<size_t>(u)] * g[static_cast<size_t>(v)];
            const double a = cx[(i + u) * W + j + v];
            const double b = cy[(i + u) * W + j + v];
            mx += w * a;
            my += w * b;
            sxx += w * a * a;
            syy += w * b * b;
            sxy += w * a * b;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        channel += ((2 * mx * my + kC1) * (2 * cov + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      }
    }
    total += channel / static_cast<double>((H - kWindow + 1) * (W - kWindow + 1));
  }
  return total / static_cast<double>(C);
}

EvalResult evaluate(const Dehazer& dehaze, const std::vector<haze::ImagePair>& pairs) {
  if (pairs.empty()) throw DataError("nothing to evaluate");
  EvalResult r;
  for (const auto& p : pairs) {
    auto hazy = center_crop_to_multiple(p.hazy, ModelConfig::kSpatialMultiple).unsqueeze(0);
    auto clear = center_crop_to_multiple(p.clear, ModelConfig::kSpatialMultiple).unsqueeze(0);
    auto pred = dehaze(hazy);
    if (!torch::isfinite(pred).all().item<bool>()) throw NumericError("non-finite output for " + p.id);
    r.ids.push_back(p.id);
    r.psnr.push_back(psnr(pred, clear));
    r.ssim.push_back(ssim(pred, clear));
    r.baseline_psnr.push_back(psnr(hazy, clear));
    r.baseline_ssim.push_back(ssim(hazy, clear));
  }
  r.mean_psnr = mean(r.psnr);
  r.mean_ssim = mean(r.ssim);
  r.mean_baseline_psnr = mean(r.baseline_psnr);
  r.mean_baseline_ssim = mean(r.baseline_ssim);
  return r;
}

EvalResult evaluate(DfrNet& model, const std::vector<haze::ImagePair>& pairs) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  const auto dtype = model->alpha().scalar_type();
  auto result = evaluate([&](const torch::Tensor& hazy) { return model->forward(hazy.to(dtype)).j; }, pairs);
  model->train(was_training);
  return result;
}

EvalResult evaluate(DfrNet& model, const haze::DatasetManifest& manifest) {
  return evaluate(model, haze::load_pairs(manifest));
}

std::string results_csv(const EvalResult& r) {
  std::string out = "id,psnr,ssim,hazy_psnr,hazy_ssim\n";
  char buf[256];
  for (size_t i = 0; i < r.ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", r.ids[i].c_str(), r.psnr[i], r.ssim[i],
                  r.baseline_psnr[i], r.baseline_ssim[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f,%.6f,%.6f\n", r.mean_psnr, r.mean_ssim, r.mean_baseline_psnr,
                r.mean_baseline_ssim);
  return out + buf;
}

std::string results_summary(const EvalResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "images: %zu\nPSNR: %.4f dB (hazy %.4f dB)\nSSIM: %.6f (hazy %.6f)\n", r.ids.size(),
                r.mean_psnr, r.mean_baseline_psnr, r.mean_ssim, r.mean_baseline_ssim);
  return buf;
}

}  // namespace dfrnet::metrics
