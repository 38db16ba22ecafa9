#include "dfrnet/losses.hpp"

#include <cmath>

#include "dfrnet/checkpoint.hpp"
#include "dfrnet/errors.hpp"
#include "dfrnet/local_branch.hpp"

namespace dfrnet {
namespace {

void expect_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* where) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError(std::string(where) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                         c10::str(b.sizes()));
  }
}

}  // namespace

double combine_losses(const LossWeights& w, double rec, double perceptual, double rd, double ldr) {
  return rec + w.perceptual * perceptual + w.rd * rd + w.ldr * ldr;
}

ConvPyramidExtractor::ConvPyramidExtractor(uint64_t seed, std::vector<int64_t> widths) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = 3;
  for (auto out : widths) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in * 9));
    weights_.push_back(at::empty({out, in, 3, 3}, torch::kFloat32).normal_(0.0, scale, gen));
    biases_.push_back(torch::zeros({out}, torch::kFloat32));
    in = out;
  }
}

std::unique_ptr<ConvPyramidExtractor> ConvPyramidExtractor::load(const std::filesystem::path& path) {
  auto archive = read_archive(path);
  std::unique_ptr<ConvPyramidExtractor> ex(new ConvPyramidExtractor(Empty{}));
  const auto levels = archive.manifest.get_int("extractor.levels", 0);
  if (levels < 1) throw DataError(path.string() + " does not describe a feature extractor");
  for (int64_t k = 0; k < levels; ++k) {
    const auto& w = archive.get("level" + std::to_string(k) + ".weight");
    const auto& b = archive.get("level" + std::to_string(k) + ".bias");
    const int64_t expected_in = k == 0 ? 3 : ex->weights_.back().size(0);
    if (w.dim() != 4 || w.size(1) != expected_in || w.size(2) % 2 == 0 || w.size(2) != w.size(3) || b.dim() != 1 ||
        b.size(0) != w.size(0)) {
      throw DataError("extractor level " + std::to_string(k) + " has inconsistent shapes");
    }
    ex->weights_.push_back(w);
    ex->biases_.push_back(b);
  }
  return ex;
}

void ConvPyramidExtractor::save(const std::filesystem::path& path) const {
  Archive archive;
  archive.manifest.set("extractor.levels", std::to_string(weights_.size()));
  for (size_t k = 0; k < weights_.size(); ++k) {
    archive.add("level" + std::to_string(k) + ".weight", weights_[k]);
    archive.add("level" + std::to_string(k) + ".bias", biases_[k]);
  }
  write_archive(path, archive);
}

std::vector<torch::Tensor> ConvPyramidExtractor::features(const torch::Tensor& images) {
  std::vector<torch::Tensor> out;
  auto x = images;
  for (size_t k = 0; k < weights_.size(); ++k) {
    if (k > 0) x = torch::avg_pool2d(x, 2);
    auto w = weights_[k].to(images.scalar_type());
    auto b = biases_[k].to(images.scalar_type());
    x = torch::relu(torch::conv2d(x, w, b, 1, w.size(2) / 2));
    out.push_back(x);
  }
  return out;
}

torch::Tensor l_rec(const torch::Tensor& pred, const torch::Tensor& target) {
  expect_same_shape(pred, target, "L_rec");
  return (pred - target).abs().mean();
}

torch::Tensor l_perceptual(const torch::Tensor& pred, const torch::Tensor& target, FeatureExtractor& extractor) {
  expect_same_shape(pred, target, "L_P");
  auto fp = extractor.features(pred);
  auto ft = extractor.features(target);
  if (fp.size() != ft.size() || fp.empty()) throw DimensionError("L_P: extractor returned inconsistent levels");
  auto total = torch::zeros({}, pred.options());
  for (size_t k = 0; k < fp.size(); ++k) total = total + (fp[k] - ft[k]).pow(2).mean();
  return total;
}

torch::Tensor l_rd(const std::vector<torch::Tensor>& f_p, const std::vector<torch::Tensor>& f_i) {
  if (f_p.size() != f_i.size() || f_p.empty()) throw DimensionError("L_RD needs matching non-empty stage lists");
  auto total = torch::zeros({}, f_p.front().options());
  for (size_t s = 0; s < f_p.size(); ++s) {
    expect_same_shape(f_p[s], f_i[s], "L_RD");
    auto a = f_p[s].flatten(1);
    auto b = f_i[s].flatten(1);
    auto denom = a.norm(2, 1) * b.norm(2, 1);
    auto ok = denom > 0;
    auto safe = torch::where(ok, denom, torch::ones_like(denom));
    auto cos = torch::where(ok, (a * b).sum(1) / safe, torch::zeros_like(denom));
    total = total + cos.mean();
  }
  return total;
}

torch::Tensor l_ldr(const std::vector<torch::Tensor>& j_inter, const torch::Tensor& target) {
  auto total = torch::zeros({}, target.options());
  if (j_inter.empty()) return total;
  for (const auto& j : j_inter) {
    if (j.dim() != 4 || j.size(0) != target.size(0) || j.size(1) != target.size(1)) {
      throw DimensionError("L_LDR: intermediate " + c10::str(j.sizes()) + " vs target " + c10::str(target.sizes()));
    }
    total = total + (j - area_downsample(target, j.size(2), j.size(3))).abs().mean();
  }
  return total / static_cast<double>(j_inter.size());
}

LossReport total_loss(const DfrOutput& out, const torch::Tensor& target, const LossWeights& weights,
                      const AblationFlags& flags, FeatureExtractor& extractor, bool preclamp) {
  if (weights.perceptual < 0 || weights.rd < 0 || weights.ldr < 0) throw ParameterError("loss weights must be >= 0");
  const auto& pred = preclamp ? out.j_preclamp : out.j;
  auto rec = l_rec(pred, target);
  auto per = l_perceptual(pred, target, extractor);
  auto zero = torch::zeros({}, pred.options());
  auto rd = flags.l_rd ? l_rd(out.gb.f_p, out.gb.f_i) : zero;
  const auto& inter = preclamp ? out.lb.j_inter_preclamp : out.lb.j_inter;
  auto ldr = flags.l_ldr ? l_ldr(inter, target) : zero;

  LossReport r;
  r.total_tensor = rec + weights.perceptual * per + weights.rd * rd + weights.ldr * ldr;
  r.rec = rec.item<double>();
  r.perceptual = per.item<double>();
  r.rd = rd.item<double>();
  r.ldr = ldr.item<double>();
  r.total = r.total_tensor.item<double>();
  return r;
}

}  // namespace dfrnet
