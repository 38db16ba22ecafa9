#include "dfrnet/batch.hpp"

#include "dfrnet/errors.hpp"
#include "dfrnet/rng.hpp"

namespace dfrnet {

Batch sample_batch(const std::vector<haze::ImagePair>& pairs, int64_t batch_size, int64_t patch,
                   uint64_t seed, int64_t iteration) {
  if (pairs.empty()) throw DataError("cannot sample a batch from an empty dataset");
  if (batch_size < 1 || patch < 1) throw ParameterError("batch size and patch size must be positive");
  Rng rng(derive_seed(seed, static_cast<uint64_t>(iteration)));
  std::vector<torch::Tensor> hazy;
  std::vector<torch::Tensor> clear;
  Batch batch;
  for (int64_t b = 0; b < batch_size; ++b) {
    const auto& pair = pairs[rng.below(pairs.size())];
    const auto height = pair.hazy.size(1);
    const auto width = pair.hazy.size(2);
    if (patch > height || patch > width) {
      throw DimensionError("patch " + std::to_string(patch) + " larger than image " + pair.id);
    }
    const auto top = static_cast<int64_t>(rng.below(static_cast<uint64_t>(height - patch + 1)));
    const auto left = static_cast<int64_t>(rng.below(static_cast<uint64_t>(width - patch + 1)));
    const bool hflip = rng.coin();
    const bool vflip = rng.coin();
    auto crop = [&](const torch::Tensor& img) {
      auto c = img.slice(1, top, top + patch).slice(2, left, left + patch);
      if (hflip) c = c.flip({2});
      if (vflip) c = c.flip({1});
      return c;
    };
    hazy.push_back(crop(pair.hazy));
    clear.push_back(crop(pair.clear));
    batch.ids.push_back(pair.id);
  }
  batch.hazy = torch::stack(hazy).contiguous();
  batch.clear = torch::stack(clear).contiguous();
  return batch;
}

Batch full_batch(const std::vector<haze::ImagePair>& pairs) {
  if (pairs.empty()) throw DataError("empty dataset");
  std::vector<torch::Tensor> hazy;
  std::vector<torch::Tensor> clear;
  Batch batch;
  for (const auto& p : pairs) {
    hazy.push_back(p.hazy);
    clear.push_back(p.clear);
    batch.ids.push_back(p.id);
  }
  batch.hazy = torch::stack(hazy);
  batch.clear = torch::stack(clear);
  return batch;
}

torch::Tensor center_crop_to_multiple(const torch::Tensor& image, int64_t multiple) {
  const auto h = image.size(-2);
  const auto w = image.size(-1);
  const auto ch = h - h % multiple;
  const auto cw = w - w % multiple;
  if (ch == 0 || cw == 0) throw DimensionError("image smaller than " + std::to_string(multiple) + " pixels");
  const auto top = (h - ch) / 2;
  const auto left = (w - cw) / 2;
  return image.narrow(-2, top, ch).narrow(-1, left, cw);
}

}  // namespace dfrnet
