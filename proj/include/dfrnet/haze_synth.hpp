#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace dfrnet::haze {

/// Depth values produced by make_depth lie in [0, kMaxDepth].
inline constexpr double kMaxDepth = 10.0;
inline constexpr double kDefaultTMin = 0.05;
inline constexpr int64_t kMinImageSide = 8;

using Airlight = std::array<double, 3>;

enum class DepthKind { kRamp, kRadial, kValueNoise };

std::string to_string(DepthKind kind);
DepthKind depth_kind_from_string(const std::string& name);

/// Everything needed to synthesize one hazy image. All grids are (C,H,W)
/// tensors sharing the dtype of `clear`; `depth` and `beta` have one channel.
struct HazeScene {
  torch::Tensor clear;
  torch::Tensor depth;
  torch::Tensor beta;
  Airlight airlight{1.0, 1.0, 1.0};

  /// Throws DimensionError / ParameterError when the scene is malformed.
  void validate() const;
};

torch::Tensor make_depth(DepthKind kind, int64_t height, int64_t width, uint64_t seed);

/// Beer-Lambert transmission t = exp(-beta * depth).
torch::Tensor make_transmission(const torch::Tensor& depth, const torch::Tensor& beta);

/// I = J t + A (1 - t), clamped to [0, 1]. Works on (3,H,W) or (N,3,H,W)
/// with t shaped (1,H,W) or (N,1,H,W).
torch::Tensor apply_asm(const torch::Tensor& clear, const torch::Tensor& transmission,
                        const Airlight& airlight);
torch::Tensor apply_asm(const HazeScene& scene);

/// J = (I - A (1 - t)) / max(t, t_min), clamped to [0, 1].
torch::Tensor invert_asm(const torch::Tensor& hazy, const torch::Tensor& transmission,
                         const Airlight& airlight, double t_min = kDefaultTMin);

/// Seeded procedural clear image: a two-colour gradient with a few flat
/// shapes on top. Values stay in [0.05, 0.8] so that any airlight drawn by
/// make_scene is at least as bright as the scene.
torch::Tensor make_clear_image(int64_t height, int64_t width, uint64_t seed);

struct SceneInfo {
  DepthKind depth_kind = DepthKind::kRamp;
  bool homogeneous = true;
  double beta_min = 0.0;
  double beta_mean = 0.0;
  double beta_max = 0.0;
};

/// Builds a complete scene for one dataset pair. The random draws do not
/// depend on the beta range, so sweeping beta with a fixed seed changes only
/// the haze.
std::pair<HazeScene, SceneInfo> make_scene(int64_t height, int64_t width, double beta_lo,
                                           double beta_hi, uint64_t seed);

/// Sub-seed of pair `index` in a dataset generated from `seed`.
uint64_t pair_seed(uint64_t seed, uint64_t index);

struct ManifestEntry {
  std::string id;
  std::string split;
  double beta_min = 0.0;
  double beta_mean = 0.0;
  double beta_max = 0.0;
  Airlight airlight{};

  std::filesystem::path hazy_path(const std::filesystem::path& root) const;
  std::filesystem::path clear_path(const std::filesystem::path& root) const;
  std::filesystem::path meta_path(const std::filesystem::path& root) const;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
};

struct DatasetOptions {
  int64_t n_pairs = 4;
  int64_t height = 64;
  int64_t width = 64;
  double beta_lo = 0.05;
  double beta_hi = 0.25;
  uint64_t seed = 0;
  std::string split = "train";
};

/// Writes <out>/{hazy,clear,meta}/<id>.{png,png,txt} and <out>/manifest.txt.
/// Throws ParameterError on bad options and IoError when writing fails.
DatasetManifest generate_dataset(const DatasetOptions& options, const std::filesystem::path& out);

/// Parses <root>/manifest.txt and checks that every referenced file exists
/// and that hazy/clear pairs agree in size. Throws DataError otherwise.
DatasetManifest load_manifest(const std::filesystem::path& root);

/// A loaded pair as (3,H,W) float tensors in [0,1].
struct ImagePair {
  std::string id;
  torch::Tensor hazy;
  torch::Tensor clear;
};

std::vector<ImagePair> load_pairs(const DatasetManifest& manifest);

}  // namespace dfrnet::haze
