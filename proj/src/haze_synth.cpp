#include "dfrnet/haze_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfrnet/errors.hpp"
#include "dfrnet/image_io.hpp"
#include "dfrnet/rng.hpp"

namespace dfrnet::haze {
namespace {

constexpr int64_t kNoiseGrid = 5;

void check_dims(int64_t height, int64_t width) {
  if (height < kMinImageSide || width < kMinImageSide) {
    throw DimensionError("image dimensions must be at least 8x8, got " + std::to_string(height) +
                         "x" + std::to_string(width));
  }
}

// Bilinear interpolation of a seeded coarse grid of uniforms; values in [0,1].
torch::Tensor value_noise01(int64_t height, int64_t width, uint64_t seed) {
  Rng rng(seed);
  double grid[kNoiseGrid][kNoiseGrid];
  for (auto& row : grid) {
    for (auto& v : row) v = rng.uniform();
  }
  auto out = torch::empty({1, height, width}, torch::kFloat64);
  auto acc = out.accessor<double, 3>();
  for (int64_t y = 0; y < height; ++y) {
    const double gy = static_cast<double>(y) / static_cast<double>(height - 1) * (kNoiseGrid - 1);
    const auto y0 = std::min<int64_t>(static_cast<int64_t>(gy), kNoiseGrid - 2);
    const double fy = gy - static_cast<double>(y0);
    for (int64_t x = 0; x < width; ++x) {
      const double gx = static_cast<double>(x) / static_cast<double>(width - 1) * (kNoiseGrid - 1);
      const auto x0 = std::min<int64_t>(static_cast<int64_t>(gx), kNoiseGrid - 2);
      const double fx = gx - static_cast<double>(x0);
      const double top = grid[y0][x0] * (1.0 - fx) + grid[y0][x0 + 1] * fx;
      const double bottom = grid[y0 + 1][x0] * (1.0 - fx) + grid[y0 + 1][x0 + 1] * fx;
      acc[0][y][x] = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

torch::Tensor airlight_tensor(const Airlight& airlight, const torch::Tensor& like) {
  auto a = torch::tensor({airlight[0], airlight[1], airlight[2]}, like.options());
  return like.dim() == 4 ? a.view({1, 3, 1, 1}) : a.view({3, 1, 1});
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string pair_id(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(index));
  return buf;
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string to_string(DepthKind kind) {
  switch (kind) {
    case DepthKind::kRamp:
      return "ramp";
    case DepthKind::kRadial:
      return "radial";
    case DepthKind::kValueNoise:
      return "value_noise";
  }
  return "unknown";
}

DepthKind depth_kind_from_string(const std::string& name) {
  if (name == "ramp") return DepthKind::kRamp;
  if (name == "radial") return DepthKind::kRadial;
  if (name == "value_noise") return DepthKind::kValueNoise;
  throw ParameterError("unknown depth kind '" + name + "'");
}

void HazeScene::validate() const {
  if (clear.dim() != 3 || clear.size(0) != 3) throw DimensionError("clear image must be (3,H,W)");
  check_dims(clear.size(1), clear.size(2));
  const auto spatial = std::vector<int64_t>{1, clear.size(1), clear.size(2)};
  if (depth.sizes() != spatial || beta.sizes() != spatial) {
    throw DimensionError("depth and beta must be (1,H,W) matching the clear image");
  }
  if (depth.lt(0).any().item<bool>() || beta.lt(0).any().item<bool>()) {
    throw ParameterError("depth and beta must be non-negative");
  }
  for (double a : airlight) {
    if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("airlight components must lie in [0,1]");
  }
}

torch::Tensor make_depth(DepthKind kind, int64_t height, int64_t width, uint64_t seed) {
  check_dims(height, width);
  switch (kind) {
    case DepthKind::kRamp: {
      auto rows = torch::linspace(0.0, kMaxDepth, height, torch::kFloat64);
      return rows.view({1, height, 1}).expand({1, height, width}).contiguous();
    }
    case DepthKind::kRadial: {
      Rng rng(seed);
      const double cy = rng.uniform(0.0, static_cast<double>(height - 1));
      const double cx = rng.uniform(0.0, static_cast<double>(width - 1));
      double max_dist = 0.0;
      for (double y : {0.0, static_cast<double>(height - 1)}) {
        for (double x : {0.0, static_cast<double>(width - 1)}) {
          max_dist = std::max(max_dist, std::hypot(y - cy, x - cx));
        }
      }
      auto ys = torch::arange(height, torch::kFloat64).view({height, 1}) - cy;
      auto xs = torch::arange(width, torch::kFloat64).view({1, width}) - cx;
      auto dist = torch::sqrt(ys * ys + xs * xs);
      return (dist / max_dist * kMaxDepth).clamp(0.0, kMaxDepth).unsqueeze(0).contiguous();
    }
    case DepthKind::kValueNoise:
      return value_noise01(height, width, seed) * kMaxDepth;
  }
  throw ParameterError("unknown depth kind");
}

torch::Tensor make_transmission(const torch::Tensor& depth, const torch::Tensor& beta) {
  if (depth.sizes() != beta.sizes()) throw DimensionError("depth and beta shapes differ");
  return torch::exp(-(beta * depth));
}

torch::Tensor apply_asm(const torch::Tensor& clear, const torch::Tensor& transmission,
                        const Airlight& airlight) {
  const auto a = airlight_tensor(airlight, clear);
  return (clear * transmission + a * (1.0 - transmission)).clamp(0.0, 1.0);
}

torch::Tensor apply_asm(const HazeScene& scene) {
  scene.validate();
  return apply_asm(scene.clear, make_transmission(scene.depth, scene.beta), scene.airlight);
}

torch::Tensor invert_asm(const torch::Tensor& hazy, const torch::Tensor& transmission,
                         const Airlight& airlight, double t_min) {
  if (!(t_min > 0.0)) throw ParameterError("t_min must be positive");
  const auto a = airlight_tensor(airlight, hazy);
  return ((hazy - a * (1.0 - transmission)) / transmission.clamp_min(t_min)).clamp(0.0, 1.0);
}

torch::Tensor make_clear_image(int64_t height, int64_t width, uint64_t seed) {
  check_dims(height, width);
  Rng rng(seed);
  constexpr double kLo = 0.05;
  constexpr double kHi = 0.8;

  double c0[3];
  double c1[3];
  for (double& c : c0) c = rng.uniform(kLo, kHi);
  for (double& c : c1) c = rng.uniform(kLo, kHi);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);

  auto img = torch::empty({3, height, width}, torch::kFloat64);
  auto acc = img.accessor<double, 3>();
  const double h1 = static_cast<double>(height - 1);
  const double w1 = static_cast<double>(width - 1);
  const double span = std::abs(dx) + std::abs(dy);
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      // Projection onto the gradient direction, normalized into [0,1].
      const double u = ((x / w1 - 0.5) * dx + (y / h1 - 0.5) * dy) / span + 0.5;
      for (int c = 0; c < 3; ++c) acc[c][y][x] = c0[c] * (1.0 - u) + c1[c] * u;
    }
  }

  const auto shapes = 3 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    const bool circle = rng.coin();
    double color[3];
    for (double& c : color) c = rng.uniform(kLo, kHi);
    const double cy = rng.uniform(0.0, h1);
    const double cx = rng.uniform(0.0, w1);
    const double ry = rng.uniform(0.08, 0.3) * static_cast<double>(height);
    const double rx = rng.uniform(0.08, 0.3) * static_cast<double>(width);
    for (int64_t y = 0; y < height; ++y) {
      for (int64_t x = 0; x < width; ++x) {
        const double ny = (static_cast<double>(y) - cy) / ry;
        const double nx = (static_cast<double>(x) - cx) / rx;
        const bool inside = circle ? (nx * nx + ny * ny <= 1.0) : (std::abs(nx) <= 1.0 && std::abs(ny) <= 1.0);
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) acc[c][y][x] = color[c];
      }
    }
  }
  return img;
}

uint64_t pair_seed(uint64_t seed, uint64_t index) { return derive_seed(seed, index); }

std::pair<HazeScene, SceneInfo> make_scene(int64_t height, int64_t width, double beta_lo,
                                           double beta_hi, uint64_t seed) {
  check_dims(height, width);
  if (!(beta_lo >= 0.0 && beta_lo <= beta_hi)) {
    throw ParameterError("beta range must satisfy 0 <= lo <= hi");
  }
  Rng rng(seed);
  const uint64_t clear_seed = rng.next();
  const auto kind = static_cast<DepthKind>(rng.below(3));
  const uint64_t depth_seed = rng.next();
  const bool homogeneous = rng.coin();
  const double beta_u = rng.uniform();
  const uint64_t noise_seed = rng.next();
  const double base = rng.uniform(0.8, 1.0);
  Airlight airlight{};
  for (double& a : airlight) a = std::clamp(base + rng.uniform(-0.03, 0.03), 0.8, 1.0);

  HazeScene scene;
  scene.clear = make_clear_image(height, width, clear_seed);
  scene.depth = make_depth(kind, height, width, depth_seed);
  if (homogeneous) {
    scene.beta = torch::full({1, height, width}, beta_lo + (beta_hi - beta_lo) * beta_u, torch::kFloat64);
  } else {
    scene.beta = beta_lo + (beta_hi - beta_lo) * value_noise01(height, width, noise_seed);
  }
  scene.airlight = airlight;

  SceneInfo info;
  info.depth_kind = kind;
  info.homogeneous = homogeneous;
  info.beta_min = scene.beta.min().item<double>();
  info.beta_mean = scene.beta.mean().item<double>();
  info.beta_max = scene.beta.max().item<double>();
  return {std::move(scene), info};
}

std::filesystem::path ManifestEntry::hazy_path(const std::filesystem::path& root) const {
  return root / "hazy" / (id + ".png");
}
std::filesystem::path ManifestEntry::clear_path(const std::filesystem::path& root) const {
  return root / "clear" / (id + ".png");
}
std::filesystem::path ManifestEntry::meta_path(const std::filesystem::path& root) const {
  return root / "meta" / (id + ".txt");
}

DatasetManifest generate_dataset(const DatasetOptions& options, const std::filesystem::path& out) {
  if (options.n_pairs < 1) throw ParameterError("n_pairs must be at least 1");
  check_dims(options.height, options.width);
  if (!(options.beta_lo >= 0.0 && options.beta_lo <= options.beta_hi)) {
    throw ParameterError("beta range must satisfy 0 <= lo <= hi");
  }
  if (options.split.empty() || options.split.find_first_of(" \t\n") != std::string::npos) {
    throw ParameterError("split tag must be a single non-empty word");
  }
  make_dirs(out / "hazy");
  make_dirs(out / "clear");
  make_dirs(out / "meta");

  DatasetManifest manifest;
  manifest.root = out;
  std::ostringstream listing;
  listing << "# id split beta_min beta_mean beta_max A_r A_g A_b\n";
  for (int64_t i = 0; i < options.n_pairs; ++i) {
    const uint64_t seed = pair_seed(options.seed, static_cast<uint64_t>(i));
    auto [scene, info] = make_scene(options.height, options.width, options.beta_lo, options.beta_hi, seed);
    const auto hazy = apply_asm(scene);

    ManifestEntry entry;
    entry.id = pair_id(i);
    entry.split = options.split;
    entry.beta_min = info.beta_min;
    entry.beta_mean = info.beta_mean;
    entry.beta_max = info.beta_max;
    entry.airlight = scene.airlight;

    io::write_png(entry.clear_path(out), scene.clear);
    io::write_png(entry.hazy_path(out), hazy);

    std::ostringstream meta;
    meta << "id = " << entry.id << "\n"
         << "seed = " << seed << "\n"
         << "height = " << options.height << "\n"
         << "width = " << options.width << "\n"
         << "depth_kind = " << to_string(info.depth_kind) << "\n"
         << "beta_kind = " << (info.homogeneous ? "homogeneous" : "non_homogeneous") << "\n"
         << "beta_min = " << format_double(info.beta_min) << "\n"
         << "beta_mean = " << format_double(info.beta_mean) << "\n"
         << "beta_max = " << format_double(info.beta_max) << "\n"
         << "airlight = " << format_double(scene.airlight[0]) << "," << format_double(scene.airlight[1])
         << "," << format_double(scene.airlight[2]) << "\n";
    io::write_text_atomic(entry.meta_path(out), meta.str());

    listing << entry.id << ' ' << entry.split << ' ' << format_double(entry.beta_min) << ' '
            << format_double(entry.beta_mean) << ' ' << format_double(entry.beta_max) << ' '
            << format_double(entry.airlight[0]) << ' ' << format_double(entry.airlight[1]) << ' '
            << format_double(entry.airlight[2]) << '\n';
    manifest.entries.push_back(std::move(entry));
  }
  io::write_text_atomic(out / "manifest.txt", listing.str());
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest " + path.string());

  DatasetManifest manifest;
  manifest.root = root;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ManifestEntry entry;
    if (!(fields >> entry.id >> entry.split >> entry.beta_min >> entry.beta_mean >> entry.beta_max >>
          entry.airlight[0] >> entry.airlight[1] >> entry.airlight[2])) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed manifest line");
    }
    for (const auto& file : {entry.hazy_path(root), entry.clear_path(root), entry.meta_path(root)}) {
      if (!std::filesystem::exists(file)) throw DataError("manifest references missing file " + file.string());
    }
    try {
      if (io::read_png_size(entry.hazy_path(root)) != io::read_png_size(entry.clear_path(root))) {
        throw DataError("hazy/clear size mismatch for pair " + entry.id);
      }
    } catch (const IoError& e) {
      throw DataError(e.what());
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::vector<ImagePair> load_pairs(const DatasetManifest& manifest) {
  std::vector<ImagePair> pairs;
  pairs.reserve(manifest.size());
  for (const auto& entry : manifest.entries) {
    try {
      pairs.push_back({entry.id, io::read_png(entry.hazy_path(manifest.root)),
                       io::read_png(entry.clear_path(manifest.root))});
    } catch (const IoError& e) {
      throw DataError(e.what());
    }
  }
  return pairs;
}

}  // namespace dfrnet::haze
