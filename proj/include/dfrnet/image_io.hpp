#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace dfrnet::io {

/// Reads an 8-bit PNG as a float32 (3,H,W) tensor in [0,1]. Gray and
/// gray+alpha images are expanded to RGB; alpha is dropped.
torch::Tensor read_png(const std::filesystem::path& path);

/// Returns {height, width} from the PNG header without decoding pixels.
std::pair<int64_t, int64_t> read_png_size(const std::filesystem::path& path);

/// Writes a (3,H,W) or (1,H,W) tensor with values in [0,1] as an 8-bit PNG.
/// Values map linearly to [0,255] with round-to-nearest. The file is written
/// to a sibling temporary and renamed into place.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

/// Temporary sibling name used by the atomic writers.
std::filesystem::path temp_sibling(const std::filesystem::path& path);

}  // namespace dfrnet::io
