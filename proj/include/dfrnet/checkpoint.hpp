#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/config.hpp"

namespace dfrnet {

// On-disk layout (version 1):
//   dfrnet-checkpoint v1
//   manifest <n>
//   <n lines of "key = value">
//   tensor <name> <ndim> <d0> ... <dk>      followed by a newline, then
//   <prod(d) little-endian float32 values>  followed by a newline
//   ...
//   end
struct Archive {
  KeyValues manifest;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  void add(const std::string& name, const torch::Tensor& t) { tensors.emplace_back(name, t); }
  bool has(const std::string& name) const;
  /// Throws DataError when the tensor is absent.
  const torch::Tensor& get(const std::string& name) const;
};

inline constexpr const char* kArchiveMagic = "dfrnet-checkpoint v1";

/// Writes to a temporary sibling, then renames over `path`.
void write_archive(const std::filesystem::path& path, const Archive& archive);
/// Throws DataError on a missing, truncated or foreign file.
Archive read_archive(const std::filesystem::path& path);

/// Adds every parameter of `module` as "<prefix><name>".
void add_module_tensors(Archive& archive, const torch::nn::Module& module, const std::string& prefix = "param.");
/// Copies "<prefix><name>" tensors into the module's parameters. Shapes must match.
void load_module_tensors(const Archive& archive, torch::nn::Module& module, const std::string& prefix = "param.");

}  // namespace dfrnet
