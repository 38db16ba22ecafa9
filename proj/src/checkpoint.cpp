#include "dfrnet/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "dfrnet/errors.hpp"
#include "dfrnet/image_io.hpp"

namespace dfrnet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

bool Archive::has(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const torch::Tensor& Archive::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  const auto tmp = io::temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const auto& entries = archive.manifest.entries();
    out << kArchiveMagic << "\nmanifest " << entries.size() << "\n";
    for (const auto& [k, v] : entries) {
      if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
        throw ParameterError("manifest entries must be single-line: " + k);
      }
      out << k << " = " << v << "\n";
    }
    for (const auto& [name, t] : archive.tensors) {
      if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
        throw ParameterError("bad tensor name '" + name + "'");
      }
      auto data = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
      out << "tensor " << name << " " << data.dim();
      for (auto d : data.sizes()) out << " " << d;
      out << "\n";
      out.write(reinterpret_cast<const char*>(data.data_ptr<float>()),
                static_cast<std::streamsize>(data.numel() * sizeof(float)));
      out << "\n";
    }
    out << "end\n";
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  auto bad = [&](const std::string& what) { return DataError("corrupt checkpoint " + path.string() + ": " + what); };
  std::string line;
  if (!std::getline(in, line) || line != kArchiveMagic) throw bad("missing header");
  if (!std::getline(in, line) || line.rfind("manifest ", 0) != 0) throw bad("missing manifest");
  const auto n = parse_int(line.substr(9), "manifest size");
  std::string text;
  for (int64_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw bad("truncated manifest");
    text += line + "\n";
  }
  Archive archive;
  archive.manifest = KeyValues::parse(text, path.string());
  while (std::getline(in, line)) {
    if (line == "end") return archive;
    std::istringstream header(line);
    std::string tag, name;
    int64_t ndim = -1;
    header >> tag >> name >> ndim;
    if (tag != "tensor" || name.empty() || ndim < 0) throw bad("bad tensor header '" + line + "'");
    std::vector<int64_t> dims(static_cast<size_t>(ndim));
    for (auto& d : dims) {
      if (!(header >> d) || d < 0) throw bad("bad shape for " + name);
    }
    auto t = torch::empty(dims, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in || in.get() != '\n') throw bad("truncated data for " + name);
    archive.tensors.emplace_back(name, t);
  }
  throw bad("missing end marker");
}

void add_module_tensors(Archive& archive, const torch::nn::Module& module, const std::string& prefix) {
  for (const auto& p : module.named_parameters(/*recurse=*/true)) archive.add(prefix + p.key(), p.value());
}

void load_module_tensors(const Archive& archive, torch::nn::Module& module, const std::string& prefix) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.named_parameters(/*recurse=*/true)) {
    const auto& src = archive.get(prefix + p.key());
    if (src.sizes() != p.value().sizes()) {
      throw DataError("shape mismatch for " + p.key() + ": checkpoint " + c10::str(src.sizes()) + ", model " +
                      c10::str(p.value().sizes()));
    }
    p.value().copy_(src);
  }
}

}  // namespace dfrnet
