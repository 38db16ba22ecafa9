#include "dfrnet/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include "dfrnet/errors.hpp"

namespace dfrnet::io {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr file(std::fopen(path.c_str(), mode));
  if (!file) throw IoError("cannot open " + path.string());
  return file;
}

class PngReader {
 public:
  explicit PngReader(FILE* file) {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png_ == nullptr) throw IoError("png_create_read_struct failed");
    info_ = png_create_info_struct(png_);
    if (info_ == nullptr) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw IoError("png_create_info_struct failed");
    }
    png_init_io(png_, file);
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() { return png_; }
  png_infop info() { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

}  // namespace

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

std::pair<int64_t, int64_t> read_png_size(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  PngReader reader(file.get());
  if (setjmp(png_jmpbuf(reader.png()))) throw IoError("corrupt png " + path.string());
  png_read_info(reader.png(), reader.info());
  return {static_cast<int64_t>(png_get_image_height(reader.png(), reader.info())),
          static_cast<int64_t>(png_get_image_width(reader.png(), reader.info()))};
}

torch::Tensor read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  PngReader reader(file.get());
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  size_t channels = 0;
  if (setjmp(png_jmpbuf(reader.png()))) throw IoError("corrupt png " + path.string());

  png_read_info(reader.png(), reader.info());
  width = png_get_image_width(reader.png(), reader.info());
  height = png_get_image_height(reader.png(), reader.info());
  const auto color = png_get_color_type(reader.png(), reader.info());
  const auto depth = png_get_bit_depth(reader.png(), reader.info());

  if (depth == 16) png_set_strip_16(reader.png());
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(reader.png());
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(reader.png());
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(reader.png());
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(reader.png());
  png_read_update_info(reader.png(), reader.info());

  channels = png_get_channels(reader.png(), reader.info());
  const size_t stride = png_get_rowbytes(reader.png(), reader.info());
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(reader.png(), rows.data());
  png_read_end(reader.png(), nullptr);

  if (channels != 3) throw IoError("unsupported channel layout in " + path.string());
  auto hwc = torch::from_blob(pixels.data(),
                              {static_cast<int64_t>(height), static_cast<int64_t>(width), 3},
                              torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || (image.size(0) != 3 && image.size(0) != 1)) {
    throw DimensionError("write_png expects a (3,H,W) or (1,H,W) tensor");
  }
  const int64_t channels = image.size(0);
  const int64_t height = image.size(1);
  const int64_t width = image.size(2);
  auto bytes = image.detach()
                   .to(torch::kFloat64)
                   .clamp(0.0, 1.0)
                   .mul(255.0)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();

  const auto tmp = temp_sibling(path);
  {
    auto file = open_file(tmp, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::filesystem::remove(tmp);
      throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    auto* data = bytes.data_ptr<uint8_t>();
    for (int64_t y = 0; y < height; ++y) {
      png_write_row(png, data + y * width * channels);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("failed writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

}  // namespace dfrnet::io
