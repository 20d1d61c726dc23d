#include "gsreg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "gsreg/error.hpp"

namespace gsreg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const Image& rgb, const std::filesystem::path& path) {
  if (rgb.channels() != 3) throw InvalidArgument("write_png: expected a 3-channel image");
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw FormatError("png " + path.string() + ": cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png: allocation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(rgb.width()) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png " + path.string() + ": write failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, rgb.width(), rgb.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb(x, y, c), 0.0, 1.0);
        row[x * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw FormatError("png " + path.string() + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: allocation failed");
  }
  Image img;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png " + path.string() + ": decode failed");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const bool wide = png_get_bit_depth(png, info) == 16;
  row.resize(png_get_rowbytes(png, info));
  img = Image(width, height, 3);
  const double scale = wide ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = static_cast<std::size_t>(x) * 3 + c;
        const double v = wide ? (row[2 * i] | (row[2 * i + 1] << 8)) : row[i];
        img(x, y, c) = v * scale;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_f32(const std::vector<float>& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("f32 " + path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw FormatError("f32 " + path.string() + ": write failed");
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("f32 " + path.string() + ": cannot open");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw FormatError("f32 " + path.string() + ": dimension mismatch (expected " +
                      std::to_string(expected_count) + " floats, file holds " +
                      std::to_string(bytes / sizeof(float)) + ")");
  }
  in.seekg(0);
  std::vector<float> values(expected_count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  return values;
}

MapF to_float_map(const Image& single_channel) {
  MapF out(single_channel.width(), single_channel.height(), single_channel.channels());
  std::transform(single_channel.data().begin(), single_channel.data().end(), out.data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

}  // namespace gsreg
