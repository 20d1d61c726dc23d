#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace gsreg {

/// Row-major interleaved raster: element (x, y, c) at (y * width + x) * channels + c.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool same_shape(const Raster& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Image = Raster<double>;
using MapF = Raster<float>;

/// Writes an 8-bit RGB PNG (3-channel input, values clamped to [0, 1]).
void write_png(const Image& rgb, const std::filesystem::path& path);
/// Reads an 8- or 16-bit PNG into a 3-channel image in [0, 1].
Image read_png(const std::filesystem::path& path);

/// Raw little-endian float32 dump of all channels, row-major, no header.
void write_f32(const std::vector<float>& values, const std::filesystem::path& path);
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count);

MapF to_float_map(const Image& single_channel);

}  // namespace gsreg
