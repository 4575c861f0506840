#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "venation/errors.hpp"

namespace venation {

// Dense row-major H x W x C grid. Interleaved channels.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, int channels, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels <= 0) {
      throw ShapeError("invalid grid shape " + std::to_string(height) + "x" +
                       std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const noexcept {
    return data_[index(y, x, c)];
  }

  // Clamped access: coordinates outside the grid are replaced by the
  // nearest edge pixel.
  const T& clamped(int y, int x, int c = 0) const noexcept {
    y = std::clamp(y, 0, height_ - 1);
    x = std::clamp(x, 0, width_ - 1);
    return data_[index(y, x, c)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return height_ == other.height() && width_ == other.width() &&
           channels_ == other.channels();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

// 8-bit image with 1 or 3 channels (RGB order).
using RasterImage = Grid<std::uint8_t>;
// Signed single-channel field, e.g. a Sobel response.
using SignedField = Grid<std::int32_t>;
// Real-valued model input, H x W x C.
using FloatTensor = Grid<float>;

inline void require_channels(const RasterImage& img, int channels,
                             const char* op) {
  if (img.channels() != channels) {
    throw ShapeError(std::string(op) + ": expected " +
                     std::to_string(channels) + " channel(s), got " +
                     std::to_string(img.channels()));
  }
}

// Replicates a single-channel image into three identical channels.
inline RasterImage replicate_channels(const RasterImage& gray) {
  require_channels(gray, 1, "replicate_channels");
  RasterImage out(gray.height(), gray.width(), 3);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = gray.at(y, x);
  return out;
}

}  // namespace venation
