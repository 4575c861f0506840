#pragma once

// Image decoding, resampling and PNG encoding on top of OpenCV.
// Everything crossing this boundary is a RasterImage in RGB order.

#include <cstring>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "venation/errors.hpp"
#include "venation/raster.hpp"

namespace venation {

namespace detail {

inline RasterImage from_mat(const cv::Mat& mat) {
  CV_Assert(mat.depth() == CV_8U);
  cv::Mat src = mat.isContinuous() ? mat : mat.clone();
  RasterImage img(src.rows, src.cols, src.channels());
  std::memcpy(img.values().data(), src.data, img.size());
  return img;
}

inline cv::Mat to_mat(const RasterImage& img) {
  const int type = img.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat mat(img.height(), img.width(), type);
  std::memcpy(mat.data, img.values().data(), img.size());
  return mat;
}

}  // namespace detail

// Decodes tiff/png/jpeg. Grayscale sources stay single-channel; colour
// sources come back as RGB; alpha is dropped; 16-bit is reduced to 8-bit.
inline RasterImage decode_image(const std::filesystem::path& path) {
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception&) {
    throw DecodeError(path.string());
  }
  if (raw.empty()) throw DecodeError(path.string());

  if (raw.depth() != CV_8U) {
    cv::Mat converted;
    const double scale = raw.depth() == CV_16U   ? 1.0 / 257.0
                         : raw.depth() == CV_16S ? 1.0 / 128.0
                         : (raw.depth() == CV_32F || raw.depth() == CV_64F)
                             ? 255.0
                             : 1.0;
    raw.convertTo(converted, CV_8U, scale);
    raw = converted;
  }

  cv::Mat out;
  switch (raw.channels()) {
    case 1:
      out = raw;
      break;
    case 2:
      cv::extractChannel(raw, out, 0);
      break;
    case 3:
      cv::cvtColor(raw, out, cv::COLOR_BGR2RGB);
      break;
    case 4:
      cv::cvtColor(raw, out, cv::COLOR_BGRA2RGB);
      break;
    default:
      throw DecodeError(path.string());
  }
  return detail::from_mat(out);
}

// Bilinear resampling (half-pixel centres).
inline RasterImage resize_bilinear(const RasterImage& img, int height,
                                   int width) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("resize target must be positive");
  }
  if (img.height() == height && img.width() == width) return img;
  cv::Mat out;
  cv::resize(detail::to_mat(img), out, cv::Size(width, height), 0, 0,
             cv::INTER_LINEAR);
  return detail::from_mat(out);
}

// Lossless PNG; output bytes depend only on pixel values.
inline void write_png(const std::filesystem::path& path,
                      const RasterImage& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ShapeError("write_png: 1 or 3 channels required");
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  cv::Mat mat = detail::to_mat(img);
  if (img.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), mat, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
    throw ConfigError("cannot write " + path.string());
  }
}

}  // namespace venation
