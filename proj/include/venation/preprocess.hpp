#pragma once

// Venation-enhancement chain (grayscale -> median -> Sobel -> magnitude ->
// complement) and per-backbone input normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "venation/errors.hpp"
#include "venation/raster.hpp"

namespace venation {

enum class MagnitudeMode { euclidean, absolute_sum };

inline std::string to_string(MagnitudeMode m) {
  return m == MagnitudeMode::euclidean ? "euclidean" : "absolute_sum";
}

inline MagnitudeMode parse_magnitude_mode(const std::string& s) {
  if (s == "euclidean") return MagnitudeMode::euclidean;
  if (s == "absolute_sum") return MagnitudeMode::absolute_sum;
  throw ConfigError("unknown magnitude mode '" + s + "'");
}

struct VenationConfig {
  int median_kernel = 3;
  MagnitudeMode magnitude_mode = MagnitudeMode::euclidean;

  void validate() const {
    if (median_kernel < 3 || median_kernel % 2 == 0) {
      throw ConfigError("median kernel must be odd and >= 3, got " +
                        std::to_string(median_kernel));
    }
  }
};

// Standard luma weights.
inline RasterImage to_grayscale(const RasterImage& rgb) {
  require_channels(rgb, 3, "to_grayscale");
  RasterImage gray(rgb.height(), rgb.width(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double v = 0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) +
                       0.114 * rgb.at(y, x, 2);
      gray.at(y, x) =
          static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return gray;
}

// kernel x kernel median with edge replication.
inline RasterImage median_filter(const RasterImage& gray, int kernel) {
  require_channels(gray, 1, "median_filter");
  if (kernel < 3 || kernel % 2 == 0) {
    throw ConfigError("median_filter: kernel must be odd and >= 3, got " +
                      std::to_string(kernel));
  }
  if (gray.height() < kernel || gray.width() < kernel) {
    throw ShapeError("median_filter: image smaller than kernel");
  }
  const int r = kernel / 2;
  const auto mid = static_cast<std::ptrdiff_t>(kernel * kernel / 2);
  std::vector<std::uint8_t> window(static_cast<std::size_t>(kernel) * kernel);
  RasterImage out(gray.height(), gray.width(), 1);
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      std::size_t n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) window[n++] = gray.clamped(y + dy, x + dx);
      std::nth_element(window.begin(), window.begin() + mid, window.end());
      out.at(y, x) = window[mid];
    }
  }
  return out;
}

struct SobelResponse {
  SignedField gx;
  SignedField gy;
};

// 3x3 Sobel, applied as a correlation so that intensity rising to the
// right (resp. downward) gives positive gx (resp. gy). Edge-replicated
// borders, no clamping.
inline SobelResponse sobel_gradients(const RasterImage& gray) {
  require_channels(gray, 1, "sobel_gradients");
  if (gray.empty()) throw ShapeError("sobel_gradients: empty image");
  SobelResponse s{SignedField(gray.height(), gray.width(), 1),
                  SignedField(gray.height(), gray.width(), 1)};
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      auto p = [&](int dy, int dx) -> std::int32_t {
        return gray.clamped(y + dy, x + dx);
      };
      s.gx.at(y, x) = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) -
                      (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      s.gy.at(y, x) = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) -
                      (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
    }
  }
  return s;
}

// Unscaled magnitude field.
inline std::vector<double> raw_magnitude(const SignedField& gx,
                                         const SignedField& gy,
                                         MagnitudeMode mode) {
  if (!gx.same_shape(gy) || gx.channels() != 1) {
    throw ShapeError("gradient_magnitude: gx/gy shape mismatch");
  }
  std::vector<double> m(gx.size());
  const auto a = gx.values();
  const auto b = gy.values();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double u = a[i];
    const double v = b[i];
    m[i] = mode == MagnitudeMode::euclidean ? std::sqrt(u * u + v * v)
                                            : std::abs(u) + std::abs(v);
  }
  return m;
}

// Magnitude linearly rescaled so that its maximum maps to 255.
inline RasterImage gradient_magnitude(const SignedField& gx,
                                      const SignedField& gy,
                                      MagnitudeMode mode) {
  const auto m = raw_magnitude(gx, gy, mode);
  RasterImage out(gx.height(), gx.width(), 1);
  const double peak = m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
  if (peak <= 0.0) return out;
  auto dst = out.values();
  for (std::size_t i = 0; i < m.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(m[i] * 255.0 / peak), 0L, 255L));
  }
  return out;
}

inline RasterImage complement(const RasterImage& img) {
  RasterImage out = img;
  for (auto& v : out.values()) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

// Every intermediate of the chain, for stage dumps.
struct VenationStages {
  RasterImage grayscale;
  RasterImage median;
  SobelResponse sobel;
  RasterImage magnitude;
  RasterImage output;
};

inline VenationStages venation_stages(const RasterImage& rgb,
                                      const VenationConfig& config) {
  config.validate();
  VenationStages s;
  s.grayscale = to_grayscale(rgb);
  s.median = median_filter(s.grayscale, config.median_kernel);
  s.sobel = sobel_gradients(s.median);
  s.magnitude = gradient_magnitude(s.sobel.gx, s.sobel.gy, config.magnitude_mode);
  s.output = complement(s.magnitude);
  return s;
}

inline RasterImage venation_pipeline(const RasterImage& rgb,
                                     const VenationConfig& config) {
  return venation_stages(rgb, config).output;
}

// Renders a signed field for display: |v| scaled so the peak is 255.
inline RasterImage visualize_field(const SignedField& f) {
  RasterImage out(f.height(), f.width(), 1);
  std::int64_t peak = 0;
  for (auto v : f.values()) peak = std::max<std::int64_t>(peak, std::abs(v));
  if (peak == 0) return out;
  auto dst = out.values();
  auto src = f.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::abs(src[i]) * 255 / peak);
  }
  return out;
}

// --- model input normalization ----------------------------------------

enum class SchemeId { unit_scale, channel_center, backbone_native };

inline std::string to_string(SchemeId id) {
  switch (id) {
    case SchemeId::unit_scale: return "UNIT_SCALE";
    case SchemeId::channel_center: return "CHANNEL_CENTER";
    case SchemeId::backbone_native: return "BACKBONE_NATIVE";
  }
  return "?";
}

inline SchemeId parse_scheme_id(const std::string& s) {
  if (s == "UNIT_SCALE") return SchemeId::unit_scale;
  if (s == "CHANNEL_CENTER") return SchemeId::channel_center;
  if (s == "BACKBONE_NATIVE") return SchemeId::backbone_native;
  throw ConfigError("unknown normalization scheme '" + s + "'");
}

// Per-channel affine map: out = (v - offset[c]) * scale[c], v in 0..255.
struct NormalizationScheme {
  SchemeId id = SchemeId::unit_scale;
  std::array<float, 3> offset{0.0f, 0.0f, 0.0f};
  std::array<float, 3> scale{1.0f / 255.0f, 1.0f / 255.0f, 1.0f / 255.0f};

  static NormalizationScheme unit_scale() { return {}; }

  // Subtracts fixed per-channel reference means (RGB order; ImageNet
  // means in 8-bit units by default).
  static NormalizationScheme channel_center(
      std::array<float, 3> means = {123.68f, 116.779f, 103.939f}) {
    return {SchemeId::channel_center, means, {1.0f, 1.0f, 1.0f}};
  }

  // (v / 255 - mean) / std with the statistics the pretrained weights
  // were fitted with.
  static NormalizationScheme backbone_native(std::array<float, 3> mean,
                                             std::array<float, 3> stddev) {
    NormalizationScheme s{SchemeId::backbone_native, {}, {}};
    for (int c = 0; c < 3; ++c) {
      s.offset[c] = 255.0f * mean[c];
      s.scale[c] = 1.0f / (255.0f * stddev[c]);
    }
    return s;
  }

  friend bool operator==(const NormalizationScheme&,
                         const NormalizationScheme&) = default;
};

inline float normalize_value(std::uint8_t v, const NormalizationScheme& s,
                             int channel) {
  return (static_cast<float>(v) - s.offset[channel]) * s.scale[channel];
}

inline FloatTensor normalize_for_model(const RasterImage& image,
                                       const NormalizationScheme& scheme) {
  require_channels(image, 3, "normalize_for_model");
  FloatTensor out(image.height(), image.width(), 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = normalize_value(image.at(y, x, c), scheme, c);
  return out;
}

}  // namespace venation
