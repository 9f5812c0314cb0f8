#pragma once

// HSV colour co-occurrence features.
//
// Each of the H, S and V planes is quantized independently (16, 3 and 3
// levels), a symmetric co-occurrence matrix is built from horizontally and
// vertically adjacent pixel pairs at distance 1, and the descriptor keeps the
// diagonal of each matrix plus one scalar summarizing its off-diagonal mass:
//
//   [ H diag (16) | H ave_ndiag | S diag (3) | S ave_ndiag | V diag (3) | V ave_ndiag ]

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segcbir/errors.hpp"

namespace segcbir {

inline constexpr std::size_t kHueLevels = 16;
inline constexpr std::size_t kSatLevels = 3;
inline constexpr std::size_t kValLevels = 3;
inline constexpr std::size_t kFeatureDim =
    (kHueLevels + 1) + (kSatLevels + 1) + (kValLevels + 1);
static_assert(kFeatureDim == 25);

/// Offsets of the three per-plane blocks inside a FeatureVector.
inline constexpr std::size_t kHueOffset = 0;
inline constexpr std::size_t kSatOffset = kHueLevels + 1;
inline constexpr std::size_t kValOffset = kSatOffset + kSatLevels + 1;

using FeatureVector = std::array<double, kFeatureDim>;

struct Hsv {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

/// Hexcone RGB -> HSV. Achromatic pixels get hue 0; black gets saturation 0.
inline Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  const double delta = static_cast<double>(mx - mn);
  Hsv out;
  out.v = mx / 255.0;
  out.s = mx == 0 ? 0.0 : delta / mx;
  if (mx == mn) return out;

  double h;
  if (mx == r) {
    h = 60.0 * ((static_cast<double>(g) - b) / delta);
  } else if (mx == g) {
    h = 60.0 * ((static_cast<double>(b) - r) / delta + 2.0);
  } else {
    h = 60.0 * ((static_cast<double>(r) - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

struct HsvImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> h;
  std::vector<double> s;
  std::vector<double> v;

  HsvImage() = default;
  HsvImage(std::size_t w, std::size_t ht)
      : width(w), height(ht), h(w * ht), s(w * ht), v(w * ht) {}

  std::size_t size() const { return width * height; }

  /// Builds an image from interleaved 8-bit RGB samples.
  static HsvImage from_rgb(std::size_t w, std::size_t ht,
                           std::span<const std::uint8_t> rgb) {
    if (rgb.size() != w * ht * 3) {
      throw DomainError("rgb buffer size does not match image dimensions");
    }
    HsvImage img(w, ht);
    for (std::size_t i = 0; i < w * ht; ++i) {
      const Hsv px = rgb_to_hsv(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
      img.h[i] = px.h;
      img.s[i] = px.s;
      img.v[i] = px.v;
    }
    return img;
  }

  /// Copies the rectangle [x, x+w) x [y, y+ht).
  HsvImage crop(std::size_t x, std::size_t y, std::size_t w,
                std::size_t ht) const {
    if (x + w > width || y + ht > height) {
      throw DomainError("crop rectangle exceeds image bounds");
    }
    HsvImage out(w, ht);
    for (std::size_t r = 0; r < ht; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t src = (y + r) * width + (x + c);
        const std::size_t dst = r * w + c;
        out.h[dst] = h[src];
        out.s[dst] = s[src];
        out.v[dst] = v[src];
      }
    }
    return out;
  }
};

/// Per-pixel quantization levels of one plane.
struct QuantizedPlane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t levels = 1;
  std::vector<std::uint8_t> cells;

  std::uint8_t at(std::size_t row, std::size_t col) const {
    return cells[row * width + col];
  }
};

/// A rectangular window onto a QuantizedPlane, so blocks can be processed
/// without copying.
struct PlaneView {
  const QuantizedPlane* plane = nullptr;
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  explicit PlaneView(const QuantizedPlane& p)
      : plane(&p), width(p.width), height(p.height) {}
  PlaneView(const QuantizedPlane& p, std::size_t x0, std::size_t y0,
            std::size_t w, std::size_t h)
      : plane(&p), x(x0), y(y0), width(w), height(h) {}

  std::size_t levels() const { return plane->levels; }
  std::uint8_t at(std::size_t row, std::size_t col) const {
    return plane->cells[(y + row) * plane->width + (x + col)];
  }
};

/// Uniform quantization of values in [lo, hi] into `levels` bins; `hi` itself
/// lands in the top bin.
inline QuantizedPlane quantize(std::span<const double> values,
                               std::size_t width, std::size_t height,
                               double lo, double hi, std::size_t levels) {
  if (levels < 1 || levels > 256) {
    throw DomainError("quantization levels must be in [1, 256]");
  }
  if (!(hi > lo)) throw DomainError("quantization domain is empty");
  if (values.size() != width * height) {
    throw DomainError("plane size does not match dimensions");
  }
  QuantizedPlane out{width, height, levels,
                     std::vector<std::uint8_t>(values.size())};
  const double bin_width = (hi - lo) / static_cast<double>(levels);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values[i];
    if (!(x >= lo && x <= hi)) {
      throw DomainError("value " + std::to_string(x) +
                        " outside quantization domain");
    }
    auto bin = static_cast<std::size_t>(std::floor((x - lo) / bin_width));
    out.cells[i] = static_cast<std::uint8_t>(std::min(bin, levels - 1));
  }
  return out;
}

/// Symmetric L x L co-occurrence matrix of pair proportions.
struct Ccm {
  std::size_t levels = 0;
  std::vector<double> p;  // row-major L x L

  double operator()(std::size_t i, std::size_t j) const {
    return p[i * levels + j];
  }

  /// Sum over i <= j; equals 1 for any plane with at least one pair.
  double upper_mass() const {
    double total = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      for (std::size_t j = i; j < levels; ++j) total += (*this)(i, j);
    }
    return total;
  }
};

/// Number of horizontally or vertically adjacent pixel pairs.
inline std::size_t adjacent_pair_count(std::size_t width, std::size_t height) {
  return height * (width - 1) + width * (height - 1);
}

/// Counts every unordered 4-neighbour pair once and mirrors it into both
/// triangles, normalized by the total pair count.
inline Ccm compute_ccm(const PlaneView& view) {
  if (view.width == 0 || view.height == 0 ||
      (view.width < 2 && view.height < 2)) {
    throw DomainError("plane has no adjacent pixel pairs");
  }
  const std::size_t levels = view.levels();
  std::vector<std::uint32_t> counts(levels * levels, 0);
  auto add = [&](std::uint8_t a, std::uint8_t b) {
    const std::size_t lo = std::min(a, b);
    const std::size_t hi = std::max(a, b);
    ++counts[lo * levels + hi];
  };
  for (std::size_t r = 0; r < view.height; ++r) {
    for (std::size_t c = 0; c < view.width; ++c) {
      const std::uint8_t here = view.at(r, c);
      if (c + 1 < view.width) add(here, view.at(r, c + 1));
      if (r + 1 < view.height) add(here, view.at(r + 1, c));
    }
  }
  const double total =
      static_cast<double>(adjacent_pair_count(view.width, view.height));
  Ccm ccm{levels, std::vector<double>(levels * levels, 0.0)};
  for (std::size_t i = 0; i < levels; ++i) {
    for (std::size_t j = i; j < levels; ++j) {
      const double value = counts[i * levels + j] / total;
      ccm.p[i * levels + j] = value;
      ccm.p[j * levels + i] = value;
    }
  }
  return ccm;
}

inline Ccm compute_ccm(const QuantizedPlane& plane) {
  return compute_ccm(PlaneView(plane));
}

/// Off-diagonal summary sum_{i<j} (i+j) p_ij with 1-based level indices.
inline double ave_ndiag(const Ccm& ccm) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ccm.levels; ++i) {
    for (std::size_t j = i + 1; j < ccm.levels; ++j) {
      total += static_cast<double>((i + 1) + (j + 1)) * ccm(i, j);
    }
  }
  return total;
}

/// The three quantized planes of an image.
struct QuantizedHsv {
  QuantizedPlane h;
  QuantizedPlane s;
  QuantizedPlane v;
};

inline QuantizedHsv quantize_hsv(const HsvImage& image) {
  return {quantize(image.h, image.width, image.height, 0.0, 360.0, kHueLevels),
          quantize(image.s, image.width, image.height, 0.0, 1.0, kSatLevels),
          quantize(image.v, image.width, image.height, 0.0, 1.0, kValLevels)};
}

namespace detail {

inline std::size_t append_plane(const Ccm& ccm, FeatureVector& out,
                                std::size_t offset) {
  for (std::size_t i = 0; i < ccm.levels; ++i) out[offset + i] = ccm(i, i);
  out[offset + ccm.levels] = ave_ndiag(ccm);
  return offset + ccm.levels + 1;
}

}  // namespace detail

/// Features of the window (x, y, w, h) over already-quantized planes.
inline FeatureVector extract_features(const QuantizedHsv& planes,
                                      std::size_t x, std::size_t y,
                                      std::size_t w, std::size_t h) {
  FeatureVector out{};
  std::size_t offset = 0;
  offset = detail::append_plane(compute_ccm(PlaneView(planes.h, x, y, w, h)),
                                out, offset);
  offset = detail::append_plane(compute_ccm(PlaneView(planes.s, x, y, w, h)),
                                out, offset);
  detail::append_plane(compute_ccm(PlaneView(planes.v, x, y, w, h)), out,
                       offset);
  return out;
}

inline FeatureVector extract_features(const HsvImage& image) {
  const QuantizedHsv planes = quantize_hsv(image);
  return extract_features(planes, 0, 0, image.width, image.height);
}

}  // namespace segcbir
