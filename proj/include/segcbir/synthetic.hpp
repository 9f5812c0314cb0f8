#pragma once

// Procedural colour-textured scenes for desk-scale experiments.
//
// A fixed pool of 12 colours is shared by all categories. Category c paints
// with the four pool colours {c, c+1, c+3, c+7} (mod 12); that offset set is
// a near-perfect difference set, so two categories share exactly one colour
// (two for categories six apart). Each image tiles the canvas with the
// category's pattern family (stripes, checks, blobs, rings) and distributes the
// palette over the tiles with image-specific proportions. Only an elliptical
// object region shows the pattern; the rest of the canvas is background in
// off-palette pool colours. A per-colour shade texture is added throughout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/image_io.hpp"
#include "segcbir/random.hpp"

namespace segcbir::synthetic {

struct DatasetConfig {
  std::size_t categories = 10;
  std::size_t per_category = 50;
  std::size_t size = 256;
  std::uint64_t seed = 2024;
  double object_min = 0.38;          // object ellipse semi-axes, fraction of the edge
  double object_max = 0.50;
  std::size_t background_colours = 2;  // off-palette colours around the object
  double min_colour_share = 0.08;    // smallest palette colour area, fraction of the object
  double proportion_skew = 1.0;      // higher concentrates the object on fewer colours
  double shade_probability = 0.25;
};

inline constexpr std::size_t kPoolSize = 12;
inline constexpr std::array<std::size_t, 4> kPaletteOffsets = {0, 1, 3, 7};

enum class Pattern { Stripes, Checks, Blobs, Rings };

inline const char* pattern_name(Pattern p) {
  switch (p) {
    case Pattern::Stripes: return "stripes";
    case Pattern::Checks: return "checks";
    case Pattern::Blobs: return "blobs";
    case Pattern::Rings: return "rings";
  }
  return "?";
}

struct PoolColor {
  double h;
  double s;
  double v;
};

/// Pool colours sit at hue-bin centres (bins 22.5 degrees wide) with
/// saturation / value at level centres, so modest jitter never changes bins.
inline PoolColor pool_color(std::size_t i) {
  static constexpr std::array<int, kPoolSize> hue_bins = {0, 1, 3, 4, 5, 7, 8, 9, 11, 12, 13, 15};
  static constexpr std::array<double, 3> sats = {0.85, 0.5, 0.85};
  static constexpr std::array<double, 3> vals = {0.85, 0.85, 0.5};
  return {11.25 + 22.5 * hue_bins[i % kPoolSize], sats[i % 3], vals[(i / 3) % 3]};
}

inline std::array<std::size_t, 4> category_palette(std::size_t category) {
  std::array<std::size_t, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = (category + kPaletteOffsets[i]) % kPoolSize;
  return out;
}

inline Pattern category_pattern(std::size_t category) {
  return static_cast<Pattern>(category % 4);
}

inline std::string category_name(std::size_t category) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%02zu_%s", category, pattern_name(category_pattern(category)));
  return buf;
}

inline std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto to8 = [](double u) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(u * 255.0), 0L, 255L));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

namespace detail {

// Tile label per pixel for the given pattern; returns the tile count.
inline std::size_t tile_layout(Pattern pattern, std::size_t n, Rng& rng,
                               std::vector<std::uint32_t>& tiles) {
  tiles.assign(n * n, 0);
  switch (pattern) {
    case Pattern::Stripes: {
      const double angle = rng.uniform(0.0, 3.14159265358979);
      const double cs = std::cos(angle), sn = std::sin(angle);
      const double width = rng.uniform(12.0, 40.0);
      const double phase = rng.uniform(0.0, width);
      std::uint32_t max_label = 0;
      std::vector<std::int64_t> raw(n * n);
      std::int64_t lo = INT64_MAX;
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double t = (x * cs + y * sn + phase) / width;
          raw[y * n + x] = static_cast<std::int64_t>(std::floor(t));
          lo = std::min(lo, raw[y * n + x]);
        }
      }
      for (std::size_t i = 0; i < n * n; ++i) {
        tiles[i] = static_cast<std::uint32_t>(raw[i] - lo);
        max_label = std::max(max_label, tiles[i]);
      }
      return max_label + 1;
    }
    case Pattern::Checks: {
      const std::size_t cell = 16 + 8 * rng.below(4);
      const std::size_t per_row = (n + cell - 1) / cell;
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          tiles[y * n + x] = static_cast<std::uint32_t>((y / cell) * per_row + x / cell);
        }
      }
      return per_row * per_row;
    }
    case Pattern::Blobs: {
      const std::size_t seeds = 10 + rng.below(16);
      std::vector<std::pair<double, double>> pts(seeds);
      for (auto& p : pts) p = {rng.uniform(0.0, n), rng.uniform(0.0, n)};
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          std::size_t best = 0;
          double bd = 1e300;
          for (std::size_t s = 0; s < seeds; ++s) {
            const double dx = pts[s].first - x, dy = pts[s].second - y;
            const double d = dx * dx + dy * dy;
            if (d < bd) {
              bd = d;
              best = s;
            }
          }
          tiles[y * n + x] = static_cast<std::uint32_t>(best);
        }
      }
      return seeds;
    }
    case Pattern::Rings: {
      const double cx = rng.uniform(0.2, 0.8) * n, cy = rng.uniform(0.2, 0.8) * n;
      const double width = rng.uniform(14.0, 36.0);
      std::uint32_t max_label = 0;
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double r = std::hypot(x - cx, y - cy);
          tiles[y * n + x] = static_cast<std::uint32_t>(r / width);
          max_label = std::max(max_label, tiles[y * n + x]);
        }
      }
      return max_label + 1;
    }
  }
  return 1;
}

}  // namespace detail

/// Renders image `instance` of `category`. Deterministic in (config.seed,
/// category, instance).
inline RgbImage render(std::size_t category, std::size_t instance, const DatasetConfig& config) {
  const std::size_t n = config.size;
  Rng rng(config.seed * 1000003ULL + category * 7919ULL + instance * 104729ULL + 17);
  const auto palette = category_palette(category);
  const Pattern pattern = category_pattern(category);

  const double rx = rng.uniform(config.object_min, config.object_max) * n;
  const double ry = rng.uniform(config.object_min, config.object_max) * n;
  const double cx = rng.uniform(rx, n - rx);
  const double cy = rng.uniform(ry, n - ry);
  std::vector<std::uint8_t> in_object(n * n);
  std::size_t object_area = 0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      object_area += in_object[y * n + x] = dx * dx + dy * dy <= 1.0;
    }
  }

  std::vector<std::uint32_t> tiles;
  std::vector<std::uint8_t> colour_of_pixel(n * n);
  // Redraw until every palette colour covers its minimum share of the object.
  for (int attempt = 0;; ++attempt) {
    const std::size_t tile_count = detail::tile_layout(pattern, n, rng, tiles);
    std::array<double, 4> weight{};
    double total = 0.0;
    for (auto& w : weight) {
      total += (w = 0.02 + std::pow(rng.uniform(), config.proportion_skew));
    }
    std::vector<std::uint8_t> tile_colour(tile_count);
    for (std::size_t t = 0; t < tile_count; ++t) {
      double u = rng.uniform() * total;
      std::uint8_t pick = 3;
      for (std::uint8_t k = 0; k < 4; ++k) {
        if ((u -= weight[k]) < 0.0) {
          pick = k;
          break;
        }
      }
      tile_colour[t] = pick;
    }
    std::array<std::size_t, 4> area{};
    for (std::size_t i = 0; i < n * n; ++i) {
      colour_of_pixel[i] = tile_colour[tiles[i]];
      if (in_object[i]) ++area[colour_of_pixel[i]];
    }
    const auto smallest = *std::min_element(area.begin(), area.end());
    if (smallest >= config.min_colour_share * object_area || attempt >= 200) break;
  }

  // Background: Voronoi regions in distinct off-palette colours.
  std::vector<std::size_t> off_palette;
  for (std::size_t c = 0; c < kPoolSize; ++c) {
    if (std::find(palette.begin(), palette.end(), c) == palette.end()) off_palette.push_back(c);
  }
  rng.shuffle(off_palette);
  const std::size_t bg_count = std::clamp<std::size_t>(config.background_colours, 1, off_palette.size());
  std::vector<std::pair<double, double>> bg_seeds(bg_count);
  for (auto& p : bg_seeds) p = {rng.uniform(0.0, n), rng.uniform(0.0, n)};
  auto background_at = [&](std::size_t x, std::size_t y) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < bg_count; ++i) {
      const double dx = bg_seeds[i].first - x, dy = bg_seeds[i].second - y;
      if (dx * dx + dy * dy < bd) {
        bd = dx * dx + dy * dy;
        best = i;
      }
    }
    return off_palette[best];
  };

  RgbImage img(n, n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t pool_index =
          in_object[y * n + x] ? palette[colour_of_pixel[y * n + x]] : background_at(x, y);
      const PoolColor base = pool_color(pool_index);
      double h = base.h + rng.uniform(-6.0, 6.0);
      double s = std::clamp(base.s + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      double v = std::clamp(base.v + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      // Shade texture: a darker or desaturated variant of the same hue.
      if (rng.uniform() < config.shade_probability) {
        if (pool_index % 2 == 0) {
          v = std::max(0.2, v - 0.35);
        } else {
          s = std::max(0.18, s - 0.35);
        }
      }
      if (h < 0.0) h += 360.0;
      const auto rgb = hsv_to_rgb(h, s, v);
      img.set(x, y, rgb[0], rgb[1], rgb[2]);
    }
  }
  return img;
}

/// Writes root/<category_name>/img_NNN.png for every image.
inline void write_dataset(const std::filesystem::path& root, const DatasetConfig& config) {
  for (std::size_t c = 0; c < config.categories; ++c) {
    const auto dir = root / category_name(c);
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < config.per_category; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "img_%03zu.png", i);
      write_png(render(c, i, config), dir / name);
    }
  }
}

}  // namespace segcbir::synthetic
