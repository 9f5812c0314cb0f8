#pragma once

// Image decoding / encoding through OpenCV's codecs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "segcbir/color_features.hpp"
#include "segcbir/errors.hpp"

namespace segcbir {

/// Interleaved 8-bit RGB image.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g,
           std::uint8_t b) {
    const std::size_t i = 3 * (y * width + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }

  HsvImage to_hsv() const { return HsvImage::from_rgb(width, height, rgb); }
};

namespace detail {

inline RgbImage from_bgr_mat(const cv::Mat& bgr) {
  RgbImage out(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows));
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), row[x][2],
              row[x][1], row[x][0]);
    }
  }
  return out;
}

inline cv::Mat to_bgr_mat(const RgbImage& img) {
  cv::Mat mat(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3);
  for (std::size_t y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t i = 3 * (y * img.width + x);
      row[x] = cv::Vec3b(img.rgb[i + 2], img.rgb[i + 1], img.rgb[i]);
    }
  }
  return mat;
}

}  // namespace detail

inline RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError("empty image buffer");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw DecodeError("undecodable image data");
  return detail::from_bgr_mat(bgr);
}

inline RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DecodeError("cannot decode image: " + path.string());
  return detail::from_bgr_mat(bgr);
}

inline void write_png(const RgbImage& img, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), detail::to_bgr_mat(img))) {
    throw DecodeError("cannot write image: " + path.string());
  }
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", detail::to_bgr_mat(img), out)) {
    throw DecodeError("png encoding failed");
  }
  return out;
}

/// Downscales so the longer side is at most `max_dim`; never upscales.
inline RgbImage make_thumbnail(const RgbImage& img, std::size_t max_dim = 256) {
  const std::size_t longest = std::max(img.width, img.height);
  if (longest <= max_dim) return img;
  const double scale = static_cast<double>(max_dim) / static_cast<double>(longest);
  const int w = std::max(1, static_cast<int>(std::lround(img.width * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height * scale)));
  cv::Mat small;
  cv::resize(detail::to_bgr_mat(img), small, cv::Size(std::min(w, static_cast<int>(max_dim)),
                                                      std::min(h, static_cast<int>(max_dim))),
             0, 0, cv::INTER_AREA);
  return detail::from_bgr_mat(small);
}

/// MIME type from the leading bytes of an encoded image.
inline std::string_view sniff_content_type(std::span<const std::uint8_t> bytes) {
  auto starts = [&](std::initializer_list<std::uint8_t> sig) {
    if (bytes.size() < sig.size()) return false;
    std::size_t i = 0;
    for (auto b : sig) {
      if (bytes[i++] != b) return false;
    }
    return true;
  };
  if (starts({0x89, 'P', 'N', 'G'})) return "image/png";
  if (starts({0xFF, 0xD8, 0xFF})) return "image/jpeg";
  if (starts({'G', 'I', 'F', '8'})) return "image/gif";
  if (starts({'B', 'M'})) return "image/bmp";
  if (starts({'P', '6'}) || starts({'P', '3'})) return "image/x-portable-pixmap";
  if (starts({'I', 'I', 0x2A, 0x00}) || starts({'M', 'M', 0x00, 0x2A})) return "image/tiff";
  if (starts({'R', 'I', 'F', 'F'})) return "image/webp";
  return "application/octet-stream";
}

}  // namespace segcbir
