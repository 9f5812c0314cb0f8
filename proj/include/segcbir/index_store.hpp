#pragma once

// Persistent feature index: global descriptors, segment sets and category
// labels for every image under a category-per-subdirectory root.
//
// File layout (all integers little-endian, reals IEEE-754 binary64):
//
//   "SGSX"            magic
//   u16               version (1)
//   u16               feature dimension (25)
//   u64               seed
//   u32 x 6           block_h, block_w, k, levels_h, levels_s, levels_v
//   str               image root
//   u32, str*         category count, category names
//   f64[25] x 4       global min, global max, segment min, segment max
//   u32               image count
//   per image:
//     u32 id, u32 category, str path, u32 block_count, f64[25] global,
//     u32 segment count, per segment: u32 member count, f64[25] centroid
//
// where str is a u32 byte length followed by UTF-8 bytes.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/errors.hpp"
#include "segcbir/image_io.hpp"
#include "segcbir/parallel.hpp"
#include "segcbir/relevance_feedback.hpp"
#include "segcbir/segmentation.hpp"

namespace segcbir {

inline constexpr char kIndexMagic[4] = {'S', 'G', 'S', 'X'};
inline constexpr std::uint16_t kIndexVersion = 1;

struct IndexBuildConfig {
  std::uint64_t seed = 0;
  std::size_t block_h = kDefaultBlockSize;
  std::size_t block_w = kDefaultBlockSize;
  std::size_t k = kDefaultClusters;
  std::size_t workers = default_worker_count();
};

struct BuildMetadata {
  std::uint64_t seed = 0;
  std::uint32_t block_h = kDefaultBlockSize;
  std::uint32_t block_w = kDefaultBlockSize;
  std::uint32_t k = kDefaultClusters;
  std::uint32_t levels_h = kHueLevels;
  std::uint32_t levels_s = kSatLevels;
  std::uint32_t levels_v = kValLevels;
  std::string root;

  bool operator==(const BuildMetadata&) const = default;
};

/// Per-dimension min-max scaling to [0, 1]. Constant dimensions map to 0.
struct Normalization {
  FeatureVector min{};
  FeatureVector max{};

  FeatureVector apply(const FeatureVector& x) const {
    FeatureVector out{};
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      const double span = max[j] - min[j];
      out[j] = span > 0.0 ? (x[j] - min[j]) / span : 0.0;
    }
    return out;
  }

  static Normalization fit(std::span<const FeatureVector> xs) {
    Normalization n;
    if (xs.empty()) return n;
    n.min = n.max = xs[0];
    for (const auto& x : xs) {
      for (std::size_t j = 0; j < kFeatureDim; ++j) {
        n.min[j] = std::min(n.min[j], x[j]);
        n.max[j] = std::max(n.max[j], x[j]);
      }
    }
    return n;
  }

  bool operator==(const Normalization&) const = default;
};

struct ImageRecord {
  ImageId id = 0;
  std::uint32_t category = 0;
  std::string path;  // relative to the image root, '/' separated
  std::uint32_t block_count = 0;
  FeatureVector global{};
  SegmentSet segments;

  bool operator==(const ImageRecord&) const = default;
};

struct FeatureIndex {
  BuildMetadata meta;
  std::vector<std::string> categories;
  Normalization global_norm;
  Normalization segment_norm;
  std::vector<ImageRecord> images;

  std::size_t size() const { return images.size(); }

  std::filesystem::path image_path(ImageId id) const {
    return std::filesystem::path(meta.root) / images.at(id).path;
  }

  std::vector<std::uint32_t> category_sizes() const {
    std::vector<std::uint32_t> sizes(categories.size(), 0);
    for (const auto& img : images) ++sizes.at(img.category);
    return sizes;
  }

  bool operator==(const FeatureIndex&) const = default;
};

/// Global descriptor, block count and segment set of one image.
struct ImageFeatures {
  FeatureVector global{};
  std::uint32_t block_count = 0;
  SegmentSet segments;
};

/// Per-image k-means seed derived from the build seed (splitmix64 finalizer).
inline std::uint64_t image_seed(std::uint64_t seed, std::uint64_t image_id) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (image_id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline ImageFeatures analyze_image(const HsvImage& hsv, const IndexBuildConfig& config,
                                   std::uint64_t kmeans_seed, ImageId id = 0) {
  ImageFeatures out;
  out.global = extract_features(hsv);
  const auto blocks = split_blocks(hsv, config.block_h, config.block_w);
  out.block_count = static_cast<std::uint32_t>(blocks.size());
  out.segments = kmeans_segment(blocks, config.k, kmeans_seed, id);
  return out;
}

struct BuildResult {
  FeatureIndex index;
  std::vector<std::string> warnings;
};

/// Refits the global and segment normalizations from the stored records.
inline void fit_normalizations(FeatureIndex& index) {
  std::vector<FeatureVector> globals;
  std::vector<FeatureVector> segs;
  for (const auto& img : index.images) {
    globals.push_back(img.global);
    segs.insert(segs.end(), img.segments.segments.begin(), img.segments.segments.end());
  }
  index.global_norm = Normalization::fit(globals);
  index.segment_norm = Normalization::fit(segs);
}

/// Indexes every decodable image in the immediate subdirectories of `root`.
/// Categories are the subdirectory names in sorted order; ids are dense in
/// (category, file name) order.
inline BuildResult build_index(const std::filesystem::path& root,
                               const IndexBuildConfig& config = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw DomainError("image root is not a directory: " + root.string());
  }
  std::vector<fs::path> category_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) category_dirs.push_back(entry.path());
  }
  std::sort(category_dirs.begin(), category_dirs.end());

  struct Candidate {
    std::uint32_t category;
    fs::path path;
  };
  std::vector<Candidate> candidates;
  std::vector<std::string> names;
  for (const auto& dir : category_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const auto category = static_cast<std::uint32_t>(names.size());
    names.push_back(dir.filename().string());
    for (auto& f : files) candidates.push_back({category, std::move(f)});
  }

  struct Slot {
    bool ok = false;
    std::string error;
    ImageFeatures features;
  };
  std::vector<Slot> slots(candidates.size());
  parallel_for(
      candidates.size(),
      [&](std::size_t i) {
        try {
          const HsvImage hsv = read_image(candidates[i].path).to_hsv();
          // Ids are not known until failures are filtered, so the k-means seed
          // is keyed by the candidate position instead.
          slots[i].features = analyze_image(hsv, config, image_seed(config.seed, i));
          slots[i].ok = true;
        } catch (const std::exception& e) {
          slots[i].error = e.what();
        }
      },
      config.workers);

  BuildResult result;
  FeatureIndex& index = result.index;
  index.meta.seed = config.seed;
  index.meta.block_h = static_cast<std::uint32_t>(config.block_h);
  index.meta.block_w = static_cast<std::uint32_t>(config.block_w);
  index.meta.k = static_cast<std::uint32_t>(config.k);
  index.meta.root = fs::absolute(root).lexically_normal().generic_string();
  if (!index.meta.root.empty() && index.meta.root.back() == '/' && index.meta.root.size() > 1) {
    index.meta.root.pop_back();
  }

  // Keep only categories that ended up with at least one image.
  std::vector<std::int64_t> remap(names.size(), -1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!slots[i].ok) {
      result.warnings.push_back("skipped " + candidates[i].path.string() + ": " +
                                slots[i].error);
      continue;
    }
    auto& cat = remap[candidates[i].category];
    if (cat < 0) {
      cat = static_cast<std::int64_t>(index.categories.size());
      index.categories.push_back(names[candidates[i].category]);
    }
    ImageRecord rec;
    rec.id = static_cast<ImageId>(index.images.size());
    rec.category = static_cast<std::uint32_t>(cat);
    rec.path = fs::relative(candidates[i].path, root).generic_string();
    rec.block_count = slots[i].features.block_count;
    rec.global = slots[i].features.global;
    rec.segments = std::move(slots[i].features.segments);
    rec.segments.image_id = rec.id;
    index.images.push_back(std::move(rec));
  }
  if (index.images.empty()) {
    throw DomainError("no decodable images under " + root.string());
  }

  fit_normalizations(index);
  return result;
}

namespace detail {

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(std::span<const char> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  void vec(const FeatureVector& v) {
    for (double x : v) f64(x);
  }
  const std::vector<char>& bytes() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  FeatureVector vec() {
    FeatureVector v{};
    for (auto& x : v) x = f64();
    return v;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CorruptionError("index file is truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_index(const FeatureIndex& index) {
  detail::ByteWriter w;
  w.raw(kIndexMagic);
  w.u16(kIndexVersion);
  w.u16(static_cast<std::uint16_t>(kFeatureDim));
  w.u64(index.meta.seed);
  w.u32(index.meta.block_h);
  w.u32(index.meta.block_w);
  w.u32(index.meta.k);
  w.u32(index.meta.levels_h);
  w.u32(index.meta.levels_s);
  w.u32(index.meta.levels_v);
  w.str(index.meta.root);
  w.u32(static_cast<std::uint32_t>(index.categories.size()));
  for (const auto& c : index.categories) w.str(c);
  w.vec(index.global_norm.min);
  w.vec(index.global_norm.max);
  w.vec(index.segment_norm.min);
  w.vec(index.segment_norm.max);
  w.u32(static_cast<std::uint32_t>(index.images.size()));
  for (const auto& img : index.images) {
    w.u32(img.id);
    w.u32(img.category);
    w.str(img.path);
    w.u32(img.block_count);
    w.vec(img.global);
    w.u32(static_cast<std::uint32_t>(img.segments.size()));
    for (std::size_t s = 0; s < img.segments.size(); ++s) {
      w.u32(img.segments.member_counts[s]);
      w.vec(img.segments.segments[s]);
    }
  }
  return w.bytes();
}

inline FeatureIndex deserialize_index(std::span<const char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kIndexMagic, 4) != 0) {
    throw FormatError("not a segcbir index (bad magic)");
  }
  detail::ByteReader r(bytes.subspan(4));
  if (const auto version = r.u16(); version != kIndexVersion) {
    throw FormatError("unsupported index version " + std::to_string(version));
  }
  if (r.u16() != kFeatureDim) throw FormatError("unsupported feature dimension");

  FeatureIndex index;
  index.meta.seed = r.u64();
  index.meta.block_h = r.u32();
  index.meta.block_w = r.u32();
  index.meta.k = r.u32();
  index.meta.levels_h = r.u32();
  index.meta.levels_s = r.u32();
  index.meta.levels_v = r.u32();
  index.meta.root = r.str();
  const std::uint32_t ncat = r.u32();
  if (ncat > r.remaining()) throw CorruptionError("category count exceeds file size");
  for (std::uint32_t i = 0; i < ncat; ++i) index.categories.push_back(r.str());
  index.global_norm.min = r.vec();
  index.global_norm.max = r.vec();
  index.segment_norm.min = r.vec();
  index.segment_norm.max = r.vec();
  const std::uint32_t nimg = r.u32();
  if (nimg > r.remaining()) throw CorruptionError("image count exceeds file size");
  index.images.reserve(nimg);
  for (std::uint32_t i = 0; i < nimg; ++i) {
    ImageRecord img;
    img.id = r.u32();
    if (img.id != i) throw CorruptionError("image ids are not dense");
    img.category = r.u32();
    if (img.category >= ncat) throw CorruptionError("category id out of range");
    img.path = r.str();
    img.block_count = r.u32();
    img.global = r.vec();
    const std::uint32_t nseg = r.u32();
    if (nseg == 0 || nseg > index.meta.k) {
      throw CorruptionError("segment count out of range");
    }
    img.segments.image_id = img.id;
    for (std::uint32_t s = 0; s < nseg; ++s) {
      img.segments.member_counts.push_back(r.u32());
      img.segments.segments.push_back(r.vec());
    }
    index.images.push_back(std::move(img));
  }
  if (!r.at_end()) throw CorruptionError("trailing bytes after index records");
  return index;
}

inline void save_index(const FeatureIndex& index, const std::filesystem::path& path) {
  const auto bytes = serialize_index(index);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline FeatureIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index: " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return deserialize_index(bytes);
}

/// Sidecar manifest: one "category_id<TAB>name<TAB>count" line per category.
inline std::string manifest_text(const FeatureIndex& index) {
  std::string out;
  const auto sizes = index.category_sizes();
  for (std::size_t c = 0; c < index.categories.size(); ++c) {
    out += std::to_string(c) + '\t' + index.categories[c] + '\t' +
           std::to_string(sizes[c]) + '\n';
  }
  return out;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& index_path) {
  auto p = index_path;
  p += ".manifest.tsv";
  return p;
}

inline void write_manifest(const FeatureIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << manifest_text(index);
}

}  // namespace segcbir
