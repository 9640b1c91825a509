#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "featline/errors.hpp"
#include "featline/matcore.hpp"
#include "featline/rng.hpp"

namespace featline {

// ---------------------------------------------------------------------------
// PGM codec

namespace detail {

class PgmCursor {
 public:
  explicit PgmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads an unsigned decimal.
  std::uint64_t header_number(const char* field) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw ParseError(field, "unexpected end of header");
    if (!std::isdigit(bytes_[pos_])) {
      throw ParseError(field, std::string("expected a decimal number, found '") +
                                  static_cast<char>(bytes_[pos_]) + "'");
    }
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 0xffffffffULL) throw ParseError(field, "value out of range");
      ++pos_;
    }
    return v;
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // The single whitespace byte separating maxval from a binary raster.
  void single_whitespace(const char* field) {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError(field, "missing whitespace before raster");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::uint8_t take() noexcept { return bytes_[pos_++]; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Decodes a binary (P5) or plain (P2) PGM; entries are scaled by 1/maxval.
inline Mat load_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError("magic", "expected P2 or P5");
  }
  const bool binary = bytes[1] == '5';
  detail::PgmCursor cur(bytes.subspan(2));

  const auto width = cur.header_number("width");
  const auto height = cur.header_number("height");
  const auto maxval = cur.header_number("maxval");
  if (width == 0) throw ParseError("width", "must be positive");
  if (height == 0) throw ParseError("height", "must be positive");
  if (maxval == 0) throw ParseError("maxval", "must be positive");
  if (maxval > 65535) throw ParseError("maxval", "exceeds 65535");

  Mat out(height, width);
  auto px = out.data();
  const double inv = 1.0 / static_cast<double>(maxval);
  const auto check = [&](std::uint64_t v) {
    if (v > maxval) {
      throw ParseError("raster", "sample " + std::to_string(v) +
                                     " exceeds maxval " + std::to_string(maxval));
    }
    return static_cast<double>(v) * inv;
  };

  if (binary) {
    cur.single_whitespace("maxval");
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (cur.remaining() < px.size() * bps) {
      throw ParseError("raster", "truncated payload: need " +
                                     std::to_string(px.size() * bps) +
                                     " bytes, have " + std::to_string(cur.remaining()));
    }
    for (double& p : px) {
      std::uint64_t v = cur.take();
      if (bps == 2) v = (v << 8) | cur.take();  // big-endian
      p = check(v);
    }
  } else {
    for (std::size_t k = 0; k < px.size(); ++k) {
      cur.skip_space_and_comments();
      if (cur.remaining() == 0) {
        throw ParseError("raster", "truncated payload after " + std::to_string(k) +
                                       " of " + std::to_string(px.size()) + " samples");
      }
      px[k] = check(cur.header_number("raster"));
    }
  }
  return out;
}

inline Mat load_pgm(std::string_view bytes) {
  return load_pgm(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Mat load_pgm_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return load_pgm(std::span<const std::uint8_t>(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e.what());
  }
}

/// Encodes entries in [0,1] as a PGM with the given maxval (values are
/// rounded and clamped).
inline std::string encode_pgm(const Mat& m, std::uint32_t maxval = 255,
                              bool binary = true) {
  if (m.empty()) throw ShapeError("cannot encode an empty image");
  if (maxval == 0 || maxval > 65535) throw ShapeError("maxval out of range");
  std::string out = std::string(binary ? "P5" : "P2") + "\n" +
                    std::to_string(m.cols()) + " " + std::to_string(m.rows()) +
                    "\n" + std::to_string(maxval) + "\n";
  std::size_t k = 0;
  for (double v : m.data()) {
    const auto q = static_cast<std::uint32_t>(
        std::lround(std::clamp(v, 0.0, 1.0) * static_cast<double>(maxval)));
    if (binary) {
      if (maxval > 255) out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    } else {
      out += std::to_string(q);
      out.push_back(++k % m.cols() == 0 ? '\n' : ' ');
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

/// Bilinear resampling on a corner-aligned grid: target index t maps to
/// source coordinate t·(src−1)/(dst−1), or 0 when dst is 1.
inline Mat resize_bilinear(const Mat& m, std::size_t out_rows, std::size_t out_cols) {
  if (m.empty()) throw ShapeError("cannot resize an empty matrix");
  if (out_rows == 0 || out_cols == 0) throw ShapeError("resize target must be positive");

  const auto coord = [](std::size_t t, std::size_t src, std::size_t dst) {
    if (dst == 1) return 0.0;
    return static_cast<double>(t * (src - 1)) / static_cast<double>(dst - 1);
  };

  Mat out(out_rows, out_cols);
  for (std::size_t i = 0; i < out_rows; ++i) {
    const double y = coord(i, m.rows(), out_rows);
    const auto r0 = static_cast<std::size_t>(y);
    const std::size_t r1 = std::min(r0 + 1, m.rows() - 1);
    const double fy = y - static_cast<double>(r0);
    for (std::size_t j = 0; j < out_cols; ++j) {
      const double x = coord(j, m.cols(), out_cols);
      const auto c0 = static_cast<std::size_t>(x);
      const std::size_t c1 = std::min(c0 + 1, m.cols() - 1);
      const double fx = x - static_cast<double>(c0);
      const double top = m(r0, c0) + fx * (m(r0, c1) - m(r0, c0));
      const double bot = m(r1, c0) + fx * (m(r1, c1) - m(r1, c0));
      out(i, j) = top + fy * (bot - top);
    }
  }
  return out;
}

/// Column-stacking (column 0 first) into a (rows·cols)×1 vector.
inline Mat vectorize(const Mat& m) {
  Mat v(m.size(), 1);
  std::size_t k = 0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) v(k++, 0) = m(i, j);
  return v;
}

// ---------------------------------------------------------------------------
// Labeled datasets

struct ImageSample {
  Mat pixels;
  int label = 0;
};

/// Immutable ordered collection of equally-shaped labeled matrices.
///
/// Besides raw images this also carries extracted features, so the [0,1]
/// pixel range is enforced by the loaders rather than here.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  explicit LabeledDataset(std::vector<ImageSample> samples,
                          std::vector<std::string> class_names = {})
      : samples_(std::move(samples)), class_names_(std::move(class_names)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (s.pixels.empty()) throw ShapeError("sample " + std::to_string(i) + " is empty");
      if (!samples_[0].pixels.same_shape(s.pixels)) {
        throw ShapeError("sample " + std::to_string(i) + " is " +
                         s.pixels.shape_string() + ", expected " +
                         samples_[0].pixels.shape_string());
      }
      if (s.label < 0) throw ShapeError("negative label at sample " + std::to_string(i));
      classes_[s.label].push_back(i);
    }
  }

  /// Builds a dataset from parallel matrix/label lists.
  static LabeledDataset from(std::span<const Mat> mats, std::span<const int> labels) {
    if (mats.size() != labels.size()) throw ShapeError("matrix/label count mismatch");
    std::vector<ImageSample> s;
    s.reserve(mats.size());
    for (std::size_t i = 0; i < mats.size(); ++i) s.push_back({mats[i], labels[i]});
    return LabeledDataset(std::move(s));
  }

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t rows() const noexcept { return empty() ? 0 : samples_[0].pixels.rows(); }
  std::size_t cols() const noexcept { return empty() ? 0 : samples_[0].pixels.cols(); }

  const std::vector<ImageSample>& samples() const noexcept { return samples_; }
  const Mat& matrix(std::size_t i) const { return samples_.at(i).pixels; }
  int label(std::size_t i) const { return samples_.at(i).label; }

  /// label -> member indices, both in ascending order.
  const std::map<int, std::vector<std::size_t>>& classes() const noexcept { return classes_; }
  std::size_t class_count() const noexcept { return classes_.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(size());
    for (const auto& s : samples_) out.push_back(s.label);
    return out;
  }

  std::vector<Mat> matrices() const {
    std::vector<Mat> out;
    out.reserve(size());
    for (const auto& s : samples_) out.push_back(s.pixels);
    return out;
  }

  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    std::vector<ImageSample> s;
    s.reserve(indices.size());
    for (std::size_t i : indices) s.push_back(samples_.at(i));
    return LabeledDataset(std::move(s), class_names_);
  }

  /// Applies f to every matrix, keeping labels.
  template <typename F>
  LabeledDataset map(F&& f) const {
    std::vector<ImageSample> s;
    s.reserve(size());
    for (const auto& x : samples_) s.push_back({f(x.pixels), x.label});
    return LabeledDataset(std::move(s), class_names_);
  }

 private:
  std::vector<ImageSample> samples_;
  std::map<int, std::vector<std::size_t>> classes_;
  std::vector<std::string> class_names_;
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_indices;  // into the source dataset
  std::vector<std::size_t> test_indices;
};

/// Picks per_class_train members of each class for training, the rest for
/// test. Classes are visited in label order and each one's members are
/// shuffled with a SplitMix64 stream seeded by `seed`.
inline DatasetSplit split_random(const LabeledDataset& d, std::size_t per_class_train,
                                 std::uint64_t seed) {
  for (const auto& [label, members] : d.classes()) {
    if (members.size() <= per_class_train) {
      throw InsufficientDataError(
          "class " + std::to_string(label) + " has " + std::to_string(members.size()) +
          " samples, need more than " + std::to_string(per_class_train));
    }
  }
  SplitMix64 rng(seed);
  DatasetSplit out;
  for (const auto& [label, members] : d.classes()) {
    std::vector<std::size_t> order = members;
    rng.shuffle(std::span<std::size_t>(order));
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(per_class_train));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(per_class_train), order.end());
    out.train_indices.insert(out.train_indices.end(), order.begin(),
                             order.begin() + static_cast<std::ptrdiff_t>(per_class_train));
    out.test_indices.insert(out.test_indices.end(),
                            order.begin() + static_cast<std::ptrdiff_t>(per_class_train),
                            order.end());
  }
  out.train = d.subset(out.train_indices);
  out.test = d.subset(out.test_indices);
  return out;
}

/// Loads `<root>/<class_name>/<image>.pgm`, labelling classes 0,1,... by
/// sorted directory name and resizing every image to rows×cols.
inline LabeledDataset load_directory(const std::filesystem::path& root, std::size_t rows,
                                     std::size_t cols) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root " + root.string() + " is not a directory");

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("no class directories under " + root.string());

  std::vector<ImageSample> samples;
  std::vector<std::string> names;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) continue;
    const int label = static_cast<int>(names.size());
    names.push_back(dir.filename().string());
    for (const auto& f : files) {
      Mat img = load_pgm_file(f);
      if (img.rows() != rows || img.cols() != cols) img = resize_bilinear(img, rows, cols);
      samples.push_back({std::move(img), label});
    }
  }
  if (samples.empty()) throw IoError("no .pgm images under " + root.string());
  return LabeledDataset(std::move(samples), std::move(names));
}

}  // namespace featline
