#include "losslab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "losslab/rng.hpp"

namespace losslab {

namespace {

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path,
                          std::size_t offset) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw ParseError(path + ": unexpected end of file at offset " +
                     std::to_string(offset));
  return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
         (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

std::vector<std::int64_t> count_labels(std::span<const int> labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_label + 1), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  constexpr std::uint32_t kImageMagic = 0x00000803;
  constexpr std::uint32_t kLabelMagic = 0x00000801;

  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ParseError(images_path + ": cannot open file");
  const std::uint32_t img_magic = read_u32_be(img, images_path, 0);
  if (img_magic != kImageMagic)
    throw ParseError(images_path + ": bad magic " + hex32(img_magic) +
                     " at offset 0 (expected " + hex32(kImageMagic) + ")");
  const std::uint32_t n_images = read_u32_be(img, images_path, 4);
  const std::uint32_t rows = read_u32_be(img, images_path, 8);
  const std::uint32_t cols = read_u32_be(img, images_path, 12);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ParseError(labels_path + ": cannot open file");
  const std::uint32_t lab_magic = read_u32_be(lab, labels_path, 0);
  if (lab_magic != kLabelMagic)
    throw ParseError(labels_path + ": bad magic " + hex32(lab_magic) +
                     " at offset 0 (expected " + hex32(kLabelMagic) + ")");
  const std::uint32_t n_labels = read_u32_be(lab, labels_path, 4);

  if (n_images != n_labels)
    throw ParseError(images_path + ": image count " + std::to_string(n_images) +
                     " does not match label count " + std::to_string(n_labels) +
                     " in " + labels_path);

  const std::size_t d = std::size_t(rows) * cols;
  LabeledDataset ds;
  ds.samples = Matrix(n_images, d);
  ds.labels.resize(n_images);

  std::vector<unsigned char> pixel_row(d);
  for (std::size_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel_row.data()),
                  static_cast<std::streamsize>(d)))
      throw ParseError(images_path + ": unexpected end of file at offset " +
                       std::to_string(16 + i * d));
    double* out = ds.samples.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) out[j] = pixel_row[j] / 255.0;
  }
  for (std::size_t i = 0; i < n_labels; ++i) {
    unsigned char byte;
    if (!lab.read(reinterpret_cast<char*>(&byte), 1))
      throw ParseError(labels_path + ": unexpected end of file at offset " +
                       std::to_string(8 + i));
    ds.labels[i] = byte;
  }
  ds.class_counts = count_labels(ds.labels);
  return ds;
}

LabeledDataset load_csv(const std::string& path, std::size_t label_column,
                        double feature_max) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  if (!(feature_max > 0.0))
    throw std::invalid_argument("load_csv: feature_max must be positive");

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || (ptr != end && *ptr != ','))
        throw ParseError(path + ": non-numeric cell at line " +
                         std::to_string(line_no));
      cells.push_back(v);
      if (ptr == end) break;
      p = ptr + 1;
      if (p == end)
        throw ParseError(path + ": trailing comma at line " + std::to_string(line_no));
    }
    if (width == 0)
      width = cells.size();
    else if (cells.size() != width)
      throw ParseError(path + ": ragged row at line " + std::to_string(line_no));
    rows.push_back(std::move(cells));
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw ParseError(path + ": empty dataset");
  if (width < 2) throw ParseError(path + ": rows need a label and at least one feature");
  if (label_column >= width)
    throw ParseError(path + ": label column " + std::to_string(label_column) +
                     " out of range for width " + std::to_string(width));

  LabeledDataset ds;
  const std::size_t d = width - 1;
  ds.samples = Matrix(rows.size(), d);
  ds.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double label_cell = rows[i][label_column];
    if (label_cell < 0 || label_cell != std::floor(label_cell))
      throw ParseError(path + ": label must be a non-negative integer at line " +
                       std::to_string(row_lines[i]));
    ds.labels[i] = static_cast<int>(label_cell);
    std::size_t out = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_column) continue;
      const double v = rows[i][c];
      if (v < 0.0 || v > feature_max)
        throw ParseError(path + ": feature outside [0, max] at line " +
                         std::to_string(row_lines[i]));
      ds.samples(i, out++) = v / feature_max;
    }
  }
  ds.class_counts = count_labels(ds.labels);
  return ds;
}

void save_csv(const std::string& path, const Matrix& samples,
              std::span<const int> labels, std::size_t label_column) {
  if (labels.size() != samples.rows())
    throw std::invalid_argument("save_csv: label count does not match rows");
  if (label_column > samples.cols())
    throw std::invalid_argument("save_csv: label column out of range");
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open file for writing");
  char buf[32];
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    std::size_t col = 0;
    for (std::size_t slot = 0; slot < samples.cols() + 1; ++slot) {
      if (slot) out << ',';
      if (slot == label_column) {
        out << labels[i];
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", samples(i, col++));
        out << buf;
      }
    }
    out << '\n';
  }
}

LabeledDataset make_long_tail(const LabeledDataset& ds, double factor,
                              std::span<const int> class_order) {
  if (!(factor > 0.0) || factor > 1.0)
    throw std::invalid_argument("long tail: factor must be in (0, 1]");
  const std::size_t n = ds.num_classes();

  std::vector<int> order(class_order.begin(), class_order.end());
  if (order.empty()) {
    order.resize(n);
    for (std::size_t j = 0; j < n; ++j) order[j] = static_cast<int>(j);
  }
  if (order.size() != n)
    throw std::invalid_argument("long tail: class order must cover every class");
  std::vector<bool> seen(n, false);
  for (int c : order) {
    if (c < 0 || static_cast<std::size_t>(c) >= n || seen[static_cast<std::size_t>(c)])
      throw std::invalid_argument("long tail: class order is not a permutation");
    seen[static_cast<std::size_t>(c)] = true;
  }

  // keep[c] = floor(s_c * f^j); the 1e-9 nudge absorbs the ~1 ulp rounding of
  // the repeated multiplication so exact-integer products do not floor short.
  std::vector<std::int64_t> keep(n, 0);
  double f_pow = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto cls = static_cast<std::size_t>(order[j]);
    const auto kept = static_cast<std::int64_t>(std::floor(
        static_cast<double>(ds.class_counts[cls]) * f_pow + 1e-9));
    if (kept < 1)
      throw std::invalid_argument("long tail: factor keeps zero samples of class " +
                                  std::to_string(cls));
    keep[cls] = kept;
    f_pow *= factor;
  }

  std::vector<std::size_t> selected;
  std::vector<std::int64_t> taken(n, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto cls = static_cast<std::size_t>(ds.labels[i]);
    if (taken[cls] < keep[cls]) {
      ++taken[cls];
      selected.push_back(i);
    }
  }

  LabeledDataset out;
  out.samples = Matrix(selected.size(), ds.feature_count());
  out.labels.resize(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto src = selected[i];
    std::copy_n(ds.samples.data() + src * ds.feature_count(), ds.feature_count(),
                out.samples.data() + i * ds.feature_count());
    out.labels[i] = ds.labels[src];
  }
  out.class_counts = count_labels(out.labels);
  return out;
}

LabeledDataset take_first(const LabeledDataset& ds, std::size_t count) {
  if (count >= ds.size()) return ds;
  LabeledDataset out;
  out.samples = Matrix(count, ds.feature_count());
  std::copy_n(ds.samples.data(), count * ds.feature_count(), out.samples.data());
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<long>(count));
  out.class_counts = count_labels(out.labels);
  return out;
}

Matrix gen_uniform_noise(std::size_t feature_count, std::size_t sample_count,
                         std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(sample_count, feature_count);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

Matrix gen_pixel_permutation(const LabeledDataset& ds, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(ds.feature_count());
  Matrix out(ds.size(), ds.feature_count());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.feature_count(); ++j)
      out(i, j) = ds.samples(i, perm[j]);
  return out;
}

}  // namespace losslab
