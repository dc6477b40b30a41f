#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "losslab/matrix.hpp"

namespace losslab {

// Raised for malformed dataset files; the message names the file and the
// byte offset or line where parsing stopped.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Feature matrix in [0,1] plus integer labels and per-class sample counts.
struct LabeledDataset {
  Matrix samples;                        // N x d
  std::vector<int> labels;               // N
  std::vector<std::int64_t> class_counts;  // one per class

  std::size_t size() const { return samples.rows(); }
  std::size_t feature_count() const { return samples.cols(); }
  std::size_t num_classes() const { return class_counts.size(); }
};

// Reads the big-endian IDX image/label container pair (magic 0x00000803 for
// images, 0x00000801 for labels). Pixels are mapped to [0,1] by dividing by
// 255. Throws ParseError on bad magic, truncation, or an image/label count
// mismatch.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Rectangular numeric CSV with one sample per line. The label lives in
// column `label_column`; every other cell is a feature scaled by
// 1/feature_max. Throws ParseError (with a 1-based line number) on ragged
// rows, non-numeric cells, or values outside [0, feature_max].
LabeledDataset load_csv(const std::string& path, std::size_t label_column = 0,
                        double feature_max = 255.0);

// Writes the dataset in the same CSV layout (features stored unscaled, so
// read back with feature_max = 1).
void save_csv(const std::string& path, const Matrix& samples,
              std::span<const int> labels, std::size_t label_column = 0);

// Keeps the first floor(s_j * f^j) samples (in original file order) of the
// class at ordered position j. `class_order` permutes which class gets which
// exponent; empty means ascending label order. Throws std::invalid_argument
// if any kept-count would be zero.
LabeledDataset make_long_tail(const LabeledDataset& ds, double factor,
                              std::span<const int> class_order = {});

// First `count` samples in file order.
LabeledDataset take_first(const LabeledDataset& ds, std::size_t count);

// N x d i.i.d. uniform noise on [0,1], deterministic per seed.
Matrix gen_uniform_noise(std::size_t feature_count, std::size_t sample_count,
                         std::uint64_t seed);

// One fixed random permutation of the feature positions applied to every
// sample of the dataset.
Matrix gen_pixel_permutation(const LabeledDataset& ds, std::uint64_t seed);

std::vector<std::int64_t> count_labels(std::span<const int> labels);

}  // namespace losslab
