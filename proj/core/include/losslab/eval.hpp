#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "losslab/losses.hpp"
#include "losslab/matrix.hpp"

namespace losslab {

enum class ConfidenceMethod { Msp, Mls };

std::string_view confidence_method_name(ConfidenceMethod method);

// msp: max softmax probability of the row (tau = 1).
// mls: max raw logit.
double msp(std::span<const double> logits);
double mls(std::span<const double> logits);
double confidence(std::span<const double> logits, ConfidenceMethod method);

// One confidence score per row.
std::vector<double> confidence_scores(const Matrix& logits, ConfidenceMethod method);

// Percent of rows whose argmax equals the label; argmax ties break toward
// the lowest index.
double accuracy(const LogitBatch& batch);

// Percent probability that a random known-class score ranks above a random
// unknown-class score, ties counted half (computed from ranks in
// O((a+b) log(a+b))). Throws std::invalid_argument if either side is empty.
double auroc(std::span<const double> known_scores,
             std::span<const double> unknown_scores);

// Largest threshold t on the empirical grid such that at least `rate` of the
// given scores satisfy score >= t.
double threshold_at_tpr(std::span<const double> scores, double rate = 0.95);

// Detection accuracy rate: a sample counts as handled correctly iff it is
// accepted (score >= threshold) with a correct prediction, or rejected with
// a wrong prediction. Returns a percentage.
double dar(const LogitBatch& adversarial, std::span<const double> scores,
           double threshold);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::int64_t> counts;

  double bin_low(std::size_t i) const;
  double bin_high(std::size_t i) const;
};

// Equal-width bins over [lo, hi]; out-of-range scores clamp to the edge
// bins, so the counts always sum to the number of scores.
Histogram confidence_histogram(std::span<const double> scores, std::size_t bins,
                               double lo, double hi);

}  // namespace losslab
