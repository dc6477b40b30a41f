#include "losslab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "losslab/core_math.hpp"

namespace losslab {

std::string_view confidence_method_name(ConfidenceMethod method) {
  return method == ConfidenceMethod::Msp ? "msp" : "mls";
}

double msp(std::span<const double> logits) {
  const auto z = softmax(logits, 1.0);
  return *std::max_element(z.begin(), z.end());
}

double mls(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("mls: empty logits");
  return *std::max_element(logits.begin(), logits.end());
}

double confidence(std::span<const double> logits, ConfidenceMethod method) {
  return method == ConfidenceMethod::Msp ? msp(logits) : mls(logits);
}

std::vector<double> confidence_scores(const Matrix& logits, ConfidenceMethod method) {
  std::vector<double> scores(logits.rows());
  for (std::size_t b = 0; b < logits.rows(); ++b)
    scores[b] = confidence(logits.row(b), method);
  return scores;
}

namespace {

int argmax_lowest(std::span<const double> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

}  // namespace

double accuracy(const LogitBatch& batch) {
  batch.validate();
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batch.batch_size(); ++b)
    if (argmax_lowest(batch.logits.row(b)) == batch.labels[b]) ++correct;
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(batch.batch_size());
}

double auroc(std::span<const double> known_scores,
             std::span<const double> unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw std::invalid_argument("auroc: both score sets must be non-empty");

  // Mann-Whitney rank statistic with average ranks over tie groups.
  struct Entry {
    double score;
    bool known;
  };
  std::vector<Entry> all;
  all.reserve(known_scores.size() + unknown_scores.size());
  for (double s : known_scores) all.push_back({s, true});
  for (double s : unknown_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double known_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (all[k].known) known_rank_sum += avg_rank;
    i = j;
  }

  const auto a = static_cast<double>(known_scores.size());
  const auto b = static_cast<double>(unknown_scores.size());
  const double u = known_rank_sum - a * (a + 1.0) / 2.0;
  return 100.0 * u / (a * b);
}

double threshold_at_tpr(std::span<const double> scores, double rate) {
  if (scores.empty()) throw std::invalid_argument("threshold_at_tpr: no scores");
  if (!(rate > 0.0) || rate > 1.0)
    throw std::invalid_argument("threshold_at_tpr: rate must be in (0, 1]");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // smallest count that still covers the requested fraction; the tiny slack
  // keeps exact grid fractions like 0.95 * 100 from rounding up
  const auto required = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(sorted.size()) - 1e-9));
  return sorted[std::max<std::size_t>(required, 1) - 1];
}

double dar(const LogitBatch& adversarial, std::span<const double> scores,
           double threshold) {
  adversarial.validate();
  if (scores.size() != adversarial.batch_size())
    throw std::invalid_argument("dar: score count does not match batch");
  std::size_t handled = 0;
  for (std::size_t b = 0; b < adversarial.batch_size(); ++b) {
    const bool accepted = scores[b] >= threshold;
    const bool correct =
        argmax_lowest(adversarial.logits.row(b)) == adversarial.labels[b];
    if (accepted == correct) ++handled;
  }
  return 100.0 * static_cast<double>(handled) /
         static_cast<double>(adversarial.batch_size());
}

double Histogram::bin_low(std::size_t i) const {
  const double width = (hi - lo) / static_cast<double>(counts.size());
  return lo + width * static_cast<double>(i);
}

double Histogram::bin_high(std::size_t i) const {
  const double width = (hi - lo) / static_cast<double>(counts.size());
  return lo + width * static_cast<double>(i + 1);
}

Histogram confidence_histogram(std::span<const double> scores, std::size_t bins,
                               double lo, double hi) {
  if (bins == 0) throw std::invalid_argument("histogram: need at least one bin");
  if (!(hi > lo)) throw std::invalid_argument("histogram: range must be non-empty");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double s : scores) {
    auto idx = static_cast<long>(std::floor((s - lo) / width));
    idx = std::clamp<long>(idx, 0, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

}  // namespace losslab
