#include "losslab/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace losslab {

namespace {

void check_softmax_args(std::span<const double> logits, double tau) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("softmax: temperature must be positive");
  if (!all_finite(logits))
    throw std::invalid_argument("softmax: non-finite logit");
}

}  // namespace

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> softmax(std::span<const double> logits, double tau) {
  check_softmax_args(logits, tau);
  const double scale = 1.0 / tau;
  double max_scaled = logits[0] * scale;
  for (double y : logits) max_scaled = std::max(max_scaled, y * scale);

  std::vector<double> z(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    z[j] = std::exp(logits[j] * scale - max_scaled);
    sum += z[j];
  }
  for (double& v : z) v /= sum;
  return z;
}

std::vector<double> log_softmax(std::span<const double> logits, double tau) {
  check_softmax_args(logits, tau);
  const double scale = 1.0 / tau;
  double max_scaled = logits[0] * scale;
  for (double y : logits) max_scaled = std::max(max_scaled, y * scale);

  std::vector<double> shifted(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    shifted[j] = logits[j] * scale - max_scaled;
    sum += std::exp(shifted[j]);
  }
  const double log_sum = std::log(sum);
  for (double& v : shifted) v -= log_sum;
  return shifted;
}

double l2_norm(std::span<const double> values) {
  double sum_sq = 0.0;
  for (double v : values) sum_sq += v * v;
  return std::sqrt(sum_sq);
}

std::vector<double> l2_normalize(std::span<const double> values, double eps) {
  const double denom = std::max(l2_norm(values), eps);
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v /= denom;
  return out;
}

std::vector<double> one_hot(int index, std::size_t size) {
  std::vector<double> t(size, 0.0);
  t.at(static_cast<std::size_t>(index)) = 1.0;
  return t;
}

}  // namespace losslab
