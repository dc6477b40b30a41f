#pragma once

#include <span>
#include <vector>

namespace losslab {

// Numerically stable primitives shared by all the losses. Pure functions,
// safe for concurrent use.

// z_j = exp(y_j / tau) / sum_i exp(y_i / tau). The maximum is subtracted
// before exponentiating, so no intermediate overflows even for extreme
// logit/temperature ratios. Throws std::invalid_argument on non-finite
// input or tau <= 0.
std::vector<double> softmax(std::span<const double> logits, double tau = 1.0);

// (y/tau - max) - log(sum exp(y/tau - max)); equals log(softmax) entrywise
// without ever forming the potentially underflowing probabilities.
std::vector<double> log_softmax(std::span<const double> logits, double tau = 1.0);

// y / max(||y||_2, eps). The eps floor keeps the zero vector fixed instead
// of dividing by zero.
std::vector<double> l2_normalize(std::span<const double> values, double eps = 1e-12);

double l2_norm(std::span<const double> values);

std::vector<double> one_hot(int index, std::size_t size);

bool all_finite(std::span<const double> values);

}  // namespace losslab
