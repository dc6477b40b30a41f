#include "losslab/attack.hpp"

#include <algorithm>
#include <cmath>

#include "losslab/core_math.hpp"

namespace losslab {

void AttackSpec::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("attack: epsilon must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("attack: alpha must be positive");
  if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Matrix gradient_sign_attack(const MlpModel& model, const LossSpec& loss,
                            const Matrix& inputs, std::span<const int> labels,
                            const AttackSpec& spec) {
  spec.validate();
  if (labels.size() != inputs.rows())
    throw std::invalid_argument("attack: label count does not match inputs");

  Matrix x = inputs;
  for (int step = 0; step < spec.steps; ++step) {
    ForwardCache cache;
    const Matrix& logits = forward_cached(model, x, cache);
    LogitBatch batch;
    batch.logits = logits;
    batch.labels.assign(labels.begin(), labels.end());
    const LossResult result = loss.evaluate(batch);
    const Matrix input_grad = backprop_inputs(model, cache, result.grad);

    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (!all_finite(input_grad.row(i)))
        throw AttackFailed("attack: non-finite input gradient for sample " +
                               std::to_string(i),
                           i);
      for (std::size_t j = 0; j < x.cols(); ++j) {
        double v = x(i, j) + spec.alpha * sign(input_grad(i, j));
        // project onto the epsilon ball around the original, then the box
        const double orig = inputs(i, j);
        v = std::clamp(v, orig - spec.epsilon, orig + spec.epsilon);
        v = std::clamp(v, 0.0, 1.0);
        x(i, j) = v;
      }
    }
  }

  // A ball-boundary clamp can land half an ulp outside the budget once the
  // subtraction is rounded; nudge such components back so the measured
  // deviation never exceeds epsilon.
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = inputs.data()[i];
    double& v = x.data()[i];
    while (std::abs(v - orig) > spec.epsilon)
      v = std::nextafter(v, orig);
  }
  return x;
}

}  // namespace losslab
