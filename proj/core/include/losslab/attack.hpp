#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "losslab/losses.hpp"
#include "losslab/matrix.hpp"
#include "losslab/trainer.hpp"

namespace losslab {

// l_inf-bounded gradient-sign attack parameters. Inputs live in [0,1].
struct AttackSpec {
  double epsilon = 0.3;  // perturbation budget
  int steps = 1;         // 1 recovers the single-step attack
  double alpha = 0.3;    // per-step size

  void validate() const;
};

struct AttackFailed : std::runtime_error {
  AttackFailed(const std::string& what, std::size_t sample_index_)
      : std::runtime_error(what), sample_index(sample_index_) {}
  std::size_t sample_index;
};

// Iterated ascent x <- clip_[0,1](clip_eps(x + alpha * sign(dL/dx))). The
// returned batch satisfies ||x' - x||_inf <= epsilon and x' in [0,1]
// exactly. Throws AttackFailed (naming the sample) on a non-finite input
// gradient.
Matrix gradient_sign_attack(const MlpModel& model, const LossSpec& loss,
                            const Matrix& inputs, std::span<const int> labels,
                            const AttackSpec& spec);

}  // namespace losslab
