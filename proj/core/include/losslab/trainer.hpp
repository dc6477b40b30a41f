#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "losslab/data.hpp"
#include "losslab/losses.hpp"
#include "losslab/matrix.hpp"

namespace losslab {

// Fully-connected network: rectifier hidden layers, identity output.
struct MlpModel {
  std::vector<int> widths;                    // input, hidden..., output
  std::vector<Matrix> weights;                // weights[l]: widths[l] x widths[l+1]
  std::vector<std::vector<double>> biases;    // biases[l]: widths[l+1]

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

// Weights ~ N(0, 2/fan_in), biases zero; bitwise deterministic per seed.
MlpModel init_model(std::span<const int> widths, std::uint64_t seed);

// Logits for a B x d input batch.
Matrix forward(const MlpModel& model, const Matrix& inputs);

// Forward pass that keeps the post-activation of every layer for backprop.
// The returned reference points into the cache.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] = inputs, back() = logits
};
const Matrix& forward_cached(const MlpModel& model, const Matrix& inputs,
                             ForwardCache& cache);

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

// d(loss)/d(parameters) given d(loss)/d(logits).
ParamGrads backprop_params(const MlpModel& model, const ForwardCache& cache,
                           const Matrix& logit_grad);

// d(loss)/d(inputs) given d(loss)/d(logits).
Matrix backprop_inputs(const MlpModel& model, const ForwardCache& cache,
                       const Matrix& logit_grad);

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;     // sgd
  double beta1 = 0.9;        // adam
  double beta2 = 0.999;      // adam
  double epsilon = 1e-8;     // adam
  double weight_decay = 0.0; // decoupled, applied to the update directly
};

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const MlpModel& shape);

  void apply(MlpModel& model, const ParamGrads& grads);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  double lr_;
  long step_ = 0;
  ParamGrads first_moment_;
  ParamGrads second_moment_;  // adam only
};

// Raised when a loss or gradient turns non-finite during training.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& what, int epoch_, long step_)
      : std::runtime_error(what), epoch(epoch_), step(step_) {}
  int epoch;
  long step;
};

struct StepResult {
  double loss = 0.0;  // batch loss before the update
  int correct = 0;    // argmax matches label (pre-update logits)
};

StepResult train_step(MlpModel& model, Optimizer& opt, const Matrix& inputs,
                      std::span<const int> labels, const LossSpec& loss);

struct LrStep {
  int epoch;          // multiplier applied when this epoch starts
  double multiplier;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 128;
  std::uint64_t seed = 1;
  bool shuffle = true;
  std::vector<LrStep> lr_schedule;
  OptimizerConfig optimizer;
  LossSpec loss;
};

struct EpochStats {
  int epoch;
  double mean_loss;       // unweighted mean of the per-batch losses
  double train_accuracy;  // percent, accumulated over the epoch's batches
};
using Trajectory = std::vector<EpochStats>;

// Runs the training loop; per-epoch shuffles are deterministic in
// (seed, epoch). Propagates TrainingDiverged annotated with epoch/step.
Trajectory fit(MlpModel& model, const LabeledDataset& dataset, const TrainConfig& config);

// Versioned little-endian container: widths, row-major parameter arrays and
// an opaque config blob. Layout documented in the README.
void save_checkpoint(const std::string& path, const MlpModel& model,
                     std::string_view config_blob);

struct Checkpoint {
  MlpModel model;
  std::string config_blob;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace losslab
