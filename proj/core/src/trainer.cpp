#include "losslab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "losslab/core_math.hpp"
#include "losslab/rng.hpp"

#ifdef LOSSLAB_HAVE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace losslab {

namespace {

#ifdef LOSSLAB_HAVE_CBLAS
// One BLAS thread keeps results bitwise reproducible run to run; the layer
// shapes here are too small for threading to pay off anyway.
void pin_blas_threads() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}
#endif

// C = A * B
Matrix matmul_nn(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
#ifdef LOSSLAB_HAVE_CBLAS
  pin_blas_threads();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(a.rows()),
              static_cast<int>(b.cols()), static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0,
              c.data(), static_cast<int>(c.cols()));
#else
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
#endif
  return c;
}

// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
#ifdef LOSSLAB_HAVE_CBLAS
  pin_blas_threads();
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(a.cols()),
              static_cast<int>(b.cols()), static_cast<int>(a.rows()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0,
              c.data(), static_cast<int>(c.cols()));
#else
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
#endif
  return c;
}

// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
#ifdef LOSSLAB_HAVE_CBLAS
  pin_blas_threads();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(a.rows()),
              static_cast<int>(b.rows()), static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0,
              c.data(), static_cast<int>(c.cols()));
#else
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(j, k);
      c(i, j) = sum;
    }
#endif
  return c;
}

void check_inputs_shape(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != static_cast<std::size_t>(model.input_width()))
    throw std::invalid_argument("forward: input width does not match model");
}

bool grads_finite(const ParamGrads& grads) {
  for (const auto& w : grads.weights)
    if (!all_finite({w.data(), w.size()})) return false;
  for (const auto& b : grads.biases)
    if (!all_finite(b)) return false;
  return true;
}

int argmax_lowest(std::span<const double> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    count += weights[l].size() + biases[l].size();
  return count;
}

MlpModel init_model(std::span<const int> widths, std::uint64_t seed) {
  if (widths.size() < 2)
    throw std::invalid_argument("init_model: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("init_model: widths must be positive");

  Rng rng(seed);
  MlpModel model;
  model.widths.assign(widths.begin(), widths.end());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<std::size_t>(widths[l]);
    const auto fan_out = static_cast<std::size_t>(widths[l + 1]);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, stddev);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

const Matrix& forward_cached(const MlpModel& model, const Matrix& inputs,
                             ForwardCache& cache) {
  check_inputs_shape(model, inputs);
  cache.activations.clear();
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    Matrix h = matmul_nn(cache.activations.back(), model.weights[l]);
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) += model.biases[l][j];
    if (l + 1 < model.layer_count()) {
      for (std::size_t i = 0; i < h.size(); ++i)
        h.data()[i] = std::max(0.0, h.data()[i]);
    }
    cache.activations.push_back(std::move(h));
  }
  return cache.activations.back();
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  ForwardCache cache;
  return forward_cached(model, inputs, cache);
}

namespace {

void backprop_impl(const MlpModel& model, const ForwardCache& cache,
                   const Matrix& logit_grad, ParamGrads* param_grads,
                   Matrix* input_grad) {
  if (cache.activations.size() != model.layer_count() + 1)
    throw std::invalid_argument("backprop: cache does not match model");
  if (logit_grad.rows() != cache.activations.front().rows() ||
      logit_grad.cols() != static_cast<std::size_t>(model.output_width()))
    throw std::invalid_argument("backprop: logit gradient shape mismatch");

  if (param_grads) {
    param_grads->weights.resize(model.layer_count());
    param_grads->biases.resize(model.layer_count());
  }

  Matrix delta = logit_grad;
  for (std::size_t l = model.layer_count(); l-- > 0;) {
    const Matrix& below = cache.activations[l];
    if (param_grads) {
      param_grads->weights[l] = matmul_tn(below, delta);
      auto& gb = param_grads->biases[l];
      gb.assign(delta.cols(), 0.0);
      for (std::size_t i = 0; i < delta.rows(); ++i)
        for (std::size_t j = 0; j < delta.cols(); ++j) gb[j] += delta(i, j);
    }
    const bool need_below_grad = l > 0 || input_grad != nullptr;
    if (!need_below_grad) break;
    Matrix next = matmul_nt(delta, model.weights[l]);
    if (l > 0) {
      // rectifier mask; the subgradient at exactly zero is zero
      for (std::size_t i = 0; i < next.size(); ++i)
        if (below.data()[i] <= 0.0) next.data()[i] = 0.0;
    }
    delta = std::move(next);
  }
  if (input_grad) *input_grad = std::move(delta);
}

}  // namespace

ParamGrads backprop_params(const MlpModel& model, const ForwardCache& cache,
                           const Matrix& logit_grad) {
  ParamGrads grads;
  backprop_impl(model, cache, logit_grad, &grads, nullptr);
  return grads;
}

Matrix backprop_inputs(const MlpModel& model, const ForwardCache& cache,
                       const Matrix& logit_grad) {
  Matrix grad;
  backprop_impl(model, cache, logit_grad, nullptr, &grad);
  return grad;
}

Optimizer::Optimizer(const OptimizerConfig& config, const MlpModel& shape)
    : config_(config), lr_(config.learning_rate) {
  if (!(config.learning_rate > 0.0))
    throw std::invalid_argument("optimizer: learning rate must be positive");
  auto zeros_like = [&shape] {
    ParamGrads g;
    for (std::size_t l = 0; l < shape.layer_count(); ++l) {
      g.weights.emplace_back(shape.weights[l].rows(), shape.weights[l].cols());
      g.biases.emplace_back(shape.biases[l].size(), 0.0);
    }
    return g;
  };
  first_moment_ = zeros_like();
  if (config.kind == OptimizerKind::Adam) second_moment_ = zeros_like();
}

void Optimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  lr_ = lr;
}

void Optimizer::apply(MlpModel& model, const ParamGrads& grads) {
  if (grads.weights.size() != model.layer_count())
    throw std::invalid_argument("optimizer: gradient shape mismatch");
  ++step_;
  const double wd = config_.weight_decay;

  auto update_array = [&](double* p, const double* g, double* m, double* v,
                          std::size_t count) {
    if (config_.kind == OptimizerKind::SgdMomentum) {
      for (std::size_t i = 0; i < count; ++i) {
        m[i] = config_.momentum * m[i] + g[i];
        p[i] -= lr_ * m[i] + lr_ * wd * p[i];
      }
    } else {
      const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
      const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
      for (std::size_t i = 0; i < count; ++i) {
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + config_.epsilon) + lr_ * wd * p[i];
      }
    }
  };

  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    update_array(model.weights[l].data(), grads.weights[l].data(),
                 first_moment_.weights[l].data(),
                 config_.kind == OptimizerKind::Adam ? second_moment_.weights[l].data()
                                                     : nullptr,
                 model.weights[l].size());
    update_array(model.biases[l].data(), grads.biases[l].data(),
                 first_moment_.biases[l].data(),
                 config_.kind == OptimizerKind::Adam ? second_moment_.biases[l].data()
                                                     : nullptr,
                 model.biases[l].size());
  }
}

StepResult train_step(MlpModel& model, Optimizer& opt, const Matrix& inputs,
                      std::span<const int> labels, const LossSpec& loss) {
  ForwardCache cache;
  const Matrix& logits = forward_cached(model, inputs, cache);
  if (!all_finite({logits.data(), logits.size()}))
    throw TrainingDiverged("non-finite logits", -1, -1);

  LogitBatch batch;
  batch.logits = logits;
  batch.labels.assign(labels.begin(), labels.end());
  const LossResult result = loss.evaluate(batch);

  if (!std::isfinite(result.value) ||
      !all_finite({result.grad.data(), result.grad.size()}))
    throw TrainingDiverged("non-finite loss", -1, -1);

  StepResult out;
  out.loss = result.value;
  for (std::size_t b = 0; b < logits.rows(); ++b)
    if (argmax_lowest(logits.row(b)) == labels[b]) ++out.correct;

  const ParamGrads grads = backprop_params(model, cache, result.grad);
  if (!grads_finite(grads))
    throw TrainingDiverged("non-finite parameter gradient", -1, -1);

  opt.apply(model, grads);
  return out;
}

Trajectory fit(MlpModel& model, const LabeledDataset& dataset, const TrainConfig& config) {
  if (dataset.size() == 0) throw std::invalid_argument("fit: empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("fit: batch size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("fit: negative epoch count");
  if (dataset.feature_count() != static_cast<std::size_t>(model.input_width()))
    throw std::invalid_argument("fit: dataset width does not match model input");
  for (int l : dataset.labels)
    if (l >= model.output_width())
      throw std::invalid_argument("fit: label exceeds model output width");

  Optimizer opt(config.optimizer, model);
  const std::size_t N = dataset.size();
  const std::size_t d = dataset.feature_count();
  Trajectory trajectory;
  long global_step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const LrStep& step : config.lr_schedule)
      if (step.epoch == epoch) opt.set_learning_rate(opt.learning_rate() * step.multiplier);

    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    if (config.shuffle) Rng::stream(config.seed, static_cast<std::uint64_t>(epoch)).shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    long correct = 0;

    for (std::size_t start = 0; start < N; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(config.batch_size), N - start);
      Matrix inputs(count, d);
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(dataset.samples.data() + src * d, d, inputs.data() + i * d);
        labels[i] = dataset.labels[src];
      }
      try {
        const StepResult step = train_step(model, opt, inputs, labels, config.loss);
        loss_sum += step.loss;
        correct += step.correct;
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(global_step),
                               epoch, global_step);
      }
      ++batches;
      ++global_step;
    }

    trajectory.push_back({epoch, loss_sum / static_cast<double>(batches),
                          100.0 * static_cast<double>(correct) / static_cast<double>(N)});
  }
  return trajectory;
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'L', 'P', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
void read_pod(std::ifstream& in, T& value, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value))
    throw ParseError(path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpModel& model,
                     std::string_view config_blob) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open file for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(model.widths.size()));
  for (int w : model.widths) write_pod(out, static_cast<std::uint32_t>(w));
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    out.write(reinterpret_cast<const char*>(model.weights[l].data()),
              static_cast<std::streamsize>(model.weights[l].size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.biases[l].data()),
              static_cast<std::streamsize>(model.biases[l].size() * sizeof(double)));
  }
  write_pod(out, static_cast<std::uint64_t>(config_blob.size()));
  out.write(config_blob.data(), static_cast<std::streamsize>(config_blob.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(path + ": not a checkpoint file (bad magic at offset 0)");
  std::uint32_t version = 0;
  read_pod(in, version, path);
  if (version != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));

  std::uint32_t width_count = 0;
  read_pod(in, width_count, path);
  if (width_count < 2) throw ParseError(path + ": checkpoint has fewer than two widths");

  Checkpoint ckpt;
  ckpt.model.widths.resize(width_count);
  for (auto& w : ckpt.model.widths) {
    std::uint32_t v = 0;
    read_pod(in, v, path);
    w = static_cast<int>(v);
  }
  for (std::size_t l = 0; l + 1 < ckpt.model.widths.size(); ++l) {
    Matrix w(static_cast<std::size_t>(ckpt.model.widths[l]),
             static_cast<std::size_t>(ckpt.model.widths[l + 1]));
    if (!in.read(reinterpret_cast<char*>(w.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(double))))
      throw ParseError(path + ": truncated checkpoint (layer weights)");
    std::vector<double> b(static_cast<std::size_t>(ckpt.model.widths[l + 1]));
    if (!in.read(reinterpret_cast<char*>(b.data()),
                 static_cast<std::streamsize>(b.size() * sizeof(double))))
      throw ParseError(path + ": truncated checkpoint (layer biases)");
    ckpt.model.weights.push_back(std::move(w));
    ckpt.model.biases.push_back(std::move(b));
  }
  std::uint64_t blob_size = 0;
  read_pod(in, blob_size, path);
  ckpt.config_blob.resize(blob_size);
  if (blob_size &&
      !in.read(ckpt.config_blob.data(), static_cast<std::streamsize>(blob_size)))
    throw ParseError(path + ": truncated checkpoint (config blob)");
  return ckpt;
}

}  // namespace losslab
