#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "losslab/matrix.hpp"

namespace losslab {

// A batch of classifier outputs: B x n pre-activation logits plus the true
// class index of each row.
struct LogitBatch {
  Matrix logits;            // B x n
  std::vector<int> labels;  // size B, each in [0, n)

  std::size_t batch_size() const { return logits.rows(); }
  std::size_t num_classes() const { return logits.cols(); }

  // Throws std::invalid_argument if shapes/labels/values are unusable.
  void validate() const;
};

// Scalar loss plus its exact gradient w.r.t. every logit.
struct LossResult {
  double value = 0.0;
  Matrix grad;  // B x n, d(value)/d(logit)
};

// Per-class training-sample counts s_i and the derived priors
// p_j = s_j / sum_i s_i.
struct ClassPriors {
  std::vector<std::int64_t> counts;
  std::vector<double> priors;

  static ClassPriors from_counts(std::span<const std::int64_t> counts);
  std::size_t num_classes() const { return counts.size(); }
  std::int64_t total() const;
  bool balanced() const;
};

enum class MarginMode { Fixed, Global, PerClass };

// The required gap between the true-class logit and every other logit. Holds
// either one shared margin (Fixed/Global) or one margin per class (PerClass).
struct MarginSpec {
  MarginMode mode = MarginMode::Fixed;
  std::vector<double> mu;        // size 1, or n for PerClass
  double margin_constant = 0.0;  // the M used to derive Global/PerClass margins

  double margin_for(std::size_t cls) const {
    return mu.size() == 1 ? mu[0] : mu[cls];
  }

  static MarginSpec fixed(double margin);
};

// mu = sqrt(M / sum_i s_i): one shared margin derived from the training-set size.
MarginSpec global_margin(const ClassPriors& counts, double margin_constant = 2000.0);

// mu_i = sqrt(M / (n * s_i)): per-class margins that grow for rarer classes.
// Collapses to global_margin when all counts are equal.
MarginSpec hem_plus_margins(const ClassPriors& counts, double margin_constant = 2000.0);

// Hinge errors of one sample: e_l = 0 and e_i = max(0, y_i - y_l + mu_i) for
// i != l.
std::vector<double> mm_errors(std::span<const double> logits, int label,
                              const MarginSpec& margins);

// Variant switches for the margin loss:
//   mean_above_zero      ("maz")   - per-sample and batch reductions average
//                                    only strictly positive values;
//   threshold_below_mean ("thres") - errors below the per-sample mean error
//                                    are zeroed before reducing.
// With both switches on the result is hem_loss.
struct MmFlags {
  bool mean_above_zero = false;
  bool threshold_below_mean = false;
};

// L_CE = -log softmax(y/tau)_l, averaged over the batch.
LossResult ce_loss(const LogitBatch& batch, double tau = 1.0);

// Cross entropy on l2-normalized logits with a low temperature.
// The gradient carries the full normalization Jacobian.
LossResult ln_loss(const LogitBatch& batch, double tau = 0.04);

// Cross entropy with log-prior adjusted logits: -log softmax(y + log p)_l.
// Identical to ce_loss(tau=1) when the priors are uniform.
LossResult la_loss(const LogitBatch& batch, const ClassPriors& priors);

// Class-wise overlap loss on softmax outputs:
//   D_k = 1 - 2 * sum_b(t_bk z_bk) / sum_b(t_bk + z_bk), value = mean_k D_k.
LossResult dice_loss(const LogitBatch& batch);

// Mean of the hinge errors over all B*n slots (flags select the variants).
LossResult mm_loss(const LogitBatch& batch, const MarginSpec& margins,
                   MmFlags flags = {});

// Per sample: mean of the errors at or above the per-sample mean error, with
// the threshold and the selection counts treated as constants during
// differentiation. Batch value: mean of the strictly positive per-sample
// losses (0 if there are none, with a zero gradient).
LossResult hem_loss(const LogitBatch& batch, const MarginSpec& margins);

// hem_loss with per-class margins derived from the training counts.
LossResult hem_plus_loss(const LogitBatch& batch, const ClassPriors& counts,
                         double margin_constant = 2000.0);

// ---------------------------------------------------------------------------
// Uniform selector used by the trainer and the CLI.

enum class LossKind {
  CrossEntropy,     // "ce"
  LogitNorm,        // "ln"
  LogitAdjusted,    // "la"
  Dice,             // "dice"
  Margin,           // "mm"
  MarginMaz,        // "mm+maz"
  MarginThres,      // "mm+thres"
  HighErrorMargin,  // "hem"
  HighErrorMarginPlus,  // "hem+"
};

std::string_view loss_kind_name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
bool loss_kind_uses_margin(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  double tau = 1.0;          // ce/la/dice use 1, ln defaults to 0.04
  MarginSpec margins;        // resolved margins for the margin family
  ClassPriors priors;        // class counts for la and hem+
  double margin_constant = 2000.0;
  MmFlags margin_flags;      // extra switches honored when kind == Margin

  LossResult evaluate(const LogitBatch& batch) const;
};

// Builds a LossSpec with the per-loss default hyper-parameters (tau 1 for
// CE/LA/DICE, tau 0.04 for LN, margin mu=1 for MM, global/per-class margins
// with M=2000 for HEM/HEM+). `counts` are required for la, hem and hem+.
LossSpec make_loss_spec(LossKind kind, const ClassPriors* counts = nullptr);

}  // namespace losslab
