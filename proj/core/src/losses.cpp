#include "losslab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "losslab/core_math.hpp"

namespace losslab {

void LogitBatch::validate() const {
  if (logits.rows() == 0) throw std::invalid_argument("logit batch: empty batch");
  if (logits.cols() < 2)
    throw std::invalid_argument("logit batch: need at least two classes");
  if (labels.size() != logits.rows())
    throw std::invalid_argument("logit batch: label count does not match rows");
  const int n = static_cast<int>(logits.cols());
  for (int l : labels)
    if (l < 0 || l >= n)
      throw std::invalid_argument("logit batch: label out of range");
  for (std::size_t b = 0; b < logits.rows(); ++b)
    if (!all_finite(logits.row(b)))
      throw std::invalid_argument("logit batch: non-finite logit");
}

ClassPriors ClassPriors::from_counts(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("class priors: no counts");
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 1) throw std::invalid_argument("class priors: every count must be >= 1");
    total += c;
  }
  ClassPriors p;
  p.counts.assign(counts.begin(), counts.end());
  p.priors.resize(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j)
    p.priors[j] = static_cast<double>(counts[j]) / static_cast<double>(total);
  return p;
}

std::int64_t ClassPriors::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

bool ClassPriors::balanced() const {
  return std::all_of(counts.begin(), counts.end(),
                     [&](std::int64_t c) { return c == counts.front(); });
}

MarginSpec MarginSpec::fixed(double margin) {
  if (margin < 0.0 || !std::isfinite(margin))
    throw std::invalid_argument("margin must be a finite non-negative value");
  return MarginSpec{MarginMode::Fixed, {margin}, 0.0};
}

MarginSpec global_margin(const ClassPriors& counts, double margin_constant) {
  if (!(margin_constant > 0.0))
    throw std::invalid_argument("margin constant must be positive");
  const double mu =
      std::sqrt(margin_constant / static_cast<double>(counts.total()));
  return MarginSpec{MarginMode::Global, {mu}, margin_constant};
}

MarginSpec hem_plus_margins(const ClassPriors& counts, double margin_constant) {
  if (!(margin_constant > 0.0))
    throw std::invalid_argument("margin constant must be positive");
  const double n = static_cast<double>(counts.num_classes());
  std::vector<double> mu(counts.num_classes());
  for (std::size_t i = 0; i < mu.size(); ++i)
    mu[i] = std::sqrt(margin_constant / (n * static_cast<double>(counts.counts[i])));
  return MarginSpec{MarginMode::PerClass, std::move(mu), margin_constant};
}

std::vector<double> mm_errors(std::span<const double> logits, int label,
                              const MarginSpec& margins) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("mm_errors: label out of range");
  if (margins.mu.size() != 1 && margins.mu.size() != logits.size())
    throw std::invalid_argument("margin vector length does not match class count");
  std::vector<double> e(logits.size(), 0.0);
  const double y_true = logits[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) == label) continue;
    e[i] = std::max(0.0, logits[i] - y_true + margins.margin_for(i));
  }
  return e;
}

namespace {

// CE-family helper: value and gradient of -log softmax(adjusted)_l averaged
// over the batch. `adjust` maps a raw logit row to the vector the softmax is
// applied to; `chain` maps d(loss)/d(adjusted) back onto the raw logits.
LossResult ce_core(const LogitBatch& batch, double tau) {
  const std::size_t B = batch.batch_size();
  const std::size_t n = batch.num_classes();
  LossResult res;
  res.grad = Matrix(B, n);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = batch.logits.row(b);
    const int l = batch.labels[b];
    const auto logp = log_softmax(row, tau);
    total += -logp[static_cast<std::size_t>(l)];
    const auto z = softmax(row, tau);
    for (std::size_t j = 0; j < n; ++j) {
      const double indicator = (static_cast<int>(j) == l) ? 1.0 : 0.0;
      res.grad(b, j) = (z[j] - indicator) / (static_cast<double>(B) * tau);
    }
  }
  res.value = total / static_cast<double>(B);
  return res;
}

}  // namespace

LossResult ce_loss(const LogitBatch& batch, double tau) {
  batch.validate();
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("ce loss: temperature must be positive");
  return ce_core(batch, tau);
}

LossResult ln_loss(const LogitBatch& batch, double tau) {
  batch.validate();
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("ln loss: temperature must be positive");

  constexpr double kNormFloor = 1e-12;
  const std::size_t B = batch.batch_size();
  const std::size_t n = batch.num_classes();
  LossResult res;
  res.grad = Matrix(B, n);
  double total = 0.0;

  for (std::size_t b = 0; b < B; ++b) {
    const auto row = batch.logits.row(b);
    const int l = batch.labels[b];
    const double norm = l2_norm(row);
    const auto y_hat = l2_normalize(row, kNormFloor);

    const auto logp = log_softmax(y_hat, tau);
    total += -logp[static_cast<std::size_t>(l)];

    // q = d(-log softmax(y_hat / tau)_l) / d(y_hat)
    const auto z = softmax(y_hat, tau);
    std::vector<double> q(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double indicator = (static_cast<int>(j) == l) ? 1.0 : 0.0;
      q[j] = (z[j] - indicator) / tau;
    }

    if (norm >= kNormFloor) {
      // d(y_hat_j)/d(y_k) = (delta_jk - y_hat_j y_hat_k) / ||y||
      double q_dot_yhat = 0.0;
      for (std::size_t j = 0; j < n; ++j) q_dot_yhat += q[j] * y_hat[j];
      for (std::size_t k = 0; k < n; ++k)
        res.grad(b, k) = (q[k] - q_dot_yhat * y_hat[k]) / (norm * static_cast<double>(B));
    } else {
      // below the floor the map is y / eps, a constant scaling
      for (std::size_t k = 0; k < n; ++k)
        res.grad(b, k) = q[k] / (kNormFloor * static_cast<double>(B));
    }
  }
  res.value = total / static_cast<double>(B);
  return res;
}

LossResult la_loss(const LogitBatch& batch, const ClassPriors& priors) {
  batch.validate();
  if (priors.num_classes() != batch.num_classes())
    throw std::invalid_argument("la loss: prior count does not match class count");

  const std::size_t B = batch.batch_size();
  const std::size_t n = batch.num_classes();
  std::vector<double> log_prior(n);
  for (std::size_t j = 0; j < n; ++j) log_prior[j] = std::log(priors.priors[j]);

  LogitBatch adjusted;
  adjusted.logits = Matrix(B, n);
  adjusted.labels = batch.labels;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < n; ++j)
      adjusted.logits(b, j) = batch.logits(b, j) + log_prior[j];

  // d(adjusted)/d(y) is the identity, so the CE gradient carries over as-is.
  return ce_core(adjusted, 1.0);
}

LossResult dice_loss(const LogitBatch& batch) {
  batch.validate();
  constexpr double kDenomFloor = 1e-12;
  const std::size_t B = batch.batch_size();
  const std::size_t n = batch.num_classes();

  Matrix z(B, n);
  for (std::size_t b = 0; b < B; ++b) {
    const auto zb = softmax(batch.logits.row(b), 1.0);
    for (std::size_t j = 0; j < n; ++j) z(b, j) = zb[j];
  }

  // Per class k over the batch: numer_k = sum_b t*z, denom_k = sum_b (t+z).
  std::vector<double> numer(n, 0.0), denom(n, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const auto t_label = static_cast<std::size_t>(batch.labels[b]);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = (k == t_label) ? 1.0 : 0.0;
      numer[k] += t * z(b, k);
      denom[k] += t + z(b, k);
    }
  }

  double value = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (denom[k] < kDenomFloor) continue;  // degenerate class contributes 0
    value += 1.0 - 2.0 * numer[k] / denom[k];
  }
  value /= static_cast<double>(n);

  // dL/dz_bk = (-2/n) * (t_bk * denom_k - numer_k) / denom_k^2, then back
  // through the softmax: dL/dy_bj = z_bj * (g_bj - sum_k g_bk z_bk).
  LossResult res;
  res.value = value;
  res.grad = Matrix(B, n);
  std::vector<double> g(n);
  for (std::size_t b = 0; b < B; ++b) {
    const auto t_label = static_cast<std::size_t>(batch.labels[b]);
    double g_dot_z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (denom[k] < kDenomFloor) {
        g[k] = 0.0;
        continue;
      }
      const double t = (k == t_label) ? 1.0 : 0.0;
      g[k] = -2.0 / static_cast<double>(n) * (t * denom[k] - numer[k]) /
             (denom[k] * denom[k]);
      g_dot_z += g[k] * z(b, k);
    }
    for (std::size_t j = 0; j < n; ++j)
      res.grad(b, j) = z(b, j) * (g[j] - g_dot_z);
  }
  return res;
}

namespace {

// Shared kernel for the margin-loss family. The per-sample mean threshold
// and all selection counts are constants during differentiation, so the
// gradient of each contributing error e_i = y_i - y_l + mu_i is +w on logit
// i and -w on logit l, with w the error's weight in the final mean.
LossResult margin_family_loss(const LogitBatch& batch, const MarginSpec& margins,
                              bool mean_above_zero, bool threshold_below_mean) {
  batch.validate();
  if (margins.mu.size() != 1 && margins.mu.size() != batch.num_classes())
    throw std::invalid_argument("margin vector length does not match class count");
  for (double m : margins.mu)
    if (m < 0.0 || !std::isfinite(m))
      throw std::invalid_argument("margins must be finite and non-negative");

  const std::size_t B = batch.batch_size();
  const std::size_t n = batch.num_classes();

  LossResult res;
  res.grad = Matrix(B, n);

  std::vector<double> sample_loss(B, 0.0);
  // weight of each error slot inside its sample's reduction
  Matrix slot_weight(B, n);

  for (std::size_t b = 0; b < B; ++b) {
    auto e = mm_errors(batch.logits.row(b), batch.labels[b], margins);
    const double mean_err =
        std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(n);

    if (threshold_below_mean) {
      for (double& ei : e)
        if (ei < mean_err) ei = 0.0;
    }

    if (mean_above_zero) {
      std::size_t active = 0;
      double sum = 0.0;
      for (double ei : e)
        if (ei > 0.0) {
          ++active;
          sum += ei;
        }
      if (active > 0) {
        sample_loss[b] = sum / static_cast<double>(active);
        for (std::size_t i = 0; i < n; ++i)
          if (e[i] > 0.0) slot_weight(b, i) = 1.0 / static_cast<double>(active);
      }
    } else {
      sample_loss[b] =
          std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        if (e[i] > 0.0) slot_weight(b, i) = 1.0 / static_cast<double>(n);
    }
  }

  // Batch reduction mirrors the per-sample rule: plain mean, or mean of the
  // strictly positive sample losses.
  double batch_weight = 0.0;
  if (mean_above_zero) {
    std::size_t active = 0;
    double sum = 0.0;
    for (double s : sample_loss)
      if (s > 0.0) {
        ++active;
        sum += s;
      }
    res.value = active > 0 ? sum / static_cast<double>(active) : 0.0;
    batch_weight = active > 0 ? 1.0 / static_cast<double>(active) : 0.0;
  } else {
    res.value = std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0) /
                static_cast<double>(B);
    batch_weight = 1.0 / static_cast<double>(B);
  }

  for (std::size_t b = 0; b < B; ++b) {
    if (mean_above_zero && !(sample_loss[b] > 0.0)) continue;
    const auto l = static_cast<std::size_t>(batch.labels[b]);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = slot_weight(b, i) * batch_weight;
      if (w == 0.0) continue;
      res.grad(b, i) += w;
      res.grad(b, l) -= w;
    }
  }
  return res;
}

}  // namespace

LossResult mm_loss(const LogitBatch& batch, const MarginSpec& margins, MmFlags flags) {
  return margin_family_loss(batch, margins, flags.mean_above_zero,
                            flags.threshold_below_mean);
}

LossResult hem_loss(const LogitBatch& batch, const MarginSpec& margins) {
  return margin_family_loss(batch, margins, true, true);
}

LossResult hem_plus_loss(const LogitBatch& batch, const ClassPriors& counts,
                         double margin_constant) {
  return hem_loss(batch, hem_plus_margins(counts, margin_constant));
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy: return "ce";
    case LossKind::LogitNorm: return "ln";
    case LossKind::LogitAdjusted: return "la";
    case LossKind::Dice: return "dice";
    case LossKind::Margin: return "mm";
    case LossKind::MarginMaz: return "mm+maz";
    case LossKind::MarginThres: return "mm+thres";
    case LossKind::HighErrorMargin: return "hem";
    case LossKind::HighErrorMarginPlus: return "hem+";
  }
  return "?";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::CrossEntropy, LossKind::LogitNorm,
                     LossKind::LogitAdjusted, LossKind::Dice, LossKind::Margin,
                     LossKind::MarginMaz, LossKind::MarginThres,
                     LossKind::HighErrorMargin, LossKind::HighErrorMarginPlus}) {
    if (loss_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

bool loss_kind_uses_margin(LossKind kind) {
  switch (kind) {
    case LossKind::Margin:
    case LossKind::MarginMaz:
    case LossKind::MarginThres:
    case LossKind::HighErrorMargin:
    case LossKind::HighErrorMarginPlus:
      return true;
    default:
      return false;
  }
}

LossResult LossSpec::evaluate(const LogitBatch& batch) const {
  switch (kind) {
    case LossKind::CrossEntropy: return ce_loss(batch, tau);
    case LossKind::LogitNorm: return ln_loss(batch, tau);
    case LossKind::LogitAdjusted: return la_loss(batch, priors);
    case LossKind::Dice: return dice_loss(batch);
    case LossKind::Margin: return mm_loss(batch, margins, margin_flags);
    case LossKind::MarginMaz: return mm_loss(batch, margins, {.mean_above_zero = true});
    case LossKind::MarginThres:
      return mm_loss(batch, margins, {.threshold_below_mean = true});
    case LossKind::HighErrorMargin: return hem_loss(batch, margins);
    case LossKind::HighErrorMarginPlus:
      return hem_plus_loss(batch, priors, margin_constant);
  }
  throw std::invalid_argument("unknown loss kind");
}

LossSpec make_loss_spec(LossKind kind, const ClassPriors* counts) {
  LossSpec spec;
  spec.kind = kind;
  spec.tau = (kind == LossKind::LogitNorm) ? 0.04 : 1.0;
  const bool needs_counts = kind == LossKind::LogitAdjusted ||
                            kind == LossKind::HighErrorMargin ||
                            kind == LossKind::HighErrorMarginPlus;
  if (needs_counts && counts == nullptr)
    throw std::invalid_argument("loss requires class counts");
  if (counts != nullptr) spec.priors = *counts;
  switch (kind) {
    case LossKind::Margin:
    case LossKind::MarginMaz:
    case LossKind::MarginThres:
      spec.margins = MarginSpec::fixed(1.0);
      break;
    case LossKind::HighErrorMargin:
      spec.margins = global_margin(*counts, spec.margin_constant);
      break;
    case LossKind::HighErrorMarginPlus:
      spec.margins = hem_plus_margins(*counts, spec.margin_constant);
      break;
    default:
      break;
  }
  return spec;
}

}  // namespace losslab
