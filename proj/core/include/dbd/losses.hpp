#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "dbd/augment.hpp"
#include "dbd/nn/model.hpp"

namespace dbd {

struct LossConfig {
  double tau = 0.5;            // contrastive temperature
  double sce_alpha = 0.1;      // weight on the forward cross-entropy term
  double sce_beta = 1.0;       // weight on the reversed term
  double log_clamp = -4.0;     // finite stand-in for log 0
  double sharpen_T = 0.5;      // label-guessing temperature
  double lambda_u = 15.0;      // unsupervised loss weight
  double mix_beta_alpha = 0.75;
  int guess_augments = 2;

  void validate() const;
};

namespace losses {

/// Contrastive loss over 2N embeddings paired as (2i, 2i+1): the mean over
/// all rows of -log( exp(sim(z_i, z_pair)/tau) / sum_{k != i} exp(sim(z_i,
/// z_k)/tau) ) with cosine similarity. Optionally writes the gradient with
/// respect to the raw (unnormalized) embeddings.
template <typename T>
double nt_xent(const std::vector<T>& embeddings, int count, int dim, double tau,
               std::vector<T>* d_embeddings = nullptr) {
  if (count < 2 || count % 2 != 0) throw ContractError("nt_xent needs an even batch of >= 2");
  if (tau <= 0.0) throw ContractError("nt_xent temperature must be > 0");

  std::vector<double> unit(static_cast<size_t>(count) * dim);
  std::vector<double> norms(count);
  for (int i = 0; i < count; ++i) {
    double sq = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double v = static_cast<double>(embeddings[static_cast<size_t>(i) * dim + d]);
      sq += v * v;
    }
    norms[i] = std::sqrt(sq);
    if (norms[i] < 1e-12) throw ContractError("nt_xent embedding has zero norm");
    for (int d = 0; d < dim; ++d)
      unit[static_cast<size_t>(i) * dim + d] =
          static_cast<double>(embeddings[static_cast<size_t>(i) * dim + d]) / norms[i];
  }

  // Cosine similarity matrix of the normalized rows.
  std::vector<double> sim(static_cast<size_t>(count) * count, 0.0);
  for (int i = 0; i < count; ++i)
    for (int k = i + 1; k < count; ++k) {
      double dot = 0.0;
      for (int d = 0; d < dim; ++d)
        dot += unit[static_cast<size_t>(i) * dim + d] * unit[static_cast<size_t>(k) * dim + d];
      sim[static_cast<size_t>(i) * count + k] = dot;
      sim[static_cast<size_t>(k) * count + i] = dot;
    }

  double loss = 0.0;
  std::vector<double> coeff;  // d loss / d sim(i, k), ordered pairs
  if (d_embeddings != nullptr) coeff.assign(sim.size(), 0.0);

  for (int i = 0; i < count; ++i) {
    const int pair = i ^ 1;
    double max_logit = -1e300;
    for (int k = 0; k < count; ++k)
      if (k != i) max_logit = std::max(max_logit, sim[static_cast<size_t>(i) * count + k] / tau);
    double denom = 0.0;
    for (int k = 0; k < count; ++k)
      if (k != i) denom += std::exp(sim[static_cast<size_t>(i) * count + k] / tau - max_logit);
    const double lse = max_logit + std::log(denom);
    loss += lse - sim[static_cast<size_t>(i) * count + pair] / tau;

    if (d_embeddings != nullptr) {
      for (int k = 0; k < count; ++k) {
        if (k == i) continue;
        const double soft =
            std::exp(sim[static_cast<size_t>(i) * count + k] / tau - max_logit) / denom;
        coeff[static_cast<size_t>(i) * count + k] +=
            (soft - (k == pair ? 1.0 : 0.0)) / (tau * count);
      }
    }
  }
  loss /= count;

  if (d_embeddings != nullptr) {
    d_embeddings->assign(embeddings.size(), T(0));
    for (int i = 0; i < count; ++i) {
      std::vector<double> du(dim, 0.0);
      for (int k = 0; k < count; ++k) {
        if (k == i) continue;
        const double c = coeff[static_cast<size_t>(i) * count + k] +
                         coeff[static_cast<size_t>(k) * count + i];
        for (int d = 0; d < dim; ++d) du[d] += c * unit[static_cast<size_t>(k) * dim + d];
      }
      // Through the normalization: project out the radial component.
      double radial = 0.0;
      for (int d = 0; d < dim; ++d) radial += du[d] * unit[static_cast<size_t>(i) * dim + d];
      for (int d = 0; d < dim; ++d)
        (*d_embeddings)[static_cast<size_t>(i) * dim + d] = static_cast<T>(
            (du[d] - radial * unit[static_cast<size_t>(i) * dim + d]) / norms[i]);
    }
  }
  return loss;
}

inline void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0) throw ContractError("distribution has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-5) throw ContractError("distribution does not sum to 1");
}

/// H(p, q) = -sum_k q_k log(max(p_k, exp(A))).
double cross_entropy(std::span<const double> p, std::span<const double> q, double log_clamp,
                     std::vector<double>* dp = nullptr);

/// Reversed term: -sum_k p_k log(q_k), with log(0) replaced by A.
double reverse_cross_entropy(std::span<const double> p, std::span<const double> q,
                             double log_clamp, std::vector<double>* dp = nullptr);

/// Symmetric cross-entropy: alpha * H(p, q) + beta * reversed(p, q).
double sce(std::span<const double> p, std::span<const double> q, double alpha, double beta,
           double log_clamp, std::vector<double>* dp = nullptr);

/// Temperature sharpening: p_k^(1/T) / sum_j p_j^(1/T).
std::vector<double> sharpen(std::span<const double> p, double temperature);

std::vector<double> one_hot(int label, int num_classes);

template <typename T>
std::vector<double> softmax_row(const T* logits, int k) {
  double max_logit = -1e300;
  for (int j = 0; j < k; ++j) max_logit = std::max(max_logit, static_cast<double>(logits[j]));
  std::vector<double> p(k);
  double denom = 0.0;
  for (int j = 0; j < k; ++j) {
    p[j] = std::exp(static_cast<double>(logits[j]) - max_logit);
    denom += p[j];
  }
  for (double& v : p) v /= denom;
  return p;
}

/// dL/dlogits from dL/dp through the softmax Jacobian.
template <typename T>
void softmax_backward_row(const std::vector<double>& p, const std::vector<double>& dp,
                          T* d_logits, double scale) {
  double inner = 0.0;
  for (size_t j = 0; j < p.size(); ++j) inner += dp[j] * p[j];
  for (size_t j = 0; j < p.size(); ++j)
    d_logits[j] = static_cast<T>(scale * p[j] * (dp[j] - inner));
}

/// Mean SCE over rows of logits against one-hot labels; optional gradient
/// (already scaled by 1/N). Returns per-row losses through `per_row`.
template <typename T>
double sce_on_logits(const std::vector<T>& logits, const std::vector<int>& labels, int k,
                     double alpha, double beta, double log_clamp,
                     std::vector<T>* d_logits = nullptr, std::vector<double>* per_row = nullptr) {
  const int n = static_cast<int>(labels.size());
  if (static_cast<size_t>(n) * k != logits.size()) throw ContractError("logit shape mismatch");
  if (d_logits != nullptr) d_logits->assign(logits.size(), T(0));
  if (per_row != nullptr) per_row->assign(n, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> p = softmax_row(logits.data() + static_cast<size_t>(i) * k, k);
    const std::vector<double> q = one_hot(labels[i], k);
    std::vector<double> dp;
    const double value = sce(p, q, alpha, beta, log_clamp, d_logits != nullptr ? &dp : nullptr);
    total += value;
    if (per_row != nullptr) (*per_row)[i] = value;
    if (d_logits != nullptr)
      softmax_backward_row(p, dp, d_logits->data() + static_cast<size_t>(i) * k, 1.0 / n);
  }
  return total / n;
}

/// Mean plain cross-entropy over rows against one-hot labels (supervised
/// baseline objective); optional gradient scaled by 1/N.
template <typename T>
double ce_on_logits(const std::vector<T>& logits, const std::vector<int>& labels, int k,
                    double log_clamp, std::vector<T>* d_logits = nullptr,
                    std::vector<double>* per_row = nullptr) {
  const int n = static_cast<int>(labels.size());
  if (static_cast<size_t>(n) * k != logits.size()) throw ContractError("logit shape mismatch");
  if (d_logits != nullptr) d_logits->assign(logits.size(), T(0));
  if (per_row != nullptr) per_row->assign(n, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> p = softmax_row(logits.data() + static_cast<size_t>(i) * k, k);
    const std::vector<double> q = one_hot(labels[i], k);
    std::vector<double> dp;
    const double value = cross_entropy(p, q, log_clamp, d_logits != nullptr ? &dp : nullptr);
    total += value;
    if (per_row != nullptr) (*per_row)[i] = value;
    if (d_logits != nullptr)
      softmax_backward_row(p, dp, d_logits->data() + static_cast<size_t>(i) * k, 1.0 / n);
  }
  return total / n;
}

/// Average the eval-mode softmax over `guess_augments` augmented views, then
/// sharpen. The result is treated as a constant target (no gradient flows).
template <typename T>
std::vector<double> guess_label(nn::Model<T>& model, const Image& image,
                                const AugmentConfig& aug, int guess_augments, double sharpen_T,
                                Rng& rng) {
  if (guess_augments < 1) throw ContractError("guess_augments must be >= 1");
  std::vector<Image> views;
  views.reserve(guess_augments);
  for (int j = 0; j < guess_augments; ++j) {
    Rng view_rng = rng.split(static_cast<std::uint64_t>(j));
    views.push_back(augment(image, aug, view_rng));
  }
  std::vector<const Image*> ptrs;
  for (const Image& v : views) ptrs.push_back(&v);
  typename nn::Model<T>::ForwardCache cache;
  const std::vector<T> logits =
      model.forward(nn::make_batch<T>(ptrs), nn::Head::logits, nn::Mode::eval, cache);
  const int k = model.spec().num_classes;
  std::vector<double> mean(k, 0.0);
  for (int j = 0; j < guess_augments; ++j) {
    const std::vector<double> p = softmax_row(logits.data() + static_cast<size_t>(j) * k, k);
    for (int c = 0; c < k; ++c) mean[c] += p[c] / guess_augments;
  }
  return sharpen(mean, sharpen_T);
}

/// Convex combination biased toward the first argument: lambda' =
/// max(lambda, 1 - lambda), out = lambda' * a + (1 - lambda') * b.
template <typename T>
void mixup_into(std::span<const T> a, std::span<const T> b, double lambda_raw, T* out) {
  const double lam = std::max(lambda_raw, 1.0 - lambda_raw);
  for (size_t i = 0; i < a.size(); ++i)
    out[i] = static_cast<T>(lam * static_cast<double>(a[i]) +
                            (1.0 - lam) * static_cast<double>(b[i]));
}

struct MixMatchDiagnostics {
  double labeled_loss = 0.0;    // L_X
  double unlabeled_loss = 0.0;  // L_U (unweighted)
};

/// Mixed training batch: the first `labeled_count` rows carry mixed one-hot
/// targets (L_X), the rest carry mixed guessed targets (L_U). Targets are
/// constants: no gradient flows through label guessing.
template <typename T>
struct MixMatchBatch {
  nn::Batch<T> mixed;
  std::vector<std::vector<double>> targets;
  int labeled_count = 0;
};

/// Builds the MixMatch batch for one (X, U) pair, |X| == |U| required:
/// augment X once and U `guess_augments` times, guess-and-sharpen the
/// unlabeled targets from eval-mode predictions, shuffle X' u U' together and
/// MixUp each entry against its shuffled partner (labels included).
///
/// Randomness comes from named sub-streams of `rng` in a fixed order, so the
/// recipe can be replayed step by step:
///   "mm-aug-x"/i      augmentation of labeled sample i
///   "mm-guess"/i/j    augmentation of view j of unlabeled sample i
///   "mm-shuffle"      Fisher-Yates permutation of the combined batch
///   "mm-beta"         sequential MixUp draws (labeled rows, then unlabeled)
template <typename T>
MixMatchBatch<T> build_mixmatch_batch(nn::Model<T>& model,
                                      const std::vector<const Image*>& labeled_images,
                                      const std::vector<int>& labels,
                                      const std::vector<const Image*>& unlabeled_images,
                                      const AugmentConfig& aug, const LossConfig& config,
                                      Rng rng) {
  config.validate();
  const int nx = static_cast<int>(labeled_images.size());
  const int nu = static_cast<int>(unlabeled_images.size());
  if (nx == 0 || nx != nu) throw ContractError("mixmatch requires equal nonempty batches");
  const int k = model.spec().num_classes;
  const int views = config.guess_augments;

  // Augmented labeled entries with one-hot targets.
  std::vector<Image> entry_images;
  std::vector<std::vector<double>> entry_labels;
  entry_images.reserve(static_cast<size_t>(nx) + static_cast<size_t>(nu) * views);
  Rng aug_stream = rng.split("mm-aug-x");
  for (int i = 0; i < nx; ++i) {
    Rng r = aug_stream.split(static_cast<std::uint64_t>(i));
    entry_images.push_back(augment(*labeled_images[i], aug, r));
    entry_labels.push_back(one_hot(labels[i], k));
  }

  // Guessed targets over augmented unlabeled views; the views join the mix.
  Rng guess_stream = rng.split("mm-guess");
  std::vector<Image> unlabeled_views;
  unlabeled_views.reserve(static_cast<size_t>(nu) * views);
  for (int i = 0; i < nu; ++i) {
    Rng per_sample = guess_stream.split(static_cast<std::uint64_t>(i));
    for (int j = 0; j < views; ++j) {
      Rng r = per_sample.split(static_cast<std::uint64_t>(j));
      unlabeled_views.push_back(augment(*unlabeled_images[i], aug, r));
    }
  }
  {
    std::vector<const Image*> ptrs;
    for (const Image& v : unlabeled_views) ptrs.push_back(&v);
    typename nn::Model<T>::ForwardCache cache;
    const std::vector<T> logits =
        model.forward(nn::make_batch<T>(ptrs), nn::Head::logits, nn::Mode::eval, cache);
    for (int i = 0; i < nu; ++i) {
      std::vector<double> mean(k, 0.0);
      for (int j = 0; j < views; ++j) {
        const std::vector<double> p =
            softmax_row(logits.data() + (static_cast<size_t>(i) * views + j) * k, k);
        for (int c = 0; c < k; ++c) mean[c] += p[c] / views;
      }
      const std::vector<double> guessed = sharpen(mean, config.sharpen_T);
      for (int j = 0; j < views; ++j) {
        entry_images.push_back(std::move(unlabeled_views[static_cast<size_t>(i) * views + j]));
        entry_labels.push_back(guessed);
      }
    }
  }

  const int total = static_cast<int>(entry_images.size());
  std::vector<int> perm(total);
  for (int i = 0; i < total; ++i) perm[i] = i;
  Rng shuffle_rng = rng.split("mm-shuffle");
  for (int i = total - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }

  // MixUp every entry against its shuffled partner.
  Rng beta_rng = rng.split("mm-beta");
  const size_t pixel_count = entry_images.front().pixels.size();
  MixMatchBatch<T> out;
  out.labeled_count = nx;
  out.mixed = nn::Batch<T>(total, entry_images.front().channels, entry_images.front().height,
                           entry_images.front().width);
  out.targets.resize(total);
  std::vector<T> pixel_buf(pixel_count);
  for (int i = 0; i < total; ++i) {
    const double lambda_raw = beta_rng.beta(config.mix_beta_alpha, config.mix_beta_alpha);
    const Image& a = entry_images[i];
    const Image& b = entry_images[perm[i]];
    std::vector<T> af(a.pixels.begin(), a.pixels.end());
    std::vector<T> bf(b.pixels.begin(), b.pixels.end());
    mixup_into<T>(af, bf, lambda_raw, pixel_buf.data());
    std::copy(pixel_buf.begin(), pixel_buf.end(),
              out.mixed.data.begin() + static_cast<size_t>(i) * pixel_count);
    const double lam = std::max(lambda_raw, 1.0 - lambda_raw);
    out.targets[i].resize(k);
    for (int c = 0; c < k; ++c)
      out.targets[i][c] = lam * entry_labels[i][c] + (1.0 - lam) * entry_labels[perm[i]][c];
  }
  return out;
}

/// L_X + lambda_u * L_U over a built batch: mean cross-entropy on the labeled
/// rows plus the (1/K)-scaled mean squared softmax error on the rest. One
/// train-mode forward/backward; gradients accumulate into the model.
template <typename T>
double mixmatch_objective(nn::Model<T>& model, const MixMatchBatch<T>& batch,
                          const LossConfig& config, MixMatchDiagnostics* diag = nullptr) {
  const int total = batch.mixed.n;
  const int nx = batch.labeled_count;
  const int k = model.spec().num_classes;
  if (nx <= 0 || nx >= total) throw ContractError("mixmatch batch has no unlabeled rows");

  typename nn::Model<T>::ForwardCache cache;
  const std::vector<T> logits =
      model.forward(batch.mixed, nn::Head::logits, nn::Mode::train, cache);

  const int n_unlabeled_entries = total - nx;
  std::vector<T> d_logits(logits.size(), T(0));
  double l_x = 0.0, l_u = 0.0;
  for (int i = 0; i < total; ++i) {
    const std::vector<double> p = softmax_row(logits.data() + static_cast<size_t>(i) * k, k);
    const std::vector<double>& q = batch.targets[i];
    if (i < nx) {
      std::vector<double> dp;
      l_x += cross_entropy(p, q, config.log_clamp, &dp);
      softmax_backward_row(p, dp, d_logits.data() + static_cast<size_t>(i) * k, 1.0 / nx);
    } else {
      std::vector<double> dp(static_cast<size_t>(k));
      double sq = 0.0;
      for (int c = 0; c < k; ++c) {
        const double diff = p[c] - q[c];
        sq += diff * diff;
        dp[c] = 2.0 * diff;
      }
      l_u += sq;
      softmax_backward_row(p, dp, d_logits.data() + static_cast<size_t>(i) * k,
                           config.lambda_u / (static_cast<double>(k) * n_unlabeled_entries));
    }
  }
  l_x /= nx;
  l_u /= static_cast<double>(k) * n_unlabeled_entries;

  model.backward(d_logits, cache);
  if (diag != nullptr) *diag = {l_x, l_u};
  return l_x + config.lambda_u * l_u;
}

/// Whole MixMatch step for one batch pair: build, then evaluate.
template <typename T>
double mixmatch_batch_loss(nn::Model<T>& model, const std::vector<const Image*>& labeled_images,
                           const std::vector<int>& labels,
                           const std::vector<const Image*>& unlabeled_images,
                           const AugmentConfig& aug, const LossConfig& config, Rng rng,
                           MixMatchDiagnostics* diag = nullptr) {
  const MixMatchBatch<T> batch = build_mixmatch_batch(model, labeled_images, labels,
                                                      unlabeled_images, aug, config, rng);
  return mixmatch_objective(model, batch, config, diag);
}

}  // namespace losses
}  // namespace dbd
