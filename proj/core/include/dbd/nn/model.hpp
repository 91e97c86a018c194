#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbd/nn/layers.hpp"

namespace dbd::nn {

/// Encoder-plus-heads architecture: conv blocks (conv3x3, batchnorm, relu,
/// 2x2 maxpool between blocks), global average pooling into a feature
/// vector, a 2-layer projection head for contrastive training, and an affine
/// classifier. The parameter partition is [backbone = encoder + projection,
/// head = classifier].
struct ModelSpec {
  int in_channels = 3;
  std::vector<int> channels = {32, 64, 128, 256};
  int projection_dim = 128;
  int num_classes = 4;

  int feature_dim() const { return channels.back(); }

  nlohmann::json to_json() const {
    return {{"in_channels", in_channels},
            {"channels", channels},
            {"projection_dim", projection_dim},
            {"num_classes", num_classes}};
  }

  /// FNV-1a over the canonical JSON encoding; checkpoints carry it so a
  /// reload into a mismatched architecture fails loudly.
  std::uint64_t hash() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  void validate() const {
    if (in_channels <= 0 || projection_dim <= 0 || num_classes <= 0 || channels.empty())
      throw ConfigError("model spec dimensions must be positive");
    for (int c : channels)
      if (c <= 0) throw ConfigError("model spec channel counts must be positive");
  }
};

enum class Head { features, projection, logits };
enum class Mode { train, eval };

template <typename T>
class Model {
public:
  Model() = default;

  explicit Model(const ModelSpec& spec) : spec_(spec) {
    spec.validate();
    int in_c = spec.in_channels;
    for (size_t i = 0; i < spec.channels.size(); ++i) {
      const std::string base = "encoder.block" + std::to_string(i);
      convs_.emplace_back(base + ".conv", in_c, spec.channels[i]);
      norms_.emplace_back(base + ".norm", spec.channels[i]);
      in_c = spec.channels[i];
    }
    const int f = spec.feature_dim();
    proj1_ = Linear<T>("projection.fc1", f, f);
    proj2_ = Linear<T>("projection.fc2", f, spec.projection_dim);
    classifier_ = Linear<T>("classifier.fc", f, spec.num_classes);
    assign_groups();
  }

  const ModelSpec& spec() const { return spec_; }

  /// Direct access to the classifier head (head-only training stages).
  Linear<T>& classifier() { return classifier_; }

  void init(Rng rng) {
    for (auto& conv : convs_) conv.init(rng);
    proj1_.init(rng);
    proj2_.init(rng);
    classifier_.init(rng);
  }

  /// Parameters in a fixed, documented order (encoder, projection, classifier).
  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
      out.push_back(&convs_[i].weight);
      out.push_back(&norms_[i].gamma);
      out.push_back(&norms_[i].beta);
    }
    out.push_back(&proj1_.weight);
    out.push_back(&proj1_.bias);
    out.push_back(&proj2_.weight);
    out.push_back(&proj2_.bias);
    out.push_back(&classifier_.weight);
    out.push_back(&classifier_.bias);
    return out;
  }

  std::vector<Buffer<T>*> buffers() {
    std::vector<Buffer<T>*> out;
    for (auto& norm : norms_) {
      out.push_back(&norm.running_mean);
      out.push_back(&norm.running_var);
    }
    return out;
  }

  void zero_grad() {
    for (Param<T>* p : params()) p->zero_grad();
  }

  struct ForwardCache {
    std::vector<typename Conv3x3<T>::Cache> conv;
    std::vector<typename BatchNorm2d<T>::Cache> norm;
    std::vector<ReluCache<T>> relu;
    std::vector<typename MaxPool2d<T>::Cache> pool;
    typename GlobalAvgPool<T>::Cache gap;
    typename Linear<T>::Cache proj1, proj2, classifier;
    ReluCache<T> proj_relu;
    Head head = Head::features;
    int batch = 0;
  };

  /// Returns a row-major N x D matrix (D = F, P, or K depending on head).
  /// Train mode uses batch statistics in the normalization layers and
  /// updates their running averages; eval mode is deterministic.
  std::vector<T> forward(const Batch<T>& input, Head head, Mode mode, ForwardCache& cache) {
    const size_t blocks = convs_.size();
    cache.conv.resize(blocks);
    cache.norm.resize(blocks);
    cache.relu.resize(blocks);
    cache.pool.resize(blocks > 0 ? blocks - 1 : 0);
    cache.head = head;
    cache.batch = input.n;

    Batch<T> x = input;
    Batch<T> y;
    const bool train = mode == Mode::train;
    for (size_t i = 0; i < blocks; ++i) {
      convs_[i].forward(x, y, cache.conv[i]);
      norms_[i].forward(y, x, cache.norm[i], train, train);
      relu_forward(x, cache.relu[i]);
      if (i + 1 < blocks) {
        MaxPool2d<T>::forward(x, y, cache.pool[i]);
        x = std::move(y);
      }
    }

    std::vector<T> features;
    GlobalAvgPool<T>::forward(x, features, cache.gap);
    if (head == Head::features) return features;

    if (head == Head::projection) {
      std::vector<T> hidden, out;
      proj1_.forward(features, input.n, hidden, cache.proj1);
      Batch<T> as_batch;  // reuse relu on the flat vector
      as_batch.n = input.n;
      as_batch.c = proj1_.out_dim();
      as_batch.h = 1;
      as_batch.w = 1;
      as_batch.data = std::move(hidden);
      relu_forward(as_batch, cache.proj_relu);
      proj2_.forward(as_batch.data, input.n, out, cache.proj2);
      return out;
    }

    std::vector<T> logits;
    classifier_.forward(features, input.n, logits, cache.classifier);
    return logits;
  }

  /// Accumulates parameter gradients for the cached forward pass; optionally
  /// produces the gradient with respect to the input batch.
  void backward(const std::vector<T>& d_out, ForwardCache& cache, Batch<T>* d_input = nullptr) {
    std::vector<T> d_features;
    if (cache.head == Head::features) {
      d_features = d_out;
    } else if (cache.head == Head::projection) {
      std::vector<T> d_hidden;
      proj2_.backward(d_out, cache.proj2, &d_hidden);
      Batch<T> as_batch;
      as_batch.n = cache.batch;
      as_batch.c = proj1_.out_dim();
      as_batch.h = 1;
      as_batch.w = 1;
      as_batch.data = std::move(d_hidden);
      relu_backward(as_batch, cache.proj_relu);
      proj1_.backward(as_batch.data, cache.proj1, &d_features);
    } else {
      classifier_.backward(d_out, cache.classifier, &d_features);
    }

    Batch<T> dx;
    GlobalAvgPool<T>::backward(d_features, cache.gap, dx);

    const size_t blocks = convs_.size();
    for (size_t i = blocks; i-- > 0;) {
      if (i + 1 < blocks) {
        Batch<T> d_pre_pool;
        MaxPool2d<T>::backward(dx, cache.pool[i], d_pre_pool);
        dx = std::move(d_pre_pool);
      }
      relu_backward(dx, cache.relu[i]);
      Batch<T> d_pre_norm;
      norms_[i].backward(dx, cache.norm[i], &d_pre_norm);
      const bool need_input = d_input != nullptr || i > 0;
      Batch<T> d_pre_conv;
      convs_[i].backward(d_pre_norm, cache.conv[i], need_input ? &d_pre_conv : nullptr);
      dx = std::move(d_pre_conv);
    }
    if (d_input != nullptr) *d_input = std::move(dx);
  }

  /// Same-weights copy at another precision (double-precision grad checks).
  template <typename U>
  Model<U> cast() {
    Model<U> out(spec_);
    auto src = params();
    auto dst = out.params();
    for (size_t i = 0; i < src.size(); ++i)
      for (size_t j = 0; j < src[i]->value.size(); ++j)
        dst[i]->value[j] = static_cast<U>(src[i]->value[j]);
    auto sb = buffers();
    auto db = out.buffers();
    for (size_t i = 0; i < sb.size(); ++i)
      for (size_t j = 0; j < sb[i]->value.size(); ++j)
        db[i]->value[j] = static_cast<U>(sb[i]->value[j]);
    return out;
  }

private:
  void assign_groups() {
    for (size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].weight.group = ParamGroup::backbone;
      norms_[i].gamma.group = ParamGroup::backbone;
      norms_[i].beta.group = ParamGroup::backbone;
    }
    proj1_.weight.group = proj1_.bias.group = ParamGroup::backbone;
    proj2_.weight.group = proj2_.bias.group = ParamGroup::backbone;
    classifier_.weight.group = classifier_.bias.group = ParamGroup::head;
  }

  ModelSpec spec_;
  std::vector<Conv3x3<T>> convs_;
  std::vector<BatchNorm2d<T>> norms_;
  Linear<T> proj1_, proj2_, classifier_;
};

/// Fills a Batch from dataset images (shapes must agree).
template <typename T>
Batch<T> make_batch(const std::vector<const Image*>& images) {
  if (images.empty()) throw ContractError("empty batch");
  const Image& first = *images.front();
  Batch<T> out(static_cast<int>(images.size()), first.channels, first.height, first.width);
  for (size_t i = 0; i < images.size(); ++i) out.set_sample(static_cast<int>(i), *images[i]);
  return out;
}

}  // namespace dbd::nn
