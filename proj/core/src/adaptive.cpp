#include "dbd/attack/adaptive.hpp"

#include <cmath>

#include "dbd/pipeline/stages.hpp"

namespace dbd {

namespace {

double l2_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

struct AttackContext {
  std::vector<std::vector<double>> class_center;  // fixed benign centers
  std::vector<size_t> pool;                       // X': indices into the dataset
};

AttackContext build_context(nn::Model<float>& backbone, const Dataset& benign,
                            const AdaptiveAttackSpec& spec) {
  const int f = backbone.spec().feature_dim();
  const int k = benign.num_classes;

  AttackContext ctx;
  ctx.class_center.assign(k, std::vector<double>(f, 0.0));
  {
    std::vector<const Image*> images;
    for (const auto& s : benign.samples) images.push_back(&s.image);
    const std::vector<float> features = extract_features(backbone, images);
    std::vector<std::int64_t> counts(k, 0);
    for (size_t i = 0; i < benign.samples.size(); ++i) {
      const int label = benign.samples[i].label;
      ++counts[label];
      for (int d = 0; d < f; ++d)
        ctx.class_center[label][d] +=
            static_cast<double>(features[i * static_cast<size_t>(f) + d]);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) throw ConfigError("adaptive attack: class without benign samples");
      for (double& v : ctx.class_center[c]) v /= static_cast<double>(counts[c]);
    }
  }

  const int m = spec.poison_count;
  if (static_cast<size_t>(m) > benign.size())
    throw ConfigError("adaptive attack poison_count exceeds the dataset");
  Rng rng(fold(spec.seed, "adaptive-pool"));
  std::vector<size_t> pool(benign.size());
  for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (int i = 0; i < m; ++i) {
    const size_t j = static_cast<size_t>(i) + rng.uniform_index(pool.size() - i);
    std::swap(pool[static_cast<size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<size_t>(m));
  ctx.pool = std::move(pool);
  return ctx;
}

Image apply_trigger(const AdaptiveAttackSpec& spec, const Dataset& benign, size_t sample_index,
                    const Image& trigger) {
  if (!spec.patch.has_value()) return trigger;
  Image out = benign.samples[sample_index].image;
  const auto& r = *spec.patch;
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x)
        out.at(c, r.row + y, r.col + x) = trigger.at(c, r.row + y, r.col + x);
  return out;
}

double objective_eval(nn::Model<float>& backbone, const Dataset& benign,
                      const AdaptiveAttackSpec& spec, const AttackContext& ctx,
                      const Image& trigger, Image* gradient) {
  const int f = backbone.spec().feature_dim();
  const int k = benign.num_classes;
  const int m = static_cast<int>(ctx.pool.size());

  std::vector<Image> poisoned;
  poisoned.reserve(ctx.pool.size());
  for (size_t idx : ctx.pool) poisoned.push_back(apply_trigger(spec, benign, idx, trigger));
  std::vector<const Image*> ptrs;
  for (const Image& img : poisoned) ptrs.push_back(&img);

  nn::Model<float>::ForwardCache cache;
  const std::vector<float> feats =
      backbone.forward(nn::make_batch<float>(ptrs), nn::Head::features, nn::Mode::eval, cache);

  std::vector<double> center(f, 0.0);
  for (int i = 0; i < m; ++i)
    for (int d = 0; d < f; ++d)
      center[d] += static_cast<double>(feats[static_cast<size_t>(i) * f + d]) / m;

  // J = (1/M) sum_x ||g_x - center|| - (1/K) sum_i ||center - class_i||
  double spread = 0.0;
  std::vector<std::vector<double>> unit_x(static_cast<size_t>(m), std::vector<double>(f, 0.0));
  for (int i = 0; i < m; ++i) {
    std::vector<double> diff(f);
    for (int d = 0; d < f; ++d)
      diff[d] = static_cast<double>(feats[static_cast<size_t>(i) * f + d]) - center[d];
    const double norm = l2_norm(diff);
    spread += norm / m;
    if (norm > 1e-12)
      for (int d = 0; d < f; ++d) unit_x[static_cast<size_t>(i)][d] = diff[d] / norm;
  }
  double separation = 0.0;
  std::vector<double> d_center(f, 0.0);
  for (int c = 0; c < k; ++c) {
    std::vector<double> diff(f);
    for (int d = 0; d < f; ++d) diff[d] = center[d] - ctx.class_center[c][d];
    const double norm = l2_norm(diff);
    separation += norm / k;
    if (norm > 1e-12)
      for (int d = 0; d < f; ++d) d_center[d] -= diff[d] / (norm * k);
  }
  const double objective = spread - separation;
  if (gradient == nullptr) return objective;

  // The center depends on every poisoned feature; fold its chain rule in.
  for (int i = 0; i < m; ++i)
    for (int d = 0; d < f; ++d) d_center[d] -= unit_x[static_cast<size_t>(i)][d] / m;

  std::vector<float> d_feats(static_cast<size_t>(m) * f);
  for (int i = 0; i < m; ++i)
    for (int d = 0; d < f; ++d)
      d_feats[static_cast<size_t>(i) * f + d] =
          static_cast<float>(unit_x[static_cast<size_t>(i)][d] / m + d_center[d] / m);

  backbone.zero_grad();
  nn::Batch<float> d_input;
  backbone.backward(d_feats, cache, &d_input);

  *gradient = Image(trigger.channels, trigger.height, trigger.width, 0.0f);
  for (int i = 0; i < m; ++i) {
    const float* row = d_input.data.data() + static_cast<size_t>(i) * trigger.pixels.size();
    if (!spec.patch.has_value()) {
      for (size_t p = 0; p < trigger.pixels.size(); ++p) gradient->pixels[p] += row[p];
    } else {
      const auto& r = *spec.patch;
      for (int c = 0; c < trigger.channels; ++c)
        for (int y = 0; y < r.height; ++y)
          for (int x = 0; x < r.width; ++x) {
            const size_t p = (static_cast<size_t>(c) * trigger.height + r.row + y) *
                                 static_cast<size_t>(trigger.width) +
                             r.col + x;
            gradient->pixels[p] += row[p];
          }
    }
  }
  return objective;
}

}  // namespace

double adaptive_objective(nn::Model<float>& backbone, const Dataset& benign,
                          const AdaptiveAttackSpec& spec, const Image& trigger,
                          Image* gradient) {
  spec.validate();
  benign.validate();
  const AttackContext ctx = build_context(backbone, benign, spec);
  return objective_eval(backbone, benign, spec, ctx, trigger, gradient);
}

AdaptiveAttackResult optimize_adaptive_trigger(nn::Model<float>& backbone, const Dataset& benign,
                                               const AdaptiveAttackSpec& spec) {
  spec.validate();
  benign.validate();
  const AttackContext ctx = build_context(backbone, benign, spec);
  const Image& shape_ref = benign.samples.front().image;

  Rng rng(fold(spec.seed, "adaptive-init"));
  Image trigger(shape_ref.channels, shape_ref.height, shape_ref.width);
  for (float& p : trigger.pixels) p = static_cast<float>(rng.uniform());

  std::vector<double> adam_m(trigger.pixels.size(), 0.0), adam_v(trigger.pixels.size(), 0.0);

  AdaptiveAttackResult result;
  result.objective_trace.reserve(static_cast<size_t>(spec.steps));
  for (int step = 0; step < spec.steps; ++step) {
    Image gradient;
    const double objective = objective_eval(backbone, benign, spec, ctx, trigger, &gradient);
    if (!std::isfinite(objective))
      throw ContractError("adaptive attack objective became non-finite at step " +
                          std::to_string(step));
    result.objective_trace.push_back(objective);

    const double bc1 = 1.0 - std::pow(0.9, step + 1);
    const double bc2 = 1.0 - std::pow(0.999, step + 1);
    for (size_t p = 0; p < trigger.pixels.size(); ++p) {
      const double g = static_cast<double>(gradient.pixels[p]);
      adam_m[p] = 0.9 * adam_m[p] + 0.1 * g;
      adam_v[p] = 0.999 * adam_v[p] + 0.001 * g * g;
      const double update = (adam_m[p] / bc1) / (std::sqrt(adam_v[p] / bc2) + 1e-8);
      trigger.pixels[p] = std::clamp(
          static_cast<float>(trigger.pixels[p] - spec.learning_rate * update), 0.0f, 1.0f);
    }
  }

  result.trigger = std::move(trigger);
  return result;
}

}  // namespace dbd
