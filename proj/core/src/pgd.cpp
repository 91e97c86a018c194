#include "dbd/attack/pgd.hpp"

#include "dbd/losses.hpp"

namespace dbd {

Image pgd_perturb(nn::Model<float>& surrogate, const Image& image, int label,
                  const PGDSpec& spec) {
  spec.validate();
  if (label < 0 || label >= surrogate.spec().num_classes)
    throw ContractError("pgd label out of range for the surrogate");
  const float radius = static_cast<float>(spec.epsilon / 255.0);
  if (spec.steps == 0 || radius == 0.0f) return image;
  const float step = static_cast<float>(spec.resolved_step_size());

  Image current = image;
  nn::Model<float>::ForwardCache cache;
  for (int it = 0; it < spec.steps; ++it) {
    std::vector<const Image*> one{&current};
    const nn::Batch<float> batch = nn::make_batch<float>(one);
    const std::vector<float> logits =
        surrogate.forward(batch, nn::Head::logits, nn::Mode::eval, cache);

    std::vector<float> d_logits;
    losses::ce_on_logits(logits, {label}, surrogate.spec().num_classes, -30.0, &d_logits);

    surrogate.zero_grad();
    nn::Batch<float> d_input;
    surrogate.backward(d_logits, cache, &d_input);

    for (size_t i = 0; i < current.pixels.size(); ++i) {
      const float g = d_input.data[i];
      // ascend: the attack maximizes the classification loss
      float v = current.pixels[i] + step * (g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f));
      v = std::clamp(v, image.pixels[i] - radius, image.pixels[i] + radius);
      current.pixels[i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return current;
}

}  // namespace dbd
