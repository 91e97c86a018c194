#pragma once

#include <cmath>
#include <vector>

#include "dbd/nn/tensor.hpp"

namespace dbd::nn {

struct OptimConfig {
  enum class Algo { sgd_momentum, adam } algo = Algo::sgd_momentum;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  enum class Schedule { none, cosine, step } schedule = Schedule::none;
  int total_steps = 0;               // cosine horizon
  std::vector<int> milestones;       // step schedule breakpoints (in steps)
  double step_gamma = 0.1;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (schedule == Schedule::cosine && total_steps <= 0)
      throw ConfigError("cosine schedule needs total_steps > 0");
  }

  double lr_at(int step_index) const {
    switch (schedule) {
      case Schedule::none:
        return learning_rate;
      case Schedule::cosine: {
        const double t = std::min(step_index, total_steps) / static_cast<double>(total_steps);
        return learning_rate * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
      }
      case Schedule::step: {
        double lr = learning_rate;
        for (int m : milestones)
          if (step_index >= m) lr *= step_gamma;
        return lr;
      }
    }
    return learning_rate;
  }
};

/// Stateful optimizer over a fixed parameter list. Frozen groups are skipped
/// entirely: no update, no state advance, values stay bit-identical.
template <typename T>
class Optimizer {
public:
  Optimizer(std::vector<Param<T>*> params, OptimConfig config)
      : params_(std::move(params)), config_(config) {
    config_.validate();
    state_m_.resize(params_.size());
    state_v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      state_m_[i].assign(params_[i]->size(), 0.0);
      if (config_.algo == OptimConfig::Algo::adam) state_v_[i].assign(params_[i]->size(), 0.0);
    }
  }

  void set_frozen(ParamGroup group, bool frozen) {
    if (group == ParamGroup::backbone)
      backbone_frozen_ = frozen;
    else
      head_frozen_ = frozen;
  }

  void step(int step_index) {
    const double lr = config_.lr_at(step_index);
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      if ((p.group == ParamGroup::backbone && backbone_frozen_) ||
          (p.group == ParamGroup::head && head_frozen_))
        continue;
      auto& m = state_m_[i];
      if (config_.algo == OptimConfig::Algo::sgd_momentum) {
        for (size_t j = 0; j < p.size(); ++j) {
          const double g = static_cast<double>(p.grad[j]) +
                           config_.weight_decay * static_cast<double>(p.value[j]);
          m[j] = config_.momentum * m[j] + g;
          p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - lr * m[j]);
        }
      } else {
        auto& v = state_v_[i];
        const int t = adam_t_ + 1;
        const double bc1 = 1.0 - std::pow(config_.beta1, t);
        const double bc2 = 1.0 - std::pow(config_.beta2, t);
        for (size_t j = 0; j < p.size(); ++j) {
          const double g = static_cast<double>(p.grad[j]) +
                           config_.weight_decay * static_cast<double>(p.value[j]);
          m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
          v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
          const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config_.adam_eps);
          p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - lr * update);
        }
      }
    }
    ++adam_t_;
  }

private:
  std::vector<Param<T>*> params_;
  OptimConfig config_;
  std::vector<std::vector<double>> state_m_, state_v_;
  bool backbone_frozen_ = false;
  bool head_frozen_ = false;
  int adam_t_ = 0;
};

}  // namespace dbd::nn
