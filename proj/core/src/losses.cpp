#include "dbd/losses.hpp"

namespace dbd {

void LossConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("tau must be > 0");
  if (sharpen_T <= 0.0) throw ConfigError("sharpen_T must be > 0");
  if (lambda_u < 0.0) throw ConfigError("lambda_u must be >= 0");
  if (log_clamp >= 0.0) throw ConfigError("log_clamp must be < 0");
  if (mix_beta_alpha <= 0.0) throw ConfigError("mix_beta_alpha must be > 0");
  if (guess_augments < 1) throw ConfigError("guess_augments must be >= 1");
  if (sce_alpha < 0.0 || sce_beta < 0.0) throw ConfigError("sce weights must be >= 0");
}

namespace losses {

double cross_entropy(std::span<const double> p, std::span<const double> q, double log_clamp,
                     std::vector<double>* dp) {
  check_distribution(p);
  if (p.size() != q.size()) throw ContractError("distribution size mismatch");
  const double floor = std::exp(log_clamp);
  if (dp != nullptr) dp->assign(p.size(), 0.0);
  double loss = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    if (p[k] > floor) {
      loss -= q[k] * std::log(p[k]);
      if (dp != nullptr) (*dp)[k] = -q[k] / p[k];
    } else {
      loss -= q[k] * log_clamp;
    }
  }
  return loss;
}

double reverse_cross_entropy(std::span<const double> p, std::span<const double> q,
                             double log_clamp, std::vector<double>* dp) {
  check_distribution(p);
  if (p.size() != q.size()) throw ContractError("distribution size mismatch");
  const double floor = std::exp(log_clamp);
  if (dp != nullptr) dp->assign(p.size(), 0.0);
  double loss = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    // The same clamped log as the forward term, so that the symmetric sum at
    // weights (1, 1) is exactly symmetric in (p, q); log(0) maps to A.
    const double logq = q[k] > floor ? std::log(q[k]) : log_clamp;
    loss -= p[k] * logq;
    if (dp != nullptr) (*dp)[k] = -logq;
  }
  return loss;
}

double sce(std::span<const double> p, std::span<const double> q, double alpha, double beta,
           double log_clamp, std::vector<double>* dp) {
  std::vector<double> d_ce, d_rce;
  const double ce = cross_entropy(p, q, log_clamp, dp != nullptr ? &d_ce : nullptr);
  const double rce = reverse_cross_entropy(p, q, log_clamp, dp != nullptr ? &d_rce : nullptr);
  if (dp != nullptr) {
    dp->assign(p.size(), 0.0);
    for (size_t k = 0; k < p.size(); ++k) (*dp)[k] = alpha * d_ce[k] + beta * d_rce[k];
  }
  return alpha * ce + beta * rce;
}

std::vector<double> sharpen(std::span<const double> p, double temperature) {
  if (temperature <= 0.0) throw ContractError("sharpen temperature must be > 0");
  std::vector<double> out(p.size());
  double denom = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    out[k] = p[k] > 0.0 ? std::pow(p[k], 1.0 / temperature) : 0.0;
    denom += out[k];
  }
  if (denom <= 0.0) throw ContractError("sharpen input has no mass");
  for (double& v : out) v /= denom;
  return out;
}

std::vector<double> one_hot(int label, int num_classes) {
  if (label < 0 || label >= num_classes) throw ContractError("one_hot label out of range");
  std::vector<double> q(num_classes, 0.0);
  q[label] = 1.0;
  return q;
}

}  // namespace losses
}  // namespace dbd
