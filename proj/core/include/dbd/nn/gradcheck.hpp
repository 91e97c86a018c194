#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbd/nn/tensor.hpp"
#include "dbd/rng.hpp"

namespace dbd::nn {

struct GradCheckFailure {
  std::string param;
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int probes = 0;
  std::vector<GradCheckFailure> failures;
  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// Central-difference check of analytic parameter gradients. `loss` must be
/// a deterministic pure evaluation; `grads` must fill param.grad for the same
/// input (it is invoked once, before probing). Probes sample random
/// coordinates of random parameters; errors are relative with an absolute
/// floor so near-zero gradients are compared sanely.
///
/// Each probe evaluates differences at both `step` and `step/2`. When the two
/// estimates disagree, the coordinate sits on a non-smooth point (a relu or
/// pooling kink within the stencil) where central differences say nothing
/// about the gradient, so the probe is redrawn; `probes` counts the smooth
/// ones actually checked.
inline GradCheckReport finite_diff_gradcheck(const std::function<double()>& loss,
                                             const std::function<void()>& grads,
                                             const std::vector<Param<double>*>& params,
                                             int probe_count, double step, double tol, Rng rng) {
  for (Param<double>* p : params) p->zero_grad();
  grads();
  // Snapshot the analytic gradients: probing may invoke `loss` closures that
  // themselves accumulate into the live gradient buffers.
  std::vector<std::vector<double>> analytic_grads;
  analytic_grads.reserve(params.size());
  for (Param<double>* p : params) analytic_grads.push_back(p->grad);

  GradCheckReport report;
  int attempts = 0;
  const int max_attempts = probe_count * 8;
  while (report.probes < probe_count && attempts < max_attempts) {
    ++attempts;
    const size_t param_index = rng.uniform_index(params.size());
    Param<double>& p = *params[param_index];
    if (p.size() == 0) continue;
    const size_t j = rng.uniform_index(p.size());
    const double saved = p.value[j];
    auto central = [&](double h) {
      p.value[j] = saved + h;
      const double up = loss();
      p.value[j] = saved - h;
      const double down = loss();
      p.value[j] = saved;
      return (up - down) / (2.0 * h);
    };
    const double coarse = central(step);
    const double numeric = central(step / 2.0);
    const double stencil_denom = std::max({std::abs(coarse), std::abs(numeric), 1e-4});
    if (std::abs(coarse - numeric) / stencil_denom > tol) continue;  // kink in the stencil

    ++report.probes;
    const double analytic = analytic_grads[param_index][j];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error) report.max_rel_error = rel;
    if (rel > tol) report.failures.push_back({p.name, j, analytic, numeric, rel});
  }
  return report;
}

}  // namespace dbd::nn
