#pragma once

#include "dbd/eval/metrics.hpp"
#include "dbd/pipeline/stages.hpp"

namespace dbd {

/// Poison-vs-benign accounting of a credibility split: how many poisons
/// stayed in D_h, how many were captured in D_l, and the successful
/// filtering rate (filtered poisons over all filtered samples).
FilteringReport filtering_report(const CredibilitySplit& split,
                                 const std::vector<PoisonRecord>& records);

}  // namespace dbd
