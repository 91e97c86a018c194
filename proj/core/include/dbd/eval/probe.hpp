#pragma once

#include "dbd/eval/metrics.hpp"

namespace dbd {

/// Feature-space cluster probe: computes per-class centroids from benign
/// samples and, for each poisoned sample, finds the nearest centroid in l2
/// (lowest class index wins ties). Reports the fraction of poisoned samples
/// whose nearest centroid is the target class vs their original class, plus a
/// top-2 principal-direction projection of every feature row for plotting.
///
/// `features` is row-major N x dim, aligned with `labels` and `records`.
ClusterProbeResult cluster_probe(const std::vector<float>& features, int dim,
                                 const std::vector<int>& labels,
                                 const std::vector<PoisonRecord>& records, int num_classes,
                                 int target_label);

/// Writes the projection as CSV: sample_id,x,y,label,is_poisoned.
void write_probe_csv(const ClusterProbeResult& result, const std::filesystem::path& path);

}  // namespace dbd
