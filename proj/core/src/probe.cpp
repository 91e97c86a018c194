#include "dbd/eval/probe.hpp"

#include <Eigen/Dense>
#include <fstream>

namespace dbd {

ClusterProbeResult cluster_probe(const std::vector<float>& features, int dim,
                                 const std::vector<int>& labels,
                                 const std::vector<PoisonRecord>& records, int num_classes,
                                 int target_label) {
  const size_t n = labels.size();
  if (features.size() != n * static_cast<size_t>(dim) || records.size() != n)
    throw ContractError("cluster probe input sizes are inconsistent");
  if (n == 0) throw ContractError("cluster probe needs samples");

  // Benign class centroids.
  std::vector<std::vector<double>> centroids(num_classes, std::vector<double>(dim, 0.0));
  std::vector<std::int64_t> counts(num_classes, 0);
  for (size_t i = 0; i < n; ++i) {
    if (records[i].is_poisoned) continue;
    ++counts[labels[i]];
    for (int d = 0; d < dim; ++d)
      centroids[labels[i]][d] += static_cast<double>(features[i * dim + d]);
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[c] == 0)
      throw ConfigError("cluster probe: class " + std::to_string(c) + " has no benign samples");
    for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);
  }

  ClusterProbeResult out;
  std::int64_t poisons = 0, near_target = 0, near_truth = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!records[i].is_poisoned) continue;
    ++poisons;
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_classes; ++c) {
      double dist = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = static_cast<double>(features[i * dim + d]) - centroids[c][d];
        dist += diff * diff;
      }
      if (dist < best_dist) {  // strict: ties keep the lowest class index
        best_dist = dist;
        best = c;
      }
    }
    // Each poison lands in exactly one bucket; under clean-label attacks
    // (truth == target) the target bucket takes precedence.
    if (best == target_label)
      ++near_target;
    else if (best == records[i].original_label)
      ++near_truth;
  }
  if (poisons > 0) {
    out.frac_nearest_target = static_cast<double>(near_target) / static_cast<double>(poisons);
    out.frac_nearest_truth = static_cast<double>(near_truth) / static_cast<double>(poisons);
    out.frac_nearest_other = 1.0 - out.frac_nearest_target - out.frac_nearest_truth;
  }

  // Top-2 principal directions of the centered feature matrix.
  Eigen::MatrixXd centered(n, dim);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) mean(d) += static_cast<double>(features[i * dim + d]);
  mean /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d)
      centered(static_cast<Eigen::Index>(i), d) =
          static_cast<double>(features[i * dim + d]) - mean(d);
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / std::max<double>(1.0, static_cast<double>(n) - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd first = solver.eigenvectors().col(dim - 1);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(dim);
  if (dim >= 2) second = solver.eigenvectors().col(dim - 2);

  out.projection.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd row = centered.row(static_cast<Eigen::Index>(i));
    out.projection.push_back({records[i].sample_id, row.dot(first), row.dot(second), labels[i],
                              records[i].is_poisoned});
  }
  return out;
}

void write_probe_csv(const ClusterProbeResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out << "sample_id,x,y,label,is_poisoned\n";
  for (const auto& p : result.projection)
    out << p.sample_id << "," << p.x << "," << p.y << "," << p.label << ","
        << (p.is_poisoned ? 1 : 0) << "\n";
}

}  // namespace dbd
