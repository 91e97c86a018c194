#include "dbd/eval/filtering.hpp"

namespace dbd {

FilteringReport filtering_report(const CredibilitySplit& split,
                                 const std::vector<PoisonRecord>& records) {
  std::map<std::int64_t, const PoisonRecord*> by_id;
  for (const auto& r : records) by_id[r.sample_id] = &r;
  if (by_id.size() != split.high_credible_ids.size() + split.low_credible_ids.size())
    throw ContractError("poison records do not cover the split");

  FilteringReport report;
  report.high_total = static_cast<std::int64_t>(split.high_credible_ids.size());
  report.low_total = static_cast<std::int64_t>(split.low_credible_ids.size());
  for (std::int64_t id : split.high_credible_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractError("split references unknown sample_id");
    if (it->second->is_poisoned)
      ++report.poisons_in_high;
    else
      ++report.benign_in_high;
  }
  for (std::int64_t id : split.low_credible_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractError("split references unknown sample_id");
    if (it->second->is_poisoned) ++report.poisons_in_low;
  }
  report.poisons_total = report.poisons_in_high + report.poisons_in_low;
  if (report.poisons_total > 0) {
    report.poison_fraction_in_high =
        static_cast<double>(report.poisons_in_high) / static_cast<double>(report.poisons_total);
    report.poison_capture_rate =
        static_cast<double>(report.poisons_in_low) / static_cast<double>(report.poisons_total);
  }
  if (report.low_total > 0)
    report.successful_filtering_rate =
        static_cast<double>(report.poisons_in_low) / static_cast<double>(report.low_total);
  return report;
}

}  // namespace dbd
