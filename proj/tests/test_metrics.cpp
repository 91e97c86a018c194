#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbd/eval/filtering.hpp"
#include "dbd/eval/metrics.hpp"
#include "dbd/eval/probe.hpp"
#include "dbd/rng.hpp"

using namespace dbd;

TEST_CASE("accuracy: oracle classifier and constant classifier") {
  const std::vector<int> labels = {0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(accuracy_from_predictions(labels, labels) == 1.0);
  const std::vector<int> constant(8, 2);
  CHECK(accuracy_from_predictions(constant, labels) == doctest::Approx(0.25));
}

TEST_CASE("asr: always-target classifier scores 1; target-only sets error out") {
  const std::vector<int> labels = {0, 1, 2, 0, 1};
  const std::vector<int> always_target(5, 3);
  CHECK(asr_from_predictions(always_target, labels, 3) == 1.0);

  const std::vector<int> target_only(4, 3);
  CHECK_THROWS_AS(asr_from_predictions({3, 3, 3, 3}, target_only, 3), ContractError);
}

TEST_CASE("property: BA and ASR equal brute-force recounts on random tables") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(8));
    const int n = 1 + static_cast<int>(rng.uniform_index(40));
    std::vector<int> predictions(n), labels(n);
    for (int i = 0; i < n; ++i) {
      predictions[i] = static_cast<int>(rng.uniform_index(k));
      labels[i] = static_cast<int>(rng.uniform_index(k));
    }
    const int target = static_cast<int>(rng.uniform_index(k));

    // independent recount
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += predictions[i] == labels[i] ? 1 : 0;
    REQUIRE(accuracy_from_predictions(predictions, labels) ==
            static_cast<double>(correct) / n);

    int considered = 0, hits = 0;
    for (int i = 0; i < n; ++i) {
      if (labels[i] == target) continue;
      ++considered;
      hits += predictions[i] == target ? 1 : 0;
    }
    if (considered == 0) {
      REQUIRE_THROWS_AS(asr_from_predictions(predictions, labels, target), ContractError);
    } else {
      REQUIRE(asr_from_predictions(predictions, labels, target) ==
              static_cast<double>(hits) / considered);
    }
  }
}

TEST_CASE("filtering report: analytic cases and a counting oracle") {
  // zero poisons
  {
    CredibilitySplit split;
    split.high_credible_ids = {0, 1};
    split.low_credible_ids = {2, 3};
    split.filtering_rate = 50.0;
    std::vector<PoisonRecord> records;
    for (int i = 0; i < 4; ++i) records.push_back({i, false, 0, ""});
    const FilteringReport r = filtering_report(split, records);
    CHECK(r.poisons_total == 0);
    CHECK(r.poison_fraction_in_high == 0.0);
    CHECK(r.successful_filtering_rate == 0.0);
    CHECK(r.low_total == 2);
  }
  // all poisons captured
  {
    CredibilitySplit split;
    split.high_credible_ids = {0, 1};
    split.low_credible_ids = {2, 3};
    std::vector<PoisonRecord> records = {
        {0, false, 0, ""}, {1, false, 0, ""}, {2, true, 1, "g"}, {3, true, 2, "g"}};
    const FilteringReport r = filtering_report(split, records);
    CHECK(r.poison_capture_rate == 1.0);
    CHECK(r.successful_filtering_rate == 1.0);
  }
  // random splits against a recount
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(40));
    CredibilitySplit split;
    std::vector<PoisonRecord> records;
    int expected_high_poison = 0, expected_low_poison = 0;
    for (int i = 0; i < n; ++i) {
      const bool poisoned = rng.bernoulli(0.3);
      records.push_back({i, poisoned, 0, poisoned ? "g" : ""});
      if (rng.bernoulli(0.5)) {
        split.high_credible_ids.push_back(i);
        expected_high_poison += poisoned ? 1 : 0;
      } else {
        split.low_credible_ids.push_back(i);
        expected_low_poison += poisoned ? 1 : 0;
      }
    }
    const FilteringReport r = filtering_report(split, records);
    REQUIRE(r.poisons_in_high == expected_high_poison);
    REQUIRE(r.poisons_in_low == expected_low_poison);
  }
}

TEST_CASE("shrinkpad: shape, zero band, and an independent resize oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Image img(3, 16, 16);
    for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
    const Image out = shrinkpad(img, 0.1);
    REQUIRE(out.same_shape(img));
    const int band = static_cast<int>(std::ceil(0.1 * 16));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
          if (y >= 16 - band || x >= 16 - band) REQUIRE(out.at(c, y, x) == 0.0f);
  }

  // interior against a directly coded bilinear downscale
  Image img(1, 16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(0, y, x) = static_cast<float>(y * 16 + x) / 255.0f;
  const Image out = shrinkpad(img, 0.1);
  const int side = 14;  // floor(0.9 * 16)
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const float sy = (y + 0.5f) * 16.0f / side - 0.5f;
      const float sx = (x + 0.5f) * 16.0f / side - 0.5f;
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, 15);
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, 15);
      const int y1 = std::min(y0 + 1, 15);
      const int x1 = std::min(x0 + 1, 15);
      const float fy = std::clamp(sy, 0.0f, 15.0f) - y0;
      const float fx = std::clamp(sx, 0.0f, 15.0f) - x0;
      const float expect = (img.at(0, y0, x0) * (1 - fx) + img.at(0, y0, x1) * fx) * (1 - fy) +
                           (img.at(0, y1, x0) * (1 - fx) + img.at(0, y1, x1) * fx) * fy;
      REQUIRE(out.at(0, y, x) == doctest::Approx(expect).epsilon(1e-6));
    }

  CHECK_THROWS_AS(shrinkpad(img, 0.0), ConfigError);
  CHECK_THROWS_AS(shrinkpad(img, 1.0), ConfigError);
}

TEST_CASE("cluster probe: constructed geometry and the tie rule") {
  // Two classes at distinct centers; poisons sit exactly on the target center.
  const int dim = 3;
  std::vector<float> features;
  std::vector<int> labels;
  std::vector<PoisonRecord> records;
  auto push = [&](std::array<float, 3> f, int label, bool poisoned, int original) {
    features.insert(features.end(), f.begin(), f.end());
    labels.push_back(label);
    records.push_back({static_cast<std::int64_t>(labels.size() - 1), poisoned, original,
                       poisoned ? "g" : ""});
  };
  push({0, 0, 0}, 0, false, 0);
  push({0, 0, 0}, 0, false, 0);
  push({10, 0, 0}, 1, false, 1);
  push({10, 0, 0}, 1, false, 1);
  push({10, 0, 0}, 1, true, 0);  // poison relabeled to target 1, sits at target center
  const ClusterProbeResult at_target = cluster_probe(features, dim, labels, records, 2, 1);
  CHECK(at_target.frac_nearest_target == 1.0);
  CHECK(at_target.frac_nearest_truth == 0.0);

  // identical features everywhere: nearest centroid is class 0 by the tie rule
  std::vector<float> flat(5 * dim, 1.0f);
  const ClusterProbeResult tied = cluster_probe(flat, dim, labels, records, 2, 1);
  CHECK(tied.frac_nearest_target == 0.0);
  CHECK(tied.frac_nearest_truth == 1.0);  // original label is 0, the tie winner

  // class with no benign samples
  std::vector<int> labels_bad = {0, 0, 1, 1, 1};
  std::vector<PoisonRecord> records_bad = records;
  records_bad[2].is_poisoned = true;
  records_bad[3].is_poisoned = true;
  records_bad[4].is_poisoned = true;
  CHECK_THROWS_AS(cluster_probe(flat, dim, labels_bad, records_bad, 2, 1), ConfigError);
}

TEST_CASE("cluster probe fractions account for every poison") {
  Rng rng(4);
  const int dim = 4, k = 3;
  std::vector<float> features;
  std::vector<int> labels;
  std::vector<PoisonRecord> records;
  for (int i = 0; i < 60; ++i) {
    const int label = i % k;
    for (int d = 0; d < dim; ++d)
      features.push_back(static_cast<float>(label * 3 + rng.uniform(-1.0, 1.0)));
    labels.push_back(label);
    const bool poisoned = i % 5 == 0;
    records.push_back({i, poisoned, (label + 1) % k, poisoned ? "g" : ""});
  }
  const ClusterProbeResult r = cluster_probe(features, dim, labels, records, k, 1);
  CHECK(r.frac_nearest_target + r.frac_nearest_truth + r.frac_nearest_other ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.projection.size() == 60);
}
