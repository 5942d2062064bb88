// Apache License, Version 2.0, refer to LICENSE.txt

#include <set>

#include <gtest/gtest.h>

#include "bncrowd/synthgen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bncrowd;

TEST(Presets, Dimensions) {
  const auto d1 = preset("dataset1");
  EXPECT_EQ(d1.n_instances, 200u);
  EXPECT_EQ(d1.n_users, 60u);
  EXPECT_EQ(d1.n_categories, 3);
  EXPECT_EQ(d1.clusters.size(), 3u);
  EXPECT_EQ(d1.cluster_sizes(), (std::vector<std::size_t>{15, 27, 18}));
  const auto paper = preset("dataset2", PresetScale::Paper);
  EXPECT_EQ(paper.n_instances, 500u);
  EXPECT_EQ(paper.n_users, 200u);
  EXPECT_TRUE(std::isinf(paper.clusters[0].beta[0]));
  EXPECT_EQ(preset("dataset3").clusters.size(), 1u);
  EXPECT_THROW(preset("dataset4"), UsageError);
  EXPECT_THROW(parse_preset_scale("huge"), UsageError);
}

TEST(Simulate, DenseMatrixAndBlockLayout) {
  const auto spec = preset("dataset1");
  const auto d = simulate(spec, 7);
  EXPECT_EQ(d.labels.size(), 200u * 60u);
  EXPECT_EQ(d.z.size(), 200u);
  EXPECT_EQ(d.user_cluster[0], 0u);
  EXPECT_EQ(d.user_cluster[14], 0u);
  EXPECT_EQ(d.user_cluster[15], 1u);
  EXPECT_EQ(d.user_cluster[59], 2u);
  const auto again = simulate(spec, 7);
  EXPECT_EQ(d.z, again.z);
  EXPECT_EQ(d.labels.entries().size(), again.labels.entries().size());
  for (std::size_t k = 0; k < d.labels.entries().size(); ++k) {
    EXPECT_EQ(d.labels.entries()[k].label, again.labels.entries()[k].label);
  }
  EXPECT_NE(simulate(spec, 8).z, d.z);
}

TEST(Simulate, ConfusionRowsCentreOnClusterMeans) {
  const auto spec = preset("dataset1", PresetScale::Paper);
  const auto d = simulate(spec, 3);
  for (std::size_t m = 0; m < spec.clusters.size(); ++m) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 3);
    int n = 0;
    for (std::size_t l = 0; l < d.confusion.size(); ++l) {
      if (d.user_cluster[l] != m) continue;
      mean += d.confusion[l];
      ++n;
    }
    mean /= n;
    // sd of a Dir(10 eta) component is at most 0.5 / sqrt(11).
    EXPECT_LT((mean - spec.clusters[m].eta).cwiseAbs().maxCoeff(), 5 * 0.151 / std::sqrt(n));
  }
}

TEST(Simulate, InfinitePrecisionLabelsFollowClusterRows) {
  const auto spec = preset("dataset2");
  const auto d = simulate(spec, 4);
  for (std::size_t l = 0; l < d.confusion.size(); ++l) {
    EXPECT_TRUE(d.confusion[l].isApprox(spec.clusters[d.user_cluster[l]].eta));
  }
  // Label frequencies of the biased cluster given truth 1.
  std::vector<double> counts(3, 0.0);
  for (const auto& a : d.labels.entries()) {
    if (d.user_cluster[a.user] == 2 && d.z[a.instance] == 1) counts[a.label] += 1;
  }
  EXPECT_GT(oracle::chi_squared_pvalue(counts, {0.05, 0.9, 0.05}), 1e-3);
}

TEST(PopulationSpec, ValidationNamesTheField) {
  auto spec = preset("dataset1");
  spec.clusters[1].eta(0, 0) = 0.9;
  try {
    spec.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("clusters[1].eta"), std::string::npos);
  }
  spec = preset("dataset1");
  spec.clusters[0].weight = 0.5;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = preset("dataset1");
  spec.tau.resize(2);
  EXPECT_THROW(simulate(spec, 1), ValidationError);
}

TEST(Mask, RetainedCount) {
  EXPECT_EQ(retained_count(200, 60, 0.9), 1200u);
  EXPECT_EQ(retained_count(200, 60, 0.975), 300u);
  EXPECT_EQ(retained_count(200, 60, 0.85), 1800u);
  EXPECT_EQ(retained_count(3, 3, 0.5), 5u);
  EXPECT_EQ(retained_count(10, 10, 0.0), 100u);
}

TEST(Mask, ExactSizeCoverageAndSubset) {
  const auto d = simulate(preset("dataset1"), 11);
  for (double s : {0.825, 0.9, 0.975}) {
    const auto m = mask(d.labels, s, 5);
    EXPECT_EQ(m.size(), retained_count(200, 60, s));
    for (std::size_t i = 0; i < 200; ++i) EXPECT_FALSE(m.instance_labels(i).empty());
    for (std::size_t l = 0; l < 60; ++l) EXPECT_FALSE(m.user_labels(l).empty());
    for (const auto& a : m.entries()) EXPECT_EQ(d.labels.at(a.instance, a.user), a.label);
  }
  const auto a = mask(d.labels, 0.95, 9);
  const auto b = mask(d.labels, 0.95, 9);
  const auto c = mask(d.labels, 0.95, 10);
  auto keys = [](const LabelMatrix& y) {
    std::vector<std::pair<std::size_t, std::size_t>> k;
    for (const auto& e : y.entries()) k.emplace_back(e.instance, e.user);
    return k;
  };
  EXPECT_EQ(keys(a), keys(b));
  EXPECT_NE(keys(a), keys(c));
}

TEST(Mask, EntriesAreKeptUniformly) {
  // On a dense 4 x 3 matrix every entry is kept with probability 6/12.
  const auto y = fixture::dense_labels(4, 3, 2, 1);
  std::vector<double> hits(12, 0.0);
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    const auto m = mask(y, 0.5, r);
    for (const auto& e : m.entries()) hits[e.instance * 3 + e.user] += 1;
  }
  for (double h : hits) EXPECT_NEAR(h / reps, 0.5, 0.04);
}

TEST(Mask, Errors) {
  const auto y = fixture::dense_labels(10, 10, 2, 2);
  EXPECT_THROW(mask(y, 1.0, 1), DomainError);
  EXPECT_THROW(mask(y, -0.1, 1), DomainError);
  // Ten instances need ten labels; 0.95 keeps five.
  EXPECT_THROW(mask(y, 0.95, 1), FeasibilityError);
  const auto sparse = mask(y, 0.5, 1);
  EXPECT_THROW(mask(sparse, 0.2, 1), FeasibilityError);
  LabelMatrix gap(2, 2, 2, {{0, 0, 1}, {0, 1, 0}});
  EXPECT_THROW(mask(gap, 0.0, 1), FeasibilityError);
}
