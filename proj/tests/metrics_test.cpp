#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hamos/metrics.hpp"
#include "oracles.hpp"

using namespace hamos;

namespace {

std::vector<double> draws(std::size_t n, std::mt19937_64& rng, double shift = 0.0, int levels = 0) {
  std::normal_distribution<double> n01;
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    double x = n01(rng) + shift;
    if (levels > 0) x = std::round(x * levels) / levels;  // force ties
    v.push_back(x);
  }
  return v;
}

}  // namespace

TEST(KnnScore, Examples) {
  const std::vector<UnitVector> ref{oracle::basis(3, 0)};
  EXPECT_EQ(knn_score(ref, oracle::basis(3, 0), 1), 0.0);
  EXPECT_EQ(knn_score(ref, oracle::basis(3, 0, -1), 1), -2.0);
  try {
    (void)knn_score(ref, oracle::basis(3, 0), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(KnnScore, MatchesOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + t % 30;
    std::vector<UnitVector> ref;
    std::vector<Vec> pts;
    for (int i = 0; i < 40 + t; ++i) {
      ref.push_back(oracle::random_unit(d, rng));
      pts.push_back(ref.back().vec());
    }
    const ReferenceSet rs(ref);
    for (int q = 0; q < 5; ++q) {
      const auto z = oracle::random_unit(d, rng);
      const std::size_t k = 1 + rng() % ref.size();
      EXPECT_EQ(rs.score(z, k), -oracle::kth(pts, z.vec(), k).first);
    }
  }
}

TEST(Threshold, Examples) {
  std::vector<double> s;
  for (int i = 1; i <= 100; ++i) s.push_back(i);
  EXPECT_EQ(calibrate_threshold(s), 6.0);
  EXPECT_EQ(calibrate_threshold(std::vector<double>(30, 2.5)), 2.5);
  std::vector<double> twenty;
  for (int i = 0; i < 20; ++i) twenty.push_back(i);
  // 19 of 20 scores >= 1 already satisfies 95%.
  EXPECT_EQ(calibrate_threshold(twenty), 1.0);
  try {
    (void)calibrate_threshold(std::vector<double>(19, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
}

TEST(Threshold, MatchesCountingOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto s = draws(20 + t * 7, rng, 0.0, t % 2 ? 4 : 0);
    EXPECT_EQ(calibrate_threshold(s), oracle::threshold(s));
  }
}

TEST(Fpr95, Examples) {
  std::vector<double> id, low, high;
  for (int i = 0; i < 40; ++i) {
    id.push_back(10 + i);
    low.push_back(-i);
    high.push_back(100 + i);
  }
  EXPECT_EQ(fpr_at_tpr95(id, low), 0.0);
  EXPECT_EQ(fpr_at_tpr95(id, high), 1.0);

  std::mt19937_64 rng(3);
  const auto a = draws(10000, rng), b = draws(10000, rng);
  EXPECT_NEAR(fpr_at_tpr95(a, b), 0.95, 0.01);
}

TEST(Fpr95, MonotoneUnderShift) {
  std::mt19937_64 rng(4);
  const auto id = draws(200, rng);
  auto ood = draws(200, rng, -0.5);
  double prev = fpr_at_tpr95(id, ood);
  for (int i = 0; i < 20; ++i) {
    for (double& x : ood) x -= 0.1;
    const double now = fpr_at_tpr95(id, ood);
    EXPECT_LE(now, prev);
    prev = now;
  }
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{1, 3}, std::vector<double>{2}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{5, 6}, std::vector<double>{1, 2}), 1.0);
  EXPECT_EQ(aupr(std::vector<double>{5, 6}, std::vector<double>{1, 2}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>(5, 1.0), std::vector<double>(7, 1.0)), 0.5);
}

TEST(Auroc, MatchesOracleWithTies) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto id = draws(1 + t * 3, rng, 0.5, t % 3 ? 2 : 0);
    const auto ood = draws(1 + t * 2, rng, 0.0, t % 3 ? 2 : 0);
    EXPECT_NEAR(auroc(id, ood), oracle::auroc(id, ood), 1e-12);
    EXPECT_NEAR(auroc(id, ood) + auroc(ood, id), 1.0, 1e-12);
    EXPECT_NEAR(aupr(id, ood), oracle::aupr(id, ood), 1e-12);
    if (id.size() >= 20) EXPECT_EQ(fpr_at_tpr95(id, ood), oracle::fpr95(id, ood));
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(6);
  const auto id = draws(100, rng, 0.7, 3);
  const auto ood = draws(80, rng, 0.0, 3);
  auto f = [](std::vector<double> v) {
    for (double& x : v) x = std::exp(3 * x) + 7;
    return v;
  };
  EXPECT_NEAR(auroc(f(id), f(ood)), auroc(id, ood), 1e-15);
}

TEST(Report, BundlesMetrics) {
  std::mt19937_64 rng(7);
  const auto id = draws(100, rng, 1.0), ood = draws(100, rng);
  const auto r = make_report(id, ood);
  EXPECT_EQ(r.fpr95, fpr_at_tpr95(id, ood));
  EXPECT_EQ(r.auroc, auroc(id, ood));
  EXPECT_EQ(r.aupr, aupr(id, ood));
  EXPECT_EQ(r.threshold, calibrate_threshold(id));
  for (double x : {r.fpr95, r.auroc, r.aupr}) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(HypersphereQuality, Examples) {
  const std::vector<UnitVector> mus{oracle::basis(3, 0), oracle::basis(3, 1)};
  const std::vector<UnitVector> ood{oracle::basis(3, 2)};
  const std::vector<UnitVector> id{oracle::basis(3, 0), oracle::basis(3, 1)};
  const std::vector<int> labels{0, 1};
  const auto q = hypersphere_quality(ood, id, labels, mus);
  EXPECT_NEAR(q.separation_deg, 90.0, 1e-12);
  EXPECT_NEAR(q.dispersion_deg, 90.0, 1e-12);
  EXPECT_NEAR(q.compactness_deg, 0.0, 1e-12);
}

TEST(HypersphereQuality, AnglesInRange) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    std::vector<UnitVector> mus, ood, id;
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) mus.push_back(oracle::random_unit(5, rng));
    for (int i = 0; i < 10; ++i) {
      ood.push_back(oracle::random_unit(5, rng));
      id.push_back(oracle::random_unit(5, rng));
      labels.push_back(i % 4);
    }
    const auto q = hypersphere_quality(ood, id, labels, mus);
    for (double a : {q.separation_deg, q.dispersion_deg, q.compactness_deg}) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 180.0);
    }
  }
}
