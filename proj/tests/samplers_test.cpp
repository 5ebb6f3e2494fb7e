#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hamos/samplers.hpp"
#include "oracles.hpp"
#include "test_fields.hpp"

using namespace hamos;

namespace {

IdStore two_clusters(std::size_t d, std::size_t B, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  IdStore s(2, d, B);
  for (int c = 0; c < 2; ++c) {
    const auto center = oracle::random_unit(d, rng);
    for (std::size_t i = 0; i < B; ++i) {
      Vec v = oracle::random_vec(d, rng, 0.3);
      for (std::size_t j = 0; j < d; ++j) v[j] += center[j];
      s.insert(c, normalize(std::move(v)));
    }
    s.set_prototype(c, center);
  }
  return s;
}

ChainState start_state(const UnitVector& z, std::uint64_t seed) {
  ChainState st;
  st.position = z;
  st.rng = Rng(seed);
  return st;
}

}  // namespace

TEST(HmcConfig, ValidationAndMalaSteps) {
  HmcConfig c;
  EXPECT_EQ(c.leapfrog_steps, 3);
  EXPECT_EQ(c.step_size, 0.1);
  EXPECT_EQ(c.rounds, 5);
  EXPECT_EQ(c.history_window, 2);
  c.variant = SamplerVariant::MALA;
  EXPECT_EQ(c.effective_steps(), 1);
  c.variant = SamplerVariant::mMALA;
  EXPECT_EQ(c.effective_steps(), 1);
  c.variant = SamplerVariant::RMHMC;
  EXPECT_EQ(c.effective_steps(), 3);
  c.leapfrog_steps = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(parse_variant("mMALA"), SamplerVariant::mMALA);
  EXPECT_THROW(parse_variant("NUTS"), Error);
}

TEST(Momentum, TangentUnbiasedAndDeterministic) {
  Rng rng(11);
  std::mt19937_64 zr(1);
  const auto z = oracle::random_unit(6, zr);
  const int n = 100000;
  Vec sum(6, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto q = draw_momentum(z, rng);
    ASSERT_NEAR(dot(q.coords, z.coords()), 0.0, 1e-8);
    for (std::size_t j = 0; j < 6; ++j) sum[j] += q.coords[j];
  }
  for (std::size_t j = 0; j < 6; ++j) {
    const double sigma = std::sqrt((1.0 - z[j] * z[j]) / n);
    EXPECT_LE(std::abs(sum[j] / n), 3 * sigma + 1e-12);
  }
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(draw_momentum(z, a).coords, draw_momentum(z, b).coords);
}

TEST(Hamiltonian, Examples) {
  const auto z = oracle::basis(3, 0);
  const testing_fields::ConstantField zero{0.0};
  EXPECT_EQ(hamiltonian(zero, z, TangentVector{{0, 0, 0}, z}), 0.0);
  EXPECT_EQ(hamiltonian(zero, z, TangentVector{{0, 2, 0}, z}), 2.0);

  const auto s = two_clusters(8, 30, 1);
  const KnnPotential field(EnergyContext(s, {0, 1}, 5, 2.0), GradientMode::Analytic);
  std::mt19937_64 rng(2);
  const auto y = oracle::random_unit(8, rng);
  const auto q = project_tangent(oracle::random_vec(8, rng), y);
  EXPECT_DOUBLE_EQ(hamiltonian(field, y, q), potential(field.context(), y) + 0.5 * q.norm() * q.norm());
}

TEST(Leapfrog, ZeroGradientIsPureGeodesicMotion) {
  std::mt19937_64 rng(3);
  const testing_fields::ConstantField flat{1.5};
  for (int t = 0; t < 20; ++t) {
    const auto z = oracle::random_unit(7, rng);
    const auto q = project_tangent(oracle::random_vec(7, rng), z);
    const auto traj = leapfrog_trajectory(flat, z, q, 4, 0.2);
    UnitVector zz = z;
    TangentVector qq = q;
    for (int l = 0; l < 4; ++l) std::tie(zz, qq) = geodesic_step(zz, qq, 0.2);
    EXPECT_EQ(traj.position, zz);
    EXPECT_EQ(traj.momentum.coords, qq.coords);
  }
}

TEST(Leapfrog, ConservesEnergyAtSmallStep) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto s = two_clusters(4 + t % 13, 40, 100 + t);
    const KnnPotential field(EnergyContext(s, {0, 1}, 1 + t % 20, 2.0), GradientMode::Analytic);
    const auto z = oracle::random_unit(s.dim(), rng);
    const auto q = project_tangent(oracle::random_vec(s.dim(), rng), z);
    const auto traj = leapfrog_trajectory(field, z, q, 3, 1e-4);
    EXPECT_LE(std::abs(hamiltonian(field, traj.position, traj.momentum) - hamiltonian(field, z, q)), 1e-6);
  }
}

TEST(Leapfrog, DefaultsStayOnSphere) {
  std::mt19937_64 rng(5);
  const auto s = two_clusters(16, 100, 6);
  for (auto mode : {GradientMode::Scaled, GradientMode::Analytic}) {
    const KnnPotential field(EnergyContext(s, {0, 1}, 50, 2.0), mode);
    for (int t = 0; t < 50; ++t) {
      const auto z = oracle::random_unit(16, rng);
      const auto q = project_tangent(oracle::random_vec(16, rng), z);
      const auto traj = leapfrog_trajectory(field, z, q, 3, 0.1);
      EXPECT_NEAR(norm(traj.position.coords()), 1.0, 1e-9);
      EXPECT_NEAR(dot(traj.position.coords(), traj.momentum.coords), 0.0, 1e-8);
    }
  }
}

TEST(Transition, FlatFieldAlwaysAcceptsUnlessMarginFails) {
  const testing_fields::ConstantField flat{0.0};
  std::mt19937_64 rng(6);
  auto st = start_state(oracle::random_unit(5, rng), 1);
  HmcConfig cfg;
  for (int r = 0; r < 20; ++r) {
    const auto rec = hmc_transition(flat, NoMargin{}, st, cfg);
    EXPECT_GE(rec.alpha, 1.0 - 1e-12);
    EXPECT_TRUE(rec.accepted);
    EXPECT_EQ(st.position, rec.proposed);
    EXPECT_EQ(rec.round, r + 1);
  }
  EXPECT_EQ(st.history.size(), 20u);

  const UnitVector before = st.position;
  const auto never = [](const UnitVector&) { return false; };
  const auto rec = hmc_transition(flat, never, st, cfg);
  EXPECT_TRUE(rec.mh_accept);
  EXPECT_FALSE(rec.margin_pass);
  EXPECT_FALSE(rec.accepted);
  EXPECT_EQ(st.position, before);
  EXPECT_EQ(st.history.size(), 20u);
}

TEST(Transition, AcceptedIsMhAndMargin) {
  const auto s = two_clusters(8, 60, 7);
  const KnnPotential field(EnergyContext(s, {0, 1}, 10, 2.0), GradientMode::Scaled);
  const KdeMargin margin{&s, 2.0, hard_margin_threshold(s, {0, 1}, 2.0, 0.1)};
  for (auto v : {SamplerVariant::RandomWalk, SamplerVariant::HMC, SamplerVariant::MALA, SamplerVariant::mMALA,
                 SamplerVariant::RMHMC}) {
    HmcConfig cfg;
    cfg.variant = v;
    cfg.step_size = 0.4;
    auto st = start_state(s.midpoint({0, 1}), 3);
    for (int r = 0; r < 200; ++r) {
      const auto rec = transition(field, margin, st, cfg);
      EXPECT_EQ(rec.accepted, rec.mh_accept && rec.margin_pass);
      EXPECT_NEAR(norm(st.position.coords()), 1.0, 1e-9);
      EXPECT_NEAR(norm(rec.proposed.coords()), 1.0, 1e-9);
      if (rec.accepted) EXPECT_EQ(st.position, rec.proposed);
    }
  }
}

TEST(Transition, DeterministicForEveryVariant) {
  const auto s = two_clusters(8, 60, 8);
  const KnnPotential field(EnergyContext(s, {0, 1}, 10, 2.0), GradientMode::Analytic);
  const KdeMargin margin{&s, 2.0, hard_margin_threshold(s, {0, 1}, 2.0, 0.1)};
  for (auto v : {SamplerVariant::RandomWalk, SamplerVariant::HMC, SamplerVariant::MALA, SamplerVariant::mMALA,
                 SamplerVariant::RMHMC}) {
    HmcConfig cfg;
    cfg.variant = v;
    auto a = start_state(s.midpoint({0, 1}), 42);
    auto b = start_state(s.midpoint({0, 1}), 42);
    for (int r = 0; r < 30; ++r) {
      const auto ra = transition(field, margin, a, cfg);
      const auto rb = transition(field, margin, b, cfg);
      EXPECT_EQ(ra.proposed, rb.proposed);
      EXPECT_EQ(ra.alpha, rb.alpha);
      EXPECT_EQ(ra.accepted, rb.accepted);
    }
  }
}

TEST(Transition, MalaEqualsHmcWithOneStep) {
  const auto s = two_clusters(8, 60, 9);
  const KnnPotential field(EnergyContext(s, {0, 1}, 10, 2.0), GradientMode::Scaled);
  const KdeMargin margin{&s, 2.0, hard_margin_threshold(s, {0, 1}, 2.0, 0.1)};
  HmcConfig mala;
  mala.variant = SamplerVariant::MALA;
  HmcConfig hmc;
  hmc.leapfrog_steps = 1;
  auto a = start_state(s.midpoint({0, 1}), 7);
  auto b = start_state(s.midpoint({0, 1}), 7);
  for (int r = 0; r < 50; ++r) {
    const auto ra = transition(field, margin, a, mala);
    const auto rb = transition(field, margin, b, hmc);
    EXPECT_EQ(ra.proposed, rb.proposed);
    EXPECT_EQ(ra.h_prop, rb.h_prop);
    EXPECT_EQ(ra.accepted, rb.accepted);
  }
}

TEST(RandomWalk, ZeroStepKeepsPosition) {
  const auto s = two_clusters(8, 30, 10);
  const KnnPotential field(EnergyContext(s, {0, 1}, 5, 2.0), GradientMode::Analytic);
  HmcConfig cfg;
  cfg.variant = SamplerVariant::RandomWalk;
  cfg.step_size = 0.0;
  auto st = start_state(s.midpoint({0, 1}), 1);
  const auto rec = random_walk_transition(field, NoMargin{}, st, cfg);
  EXPECT_EQ(rec.proposed, s.midpoint({0, 1}));
  EXPECT_EQ(rec.alpha, 1.0);
  EXPECT_TRUE(rec.accepted);
}

TEST(RandomWalk, AcceptsLessOftenThanHmc) {
  const testing_fields::VmfField field{oracle::basis(16, 0), 5.0};
  for (double eps : {0.1, 0.3, 0.5}) {
    HmcConfig hmc, rw;
    hmc.step_size = rw.step_size = eps;
    rw.variant = SamplerVariant::RandomWalk;
    auto a = start_state(field.mu, 5);
    auto b = start_state(field.mu, 5);
    int acc_h = 0, acc_r = 0;
    for (int r = 0; r < 2000; ++r) {
      acc_h += transition(field, NoMargin{}, a, hmc).mh_accept;
      acc_r += transition(field, NoMargin{}, b, rw).mh_accept;
      a.history.clear();
      b.history.clear();
    }
    EXPECT_LT(acc_r, acc_h) << "eps " << eps;
  }
}

TEST(Rmhmc, ShortHistoryFallsBackToHmc) {
  const auto s = two_clusters(8, 60, 12);
  const KnnPotential field(EnergyContext(s, {0, 1}, 10, 2.0), GradientMode::Analytic);
  HmcConfig rm;
  rm.variant = SamplerVariant::RMHMC;
  auto a = start_state(s.midpoint({0, 1}), 9);
  auto b = start_state(s.midpoint({0, 1}), 9);
  const auto ra = rmhmc_transition(field, NoMargin{}, a, rm);
  const auto rb = hmc_transition(field, NoMargin{}, b, HmcConfig{});
  EXPECT_EQ(ra.proposed, rb.proposed);
  EXPECT_EQ(ra.alpha, rb.alpha);
}

TEST(Rmhmc, RidgeKeepsCollinearHistoryPositiveDefinite) {
  ChainState st;
  const Vec a{1.0, 0.0, 0.0};
  st.position = UnitVector::adopt(a);
  for (double t : {0.0, 0.1, 0.2}) {
    st.history.push_back({normalize({1.0, t, 0.0}), 1});
  }
  const auto cov = detail::momentum_covariance(st, 2);
  ASSERT_TRUE(cov.has_value());
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(*cov).info(), Eigen::Success);
  Rng rng(1);
  const auto q = detail::draw_momentum_cov(st.position, *cov, rng);
  EXPECT_NEAR(dot(q.coords, st.position.coords()), 0.0, 1e-12);
}

TEST(Rmhmc, CovarianceUsesLastWindowOfAcceptedPositions) {
  ChainState st;
  st.position = oracle::basis(2, 0);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 6; ++i) st.history.push_back({oracle::random_unit(2, rng), i});
  const auto cov = detail::momentum_covariance(st, 2);
  Vec mean(2, 0.0);
  for (int i = 3; i < 6; ++i) {
    for (int j = 0; j < 2; ++j) mean[j] += st.history[i].position[j] / 3.0;
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      double want = 0.0;
      for (int i = 3; i < 6; ++i) {
        want += (st.history[i].position[r] - mean[r]) * (st.history[i].position[c] - mean[c]) / 2.0;
      }
      if (r == c) want += 1e-6;
      EXPECT_NEAR((*cov)(r, c), want, 1e-15);
    }
  }
}

TEST(Rmhmc, VariantsCompleteRounds) {
  const auto s = two_clusters(16, 200, 14);
  const KnnPotential field(EnergyContext(s, {0, 1}, 100, 2.0), GradientMode::Scaled);
  const KdeMargin margin{&s, 2.0, hard_margin_threshold(s, {0, 1}, 2.0, 0.1)};
  for (auto v : {SamplerVariant::RMHMC, SamplerVariant::mMALA}) {
    HmcConfig cfg;
    cfg.variant = v;
    auto st = start_state(s.midpoint({0, 1}), 2);
    for (int r = 0; r < cfg.rounds; ++r) EXPECT_NO_THROW(transition(field, margin, st, cfg));
    EXPECT_EQ(st.round, cfg.rounds);
  }
}

TEST(Transition, DegenerateRetriesThenRejects) {
  const testing_fields::DegenerateField bad;
  auto st = start_state(oracle::basis(3, 0), 1);
  for (auto v : {SamplerVariant::HMC, SamplerVariant::RandomWalk}) {
    HmcConfig cfg;
    cfg.variant = v;
    const auto rec = transition(bad, NoMargin{}, st, cfg);
    EXPECT_EQ(rec.degenerate_retries, 3);
    EXPECT_FALSE(rec.accepted);
    EXPECT_EQ(st.position, oracle::basis(3, 0));
  }
}

// Stationary distribution check on the circle: target density
// proportional to 2 + cos(theta).
namespace {

double circle_tv(SamplerVariant variant, double eps, int steps, int n) {
  const testing_fields::CircleField field;
  HmcConfig cfg;
  cfg.variant = variant;
  cfg.step_size = eps;
  cfg.leapfrog_steps = steps;
  auto st = start_state(oracle::basis(2, 0), 2024);
  constexpr int bins = 36;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    (void)transition(field, NoMargin{}, st, cfg);
    if (st.history.size() > 64) st.history.clear();
    double th = std::atan2(st.position[1], st.position[0]);
    if (th < 0) th += 2 * std::numbers::pi;
    hist[std::min(bins - 1, static_cast<int>(th / (2 * std::numbers::pi) * bins))] += 1.0;
  }
  double tv = 0.0;
  const double w = 2 * std::numbers::pi / bins;
  for (int b = 0; b < bins; ++b) {
    const double lo = b * w, hi = lo + w;
    const double mass = (2 * w + std::sin(hi) - std::sin(lo)) / (4 * std::numbers::pi);
    tv += std::abs(hist[b] / n - mass);
  }
  return tv / 2;
}

}  // namespace

TEST(StationaryDistribution, HmcOnCircle) { EXPECT_LE(circle_tv(SamplerVariant::HMC, 0.5, 5, 200000), 0.05); }

TEST(StationaryDistribution, RandomWalkOnCircle) {
  EXPECT_LE(circle_tv(SamplerVariant::RandomWalk, 1.5, 1, 200000), 0.05);
}
