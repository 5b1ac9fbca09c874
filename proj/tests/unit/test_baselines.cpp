#include <random>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "pctl/baselines.hpp"

using namespace pctl;

TEST(PfWeights, Examples) {
  ErgodicState s;
  s.rbar = {1.0, 2.0};
  EXPECT_EQ(pf_weights(s), (WsrWeights{1.0, 0.5}));
  s.rbar = {0.0, 0.0, 0.0};
  for (double w : pf_weights(s)) EXPECT_DOUBLE_EQ(w, 1e6);
}

TEST(CwsrWeights, Examples) {
  ChannelSet H;
  H.num_users = 3;
  H.num_cells = 1;
  H.user_cell = {0, 0, 0};
  H.noise_power = 1.0;
  for (int i = 0; i < 3; ++i) H.mats.push_back(ComplexMatrix::Constant(1, 2, cplx(0.5, 0.5)));
  for (double w : cwsr_weights(H)) EXPECT_NEAR(w, 1.0, 1e-15);

  H.mats[0] *= 2.0;
  const auto w = cwsr_weights(H);
  EXPECT_NEAR(w[0] / w[1], 0.5, 1e-15);
  EXPECT_NEAR(w[0] + w[1] + w[2], 3.0, 1e-12);

  for (auto& m : H.mats) m *= 7.0;
  const auto scaled = cwsr_weights(H);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(scaled[i], w[i], 1e-12);

  H.mats[1].setZero();
  EXPECT_THROW(cwsr_weights(H), DomainError);
}

TEST(WsrWeights, Validation) {
  EXPECT_THROW(check_weights({0.0, 0.0}, 2), DomainError);
  EXPECT_THROW(check_weights({1.0, -1.0}, 2), DomainError);
  EXPECT_THROW(check_weights({1.0}, 2), DimensionError);
  EXPECT_NO_THROW(check_weights({0.0, 1.0}, 2));
}

TEST(WmmseBeamforming, SingleUserMatchedFilter) {
  std::mt19937_64 rng(1);
  const auto H = fixture::random_channels({1}, 4, 2, 0.3, rng);
  BeamformerSet init = BeamformerSet::zeros(H);
  init.v[0](1) = 0.2;
  const auto r = wmmse_wsr(H, {1.0}, init, 2.0);
  Eigen::JacobiSVD<ComplexMatrix> svd(H.direct(0));
  const double s = svd.singularValues()(0);
  EXPECT_NEAR(r.wsr.back(), std::log1p(2.0 * s * s / 0.3), 1e-4);
  EXPECT_NEAR(r.V.v[0].squaredNorm(), 2.0, 1e-6);
}

TEST(WmmseBeamforming, MonotoneAndFeasible) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto H = fixture::random_channels({3, 2, 2}, 4, 2, 0.1, rng);
    const auto init = equal_power_matched_filter_init(H, 1.0);
    WsrWeights w(7);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (double& x : w) x = u(rng);
    const auto r = wmmse_wsr(H, w, init, 1.0);
    for (std::size_t i = 1; i < r.wsr.size(); ++i) EXPECT_GE(r.wsr[i], r.wsr[i - 1] - 1e-9 * std::abs(r.wsr[i - 1]));
    for (int b = 0; b < 3; ++b) EXPECT_LE(r.V.bs_power(H, b), 1.0 + 1e-9);
  }
}

TEST(WmmseBeamforming, RankDeficientCovarianceUsesBisection) {
  // One antenna per BS and one user: A is rank one, so mu must bind.
  std::mt19937_64 rng(3);
  const auto H = fixture::random_channels({1, 1}, 3, 1, 0.5, rng);
  const auto r = wmmse_wsr(H, {1.0, 1.0}, equal_power_matched_filter_init(H, 1.0), 1.0);
  for (int b = 0; b < 2; ++b) EXPECT_LE(r.V.bs_power(H, b), 1.0 + 1e-9);
  EXPECT_THROW(wmmse_wsr(H, {1.0, 1.0}, fixture::random_beamformers(H, 1.0, 1.5, rng), 1.0), InfeasibleError);
}

TEST(WmmsePower, MonotoneFeasibleAndSingleUserFullPower) {
  std::mt19937_64 rng(4);
  const auto s = build_hex_topology(ScenarioParams::uniform(7, 2, 1, 1), rng);
  const auto g = sample_band_gains(s, 0, 4, 3);
  const auto init = equal_power(14, 3, s.p_max);
  const auto r = wmmse_wsr(g, WsrWeights(14, 1.0), init, s.p_max);
  for (std::size_t i = 1; i < r.wsr.size(); ++i) EXPECT_GE(r.wsr[i], r.wsr[i - 1] - 1e-9 * std::abs(r.wsr[i - 1]));
  EXPECT_TRUE(r.p.feasible(s.p_max));

  BandGains one;
  one.num_users = 1;
  one.num_bands = 1;
  one.noise_power = 1.0;
  one.user_cell = {0};
  one.g = {3.0};
  const auto single = wmmse_wsr(one, {1.0}, PowerAllocation(1, 1, 0.1), 2.0);
  EXPECT_NEAR(single.p.p[0], 2.0, 1e-6);
}

TEST(ZfNulling, NullsAndPower) {
  std::mt19937_64 rng(5);
  const auto H = fixture::random_channels({2, 2, 2}, 4, 1, 1.0, rng);
  const auto V = zf_nulling(H, 2, 3.0);
  for (int b = 0; b < 3; ++b) {
    EXPECT_NEAR(V.bs_power(H, b), 3.0, 1e-12);
    const auto users = H.users_of(b);
    std::vector<int> outside;
    for (int k = 0; k < H.num_users; ++k) {
      if (H.cell(k) != b) outside.push_back(k);
    }
    std::stable_sort(outside.begin(), outside.end(),
                     [&](int x, int y) { return H.h(x, b).squaredNorm() > H.h(y, b).squaredNorm(); });
    for (int k : users) {
      const ComplexVector& v = V.v[static_cast<std::size_t>(k)];
      for (int j : users) {
        if (j != k) EXPECT_LE(std::abs((H.h(j, b) * v)(0)), 1e-8 * H.h(j, b).norm() * v.norm());
      }
      for (int i = 0; i < 2; ++i) {
        const int j = outside[static_cast<std::size_t>(i)];
        EXPECT_LE(std::abs((H.h(j, b) * v)(0)), 1e-8 * H.h(j, b).norm() * v.norm());
      }
    }
  }
}

TEST(ZfNulling, OrthogonalChannelsGiveMatchedFilters) {
  ChannelSet H;
  H.num_users = 2;
  H.num_cells = 1;
  H.user_cell = {0, 0};
  H.noise_power = 1.0;
  ComplexMatrix a(1, 3), b(1, 3);
  a << cplx(2, 0), 0.0, 0.0;
  b << 0.0, cplx(0, 1), 0.0;
  H.mats = {a, b};
  const auto V = zf_nulling(H, 0, 2.0);
  EXPECT_NEAR((V.v[0] - ComplexVector(a.adjoint()).normalized()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((V.v[1] - ComplexVector(b.adjoint()).normalized()).norm(), 0.0, 1e-12);
}

TEST(ZfNulling, Preconditions) {
  std::mt19937_64 rng(6);
  EXPECT_THROW(zf_nulling(fixture::random_channels({2, 2}, 4, 2, 1.0, rng), 1, 1.0), DomainError);
  EXPECT_THROW(zf_nulling(fixture::random_channels({3, 2}, 4, 1, 1.0, rng), 2, 1.0), DomainError);
  auto H = fixture::random_channels({2}, 3, 1, 1.0, rng);
  H.mats[1] = 2.0 * H.mats[0];
  EXPECT_THROW(zf_nulling(H, 0, 1.0), DomainError);
  EXPECT_THROW(zf_nulling(H, -1, 1.0), DomainError);
}

TEST(RandomPower, DrawDistributions) {
  std::mt19937_64 rng(7);
  const double p_max = 20.0;
  const int n = 1000000;
  double ray = 0.0, expo = 0.0, uni_max = 0.0;
  for (int i = 0; i < n; ++i) {
    ray += random_power_draw(RandomPolicy::Rayleigh, p_max, rng);
    expo += random_power_draw(RandomPolicy::Exponential, p_max, rng);
    uni_max = std::max(uni_max, random_power_draw(RandomPolicy::Uniform, p_max, rng));
  }
  EXPECT_NEAR(ray / n, p_max / 2.0, 0.02 * p_max / 2.0);
  EXPECT_NEAR(expo / n, 1.0, 0.02);
  EXPECT_LE(uni_max, p_max / 3.0);
}

TEST(RandomPower, AllocationsAreFeasible) {
  std::mt19937_64 rng(8);
  for (auto policy : {RandomPolicy::Uniform, RandomPolicy::Rayleigh, RandomPolicy::Exponential}) {
    for (int rep = 0; rep < 200; ++rep) {
      const auto p = random_power(policy, 5, 3, 2.0, rng);
      EXPECT_TRUE(p.feasible(2.0));
    }
  }
  const auto u = random_power(RandomPolicy::Uniform, 5, 3, 6.0, rng);
  for (double v : u.p) EXPECT_LE(v, 2.0);
  EXPECT_THROW(random_power(RandomPolicy::Uniform, 5, 0, 6.0, rng), DomainError);
}

TEST(EqualPower, Examples) {
  const auto p3 = equal_power(4, 3, 6.0);
  for (double v : p3.p) EXPECT_DOUBLE_EQ(v, 2.0);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p3.user_total(k), 6.0);
  const auto p1 = equal_power(4, 1, 6.0);
  for (double v : p1.p) EXPECT_DOUBLE_EQ(v, 6.0);
  EXPECT_THROW(equal_power(4, 0, 6.0), DomainError);
}
