#include <gtest/gtest.h>

#include <cmath>

#include "lrhp/errors.hpp"
#include "lrhp/wmmse.hpp"
#include "test_util.hpp"

using namespace lrhp;

namespace {

ChannelSet random_channel(std::mt19937_64& rng, int nt, int k, int s) {
  ChannelSet h;
  h.h = testutil::random_cmatrix(rng, nt, static_cast<Eigen::Index>(k) * s);
  h.n_users = k;
  h.n_subcarriers = s;
  return h;
}

}  // namespace

TEST(Sinr, SingleUserHasNoInterference) {
  std::mt19937_64 rng(1);
  const ChannelSet h = random_channel(rng, 4, 1, 1);
  const CMatrix f = testutil::random_cmatrix(rng, 4, 1);
  const cplx y = (h.h.col(0).transpose() * f.col(0))(0);
  EXPECT_NEAR(sinr(h, f, 0, 0, 0.3), std::norm(y) / 0.3, 1e-12);
}

TEST(Sinr, OrthogonalPrecoderGivesZero) {
  std::mt19937_64 rng(2);
  const ChannelSet h = random_channel(rng, 4, 1, 1);
  // Any f with h^T f = 0: project a random vector off conj(h).
  CVector f = testutil::random_cvector(rng, 4);
  const CVector g = h.h.col(0).conjugate();
  f -= g * (g.dot(f) / g.squaredNorm());
  EXPECT_NEAR(sinr(h, f, 0, 0, 1.0), 0.0, 1e-24);
}

TEST(Sinr, MatchesLoopRecomputation) {
  std::mt19937_64 rng(3);
  const int nt = 5, k_users = 3, n_sc = 4;
  const ChannelSet h = random_channel(rng, nt, k_users, n_sc);
  const CMatrix f = testutil::random_cmatrix(rng, nt, k_users * n_sc);
  const double n0 = 0.7;
  for (int k = 0; k < k_users; ++k)
    for (int s = 0; s < n_sc; ++s) {
      double num = 0.0, den = n0;
      for (int i = 0; i < k_users; ++i) {
        cplx acc = 0.0;
        for (int n = 0; n < nt; ++n) acc += h.h(n, k * n_sc + s) * f(n, i * n_sc + s);
        (i == k ? num : den) += std::norm(acc);
      }
      EXPECT_NEAR(sinr(h, f, k, s, n0), num / den, 1e-12 * (num / den));
    }
}

TEST(SumRate, ZeroPrecoderAndMatchedFilter) {
  std::mt19937_64 rng(4);
  const ChannelSet h = random_channel(rng, 6, 2, 3);
  const RateReport zero = sum_rate(h, CMatrix::Zero(6, 6), 1.0);
  EXPECT_EQ(zero.total_sum_rate, 0.0);
  EXPECT_EQ(zero.sum_rate_per_subcarrier_avg, 0.0);

  const ChannelSet one = random_channel(rng, 6, 1, 1);
  const double p = 2.0, n0 = 0.5;
  const RateReport r = sum_rate(one, matched_filter_precoder(one, p), n0);
  EXPECT_NEAR(r.total_sum_rate, std::log2(1.0 + p * one.h.squaredNorm() / n0), 1e-12);
  EXPECT_DOUBLE_EQ(r.total_sum_rate, r.per_user_per_subcarrier.sum());
}

TEST(MseToTarget, MatchesNaiveLoops) {
  std::mt19937_64 rng(5);
  const CMatrix fd = testutil::random_cmatrix(rng, 6, 8);
  const CMatrix rf = testutil::random_cmatrix(rng, 6, 3);
  const CMatrix bb = testutil::random_cmatrix(rng, 3, 8);
  double acc = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 8; ++j) {
      cplx prod = 0.0;
      for (int m = 0; m < 3; ++m) prod += rf(i, m) * bb(m, j);
      acc += std::norm(fd(i, j) - prod);
    }
  EXPECT_NEAR(mse_to_target(fd, rf, bb), acc, 1e-12 * acc);
  EXPECT_NEAR(mse_to_target(fd, rf, CMatrix::Zero(3, 8)), fd.squaredNorm(), 1e-12);
  EXPECT_NEAR(mse_to_target(rf * bb, rf, bb), 0.0, 1e-20);
  EXPECT_THROW(mse_to_target(fd, rf, CMatrix::Zero(2, 8)), ParameterError);
}

TEST(Wmmse, SingleUserConvergesToMrt) {
  std::mt19937_64 rng(6);
  const ChannelSet h = random_channel(rng, 8, 1, 1);
  const double p = 1.5, n0 = 0.2;
  const auto [fd, trace] = wmmse_fully_digital(h, p, n0);
  const CVector mrt = h.h.col(0).conjugate() * (std::sqrt(p) / h.h.col(0).norm());
  const cplx phase = mrt.dot(fd.f.col(0)) / std::abs(mrt.dot(fd.f.col(0)));
  EXPECT_LT((fd.f.col(0) - mrt * phase).norm(), 1e-6 * mrt.norm());
  const double expected = std::log2(1.0 + p * h.h.squaredNorm() / n0);
  EXPECT_NEAR(sum_rate(h, fd.f, n0).total_sum_rate, expected, 1e-6 * expected);
  EXPECT_NEAR(trace.utility.back(), expected, 1e-6 * expected);
}

TEST(Wmmse, UtilityTraceMonotoneAndPowerFeasible) {
  std::mt19937_64 rng(7);
  for (int inst = 0; inst < 100; ++inst) {
    const int k_users = 2 + inst % 3;
    const ChannelSet h = random_channel(rng, 6, k_users, 2);
    const double p = 1.0, n0 = 0.05 + 0.1 * (inst % 5);
    const auto [fd, trace] = wmmse_fully_digital(h, p, n0);
    for (std::size_t t = 1; t < trace.utility.size(); ++t)
      EXPECT_GE(trace.utility[t], trace.utility[t - 1] * (1.0 - 1e-9)) << "instance " << inst << " step " << t;
    for (int s = 0; s < 2; ++s) EXPECT_LE(subcarrier_power(fd.f, k_users, 2, s), p * (1.0 + 1e-6));
  }
}

TEST(Wmmse, ZeroChannelUserGetsNoPower) {
  std::mt19937_64 rng(8);
  ChannelSet h = random_channel(rng, 6, 2, 2);
  h.h.middleCols(2, 2).setZero();  // user 1
  const auto [fd, trace] = wmmse_fully_digital(h, 1.0, 0.1);
  EXPECT_EQ(fd.column(1, 0).norm(), 0.0);
  EXPECT_EQ(fd.column(1, 1).norm(), 0.0);
  EXPECT_GT(fd.column(0, 0).norm(), 0.0);
}

TEST(Wmmse, BeatsMatchedFilterOnMostInstances) {
  std::mt19937_64 rng(9);
  int wins = 0;
  const int total = 200;
  for (int inst = 0; inst < total; ++inst) {
    const ChannelSet h = random_channel(rng, 4, 2, 1);
    const double n0 = 0.02;
    const double w = sum_rate(h, wmmse_fully_digital(h, 1.0, n0).first.f, n0).total_sum_rate;
    const double mf = sum_rate(h, matched_filter_precoder(h, 1.0), n0).total_sum_rate;
    wins += w >= mf;
  }
  EXPECT_GE(wins, 190);
}

TEST(Wmmse, RejectsNonPositiveBudget) {
  std::mt19937_64 rng(10);
  const ChannelSet h = random_channel(rng, 4, 2, 1);
  EXPECT_THROW(wmmse_fully_digital(h, 0.0, 1.0), ParameterError);
  EXPECT_THROW(wmmse_fully_digital(h, 1.0, 0.0), ParameterError);
}
