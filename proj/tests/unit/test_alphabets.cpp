#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lrhp/alphabets.hpp"
#include "lrhp/errors.hpp"

using namespace lrhp;

namespace {

// Gaussian MSE of the L-level midrise quantizer by Simpson quadrature over
// each decision cell, tails cut at +-12.
double quadrature_mse(int levels, double delta) {
  auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  double total = 0.0;
  for (int i = 0; i < levels; ++i) {
    const double label = delta * (i - 0.5 * (levels - 1));
    const double a = i == 0 ? -12.0 : label - 0.5 * delta;
    const double b = i == levels - 1 ? 12.0 : label + 0.5 * delta;
    if (b <= a) continue;
    const int n = 2000;
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
      const double x = a + j * h;
      const double w = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      acc += w * (x - label) * (x - label) * pdf(x);
    }
    total += acc * h / 3.0;
  }
  return total;
}

double grid_optimal_step(int levels) {
  double best = 0.0, best_mse = INFINITY;
  double lo = 0.01, hi = 4.0;
  for (int round = 0; round < 4; ++round) {
    const double step = (hi - lo) / 400.0;
    for (int i = 0; i <= 400; ++i) {
      const double d = lo + i * step;
      const double m = quadrature_mse(levels, d);
      if (m < best_mse) {
        best_mse = m;
        best = d;
      }
    }
    lo = std::max(1e-3, best - 2 * step);
    hi = best + 2 * step;
  }
  return best;
}

}  // namespace

TEST(AnalogAlphabet, OneBitIsPlusMinusOne) {
  const Alphabet a = make_analog_alphabet(1);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], cplx(1, 0));
  EXPECT_EQ(a[1], cplx(-1, 0));
}

TEST(AnalogAlphabet, TwoBitsAreQuarterTurns) {
  const Alphabet a = make_analog_alphabet(2);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0], cplx(1, 0));
  EXPECT_EQ(a[1], cplx(0, 1));
  EXPECT_EQ(a[2], cplx(-1, 0));
  EXPECT_EQ(a[3], cplx(0, -1));
}

TEST(AnalogAlphabet, ThreeBitsUniformSpacing) {
  const Alphabet a = make_analog_alphabet(3);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_NEAR(std::abs(a[l]), 1.0, 1e-15);
    const double gap = std::arg(a[(l + 1) % a.size()] / a[l]);
    EXPECT_NEAR(gap, std::numbers::pi / 4, 1e-12);
  }
}

TEST(AnalogAlphabet, ClosedUnderNegationAndDistinct) {
  for (int b = 1; b <= 6; ++b) {
    const Alphabet a = make_analog_alphabet(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_LT(std::abs(nearest_label(-a[i], a) + a[i]), 1e-12);
      for (std::size_t j = 0; j < i; ++j) EXPECT_GT(std::abs(a[i] - a[j]), 1e-6);
    }
  }
}

TEST(AnalogAlphabet, RejectsOutOfRange) {
  EXPECT_THROW(make_analog_alphabet(0), ParameterError);
  EXPECT_THROW(make_analog_alphabet(17), ParameterError);
  EXPECT_NO_THROW(make_analog_alphabet(16));
}

TEST(DigitalAlphabet, TwoLevelsUnitStep) {
  const Alphabet a = make_digital_alphabet(2, 1.0, false);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], cplx(-0.5, 0));
  EXPECT_EQ(a[1], cplx(0.5, 0));
}

TEST(DigitalAlphabet, FourLevelsStepTwo) {
  const Alphabet a = make_digital_alphabet(4, 2.0, false);
  const double expected[] = {-3, -1, 1, 3};
  ASSERT_EQ(a.size(), 4u);
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i], cplx(expected[i], 0));
    sum += a[i].real();
  }
  EXPECT_EQ(sum, 0.0);
}

TEST(DigitalAlphabet, ComplexIsCartesianSquare) {
  const Alphabet a = make_digital_alphabet(2, 1.0);
  ASSERT_EQ(a.size(), 4u);
  for (double re : {-0.5, 0.5})
    for (double im : {-0.5, 0.5}) EXPECT_TRUE(a.contains({re, im}));
  const Alphabet b = make_digital_alphabet(8, 0.3);
  EXPECT_EQ(b.size(), 64u);
  const Alphabet r = b.real_component();
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_TRUE(r.contains({b[i].real(), 0.0}));
    EXPECT_TRUE(r.contains({b[i].imag(), 0.0}));
  }
}

TEST(DigitalAlphabet, RejectsBadParameters) {
  EXPECT_THROW(make_digital_alphabet(1, 1.0), ParameterError);
  EXPECT_THROW(make_digital_alphabet(2, 0.0), ParameterError);
  EXPECT_THROW(make_digital_alphabet(2, -1.0), ParameterError);
}

TEST(ChooseDelta, TwoLevelCoefficientMatchesKnownOptimum) {
  // One-bit optimum: labels at +-E|x| = +-sqrt(2/pi).
  EXPECT_NEAR(gaussian_step_coefficient(2), 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-8);
}

TEST(ChooseDelta, CoefficientsMatchQuadratureGridSearch) {
  for (int levels : {2, 4, 8, 16, 32}) {
    const double oracle = grid_optimal_step(levels);
    EXPECT_NEAR(gaussian_step_coefficient(levels), oracle, 2e-4 * oracle) << "L=" << levels;
  }
}

TEST(ChooseDelta, UnitSpreadGivesCoefficient) {
  // Pooled parts {+-1} have unit RMS.
  const std::vector<cplx> v{{1, -1}, {-1, 1}, {1, 1}, {-1, -1}};
  EXPECT_DOUBLE_EQ(choose_delta(v, 2, DeltaRule::gaussian_fit()), gaussian_step_coefficient(2));
}

TEST(ChooseDelta, FixedPassThroughAndHomogeneity) {
  const std::vector<cplx> v{{0.3, -0.1}, {2.0, 0.5}, {-1.1, 0.0}};
  EXPECT_EQ(choose_delta(v, 4, DeltaRule::fixed(0.7)), 0.7);
  std::vector<cplx> scaled;
  for (auto z : v) scaled.push_back(10.0 * z);
  EXPECT_NEAR(choose_delta(scaled, 4, DeltaRule::gaussian_fit()), 10.0 * choose_delta(v, 4, DeltaRule::gaussian_fit()),
              1e-12);
}

TEST(ChooseDelta, AllZeroIsDegenerate) {
  const std::vector<cplx> zeros(5);
  EXPECT_THROW(choose_delta(zeros, 2, DeltaRule::gaussian_fit()), DegenerateInputError);
}

TEST(NearestLabel, Examples) {
  EXPECT_EQ(nearest_label(std::polar(1.0, 0.3 * std::numbers::pi), make_analog_alphabet(2)), cplx(0, 1));
  EXPECT_EQ(nearest_label({0.9, 0.1}, make_digital_alphabet(2, 1.0)), cplx(0.5, 0.5));
}

TEST(NearestLabel, TiesGoToLowestIndex) {
  const Alphabet a = make_analog_alphabet(1);
  EXPECT_EQ(nearest_label_index({0.0, 1.0}, a), 0u);
}

TEST(NearestLabel, MatchesExhaustiveScanAndIsIdempotent) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.5);
  const Alphabet alphabets[] = {make_analog_alphabet(1), make_analog_alphabet(3), make_digital_alphabet(4, 0.8),
                                make_digital_alphabet(8, 0.25)};
  for (const Alphabet& a : alphabets) {
    for (int t = 0; t < 200; ++t) {
      const cplx v(n(rng), n(rng));
      double best = INFINITY;
      for (auto l : a.labels()) best = std::min(best, std::abs(v - l));
      const cplx q = nearest_label(v, a);
      EXPECT_DOUBLE_EQ(std::abs(v - q), best);
      EXPECT_EQ(nearest_label(q, a), q);
      EXPECT_TRUE(a.contains(q));
    }
  }
}
