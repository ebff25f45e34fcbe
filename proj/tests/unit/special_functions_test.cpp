#include <cmath>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "tloss/error.hpp"
#include "tloss/rng.hpp"
#include "tloss/special_functions.hpp"

namespace tloss {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

TEST(LogGamma, ClosedForms) {
  EXPECT_EQ(log_gamma(1.0), 0.0);
  EXPECT_NEAR(log_gamma(2.0), 0.0, 1e-15);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-14);
  EXPECT_NEAR(log_gamma(0.5), 0.5723649429, 1e-10);
  EXPECT_NEAR(log_gamma(6.0), std::log(120.0), 1e-14);
}

TEST(LogGamma, DomainError) {
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
  EXPECT_THROW(log_gamma(NAN), DomainError);
}

TEST(LogGamma, MatchesBoostOverContractRange) {
  Rng rng(21);
  for (int i = 0; i < 4000; ++i) {
    const double x = std::exp(rng.uniform(std::log(1e-8), std::log(1e7)));
    const double ref = boost::math::lgamma(x);
    EXPECT_LE(std::abs(log_gamma(x) - ref), 1e-12 * std::max(1.0, std::abs(ref))) << "x=" << x;
  }
}

TEST(LogGamma, RelativeAccuracyNearZeros) {
  for (double x : {0.999, 0.9999999, 1.0000001, 1.001, 1.999, 1.9999999, 2.0000001, 2.001}) {
    const double ref = boost::math::lgamma(x);
    EXPECT_LE(std::abs(log_gamma(x) - ref), 1e-12 * std::abs(ref)) << "x=" << x;
  }
}

TEST(LogGamma, Recurrence) {
  Rng rng(22);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(0.01, 50.0);
    EXPECT_NEAR(log_gamma(x + 1.0), log_gamma(x) + std::log(x), 1e-11) << "x=" << x;
  }
}

TEST(Digamma, ClosedForms) {
  EXPECT_NEAR(digamma(1.0), -kEulerGamma, 1e-12);
  EXPECT_NEAR(digamma(0.5), -kEulerGamma - 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(digamma(0.5), -1.9635100260, 1e-10);
}

TEST(Digamma, DomainError) {
  EXPECT_THROW(digamma(0.0), DomainError);
  EXPECT_THROW(digamma(-2.0), DomainError);
}

TEST(Digamma, MatchesBoostOverContractRange) {
  Rng rng(23);
  for (int i = 0; i < 4000; ++i) {
    const double x = std::exp(rng.uniform(std::log(1e-6), std::log(1e7)));
    // Below x ~ 2e-6 |psi| exceeds 2^19, where one ulp is already larger than 1e-10.
    const double ref = static_cast<double>(boost::math::digamma(static_cast<long double>(x)));
    const double ulp = std::nextafter(std::abs(ref), INFINITY) - std::abs(ref);
    EXPECT_NEAR(digamma(x), ref, std::max(1e-10, ulp)) << "x=" << x;
  }
}

TEST(Digamma, Recurrence) {
  Rng rng(24);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(0.05, 40.0);
    EXPECT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-10) << "x=" << x;
  }
}

TEST(Digamma, CentralDifferenceOfLogGamma) {
  const double h = 1e-5;
  for (double x = 0.1; x <= 100.0; x *= 1.07) {
    const double fd = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
    EXPECT_NEAR(digamma(x), fd, 1e-6) << "x=" << x;
  }
}

TEST(Softplus, Values) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-16);
  EXPECT_EQ(softplus(100.0), 100.0);
  EXPECT_NEAR(softplus(-50.0), std::exp(-50.0), 1e-35);
  EXPECT_TRUE(std::isfinite(softplus(1e6)));
}

TEST(Softplus, InverseRoundTrip) {
  for (double x = -30.0; x <= 30.0; x += 0.25) EXPECT_NEAR(softplus_inv(softplus(x)), x, 1e-10) << x;
  EXPECT_NEAR(softplus_inv(1.0), std::log(std::expm1(1.0)), 1e-15);
  EXPECT_THROW(softplus_inv(0.0), DomainError);
  EXPECT_THROW(softplus_inv(-1.0), DomainError);
}

TEST(Softplus, StrictlyIncreasingAndAboveRamp) {
  double prev = softplus(-30.0);
  for (double x = -29.9; x <= 30.0; x += 0.1) {
    const double s = softplus(x);
    EXPECT_GT(s, prev);
    EXPECT_GT(s, std::max(x, 0.0));
    prev = s;
  }
}

TEST(Sigmoid, IsSoftplusDerivative) {
  const double h = 1e-6;
  for (double x = -8.0; x <= 8.0; x += 0.5) {
    EXPECT_NEAR(sigmoid(x), (softplus(x + h) - softplus(x - h)) / (2.0 * h), 1e-9);
  }
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

}  // namespace
}  // namespace tloss
