#include <cmath>
#include <functional>
#include <numbers>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "tloss/rng.hpp"
#include "tloss/special_functions.hpp"
#include "tloss/tdist_loss.hpp"

namespace tloss {
namespace {

constexpr double kPi = std::numbers::pi;

StudentTParams make_params(double r, std::vector<double> sigma2) {
  StudentTParams p;
  p.rho_raw = softplus_inv(r - kSafeguard);
  p.scope = sigma2.size() == 1 ? ScaleScope::kShared : ScaleScope::kPerVoxel;
  p.scale_raw.clear();
  for (double s : sigma2) p.scale_raw.push_back(softplus_inv(s - kSafeguard));
  return p;
}

double log_pdf_1d(double delta, double sigma2, double r) {
  const double k[1] = {delta};
  const double mu[1] = {0.0};
  const double s[1] = {sigma2};
  return t_log_pdf(k, mu, s, r);
}

double residual_loss(const std::vector<double>& delta, const StudentTParams& p, TLossMode mode) {
  return t_loss_grad_residual(delta, p, mode).loss;
}

TEST(EffectiveParams, IdentityInitIsExactlyOne) {
  const StudentTParams p = StudentTParams::identity_init(ScaleScope::kPerVoxel, {2, 2, 2});
  const EffectiveParams e = effective_params(p);
  EXPECT_NEAR(e.r, 1.0, 1e-15);
  ASSERT_EQ(e.sigma2.size(), 8u);
  for (double s : e.sigma2) EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_EQ(p.epsilon, 1e-8);
}

TEST(EffectiveParams, SafeguardFloor) {
  StudentTParams p;
  p.rho_raw = -1000.0;
  p.scale_raw = {-1000.0};
  const EffectiveParams e = effective_params(p);
  EXPECT_EQ(e.r, 1e-8);
  EXPECT_EQ(e.sigma2[0], 1e-8);
}

TEST(TLogPdf, CauchyPeak) {
  EXPECT_NEAR(log_pdf_1d(0.0, 1.0, 1.0), -std::log(kPi), 1e-10);
  EXPECT_NEAR(log_pdf_1d(0.0, 1.0, 1.0), -1.1447298858, 1e-10);
}

TEST(TLogPdf, CauchyAtOne) {
  EXPECT_NEAR(log_pdf_1d(1.0, 1.0, 1.0), -(std::log(kPi) + std::log(2.0)), 1e-10);
  EXPECT_NEAR(log_pdf_1d(1.0, 1.0, 1.0), -1.8378770664, 1e-10);
}

TEST(TLogPdf, IntegratesToOneOverRealLine) {
  boost::math::quadrature::sinh_sinh<double> integrator;
  for (double r : {1.0, 4.0, 30.0}) {
    auto f = [r](double x) { return std::exp(log_pdf_1d(x, 1.0, r)); };
    EXPECT_NEAR(integrator.integrate(f, 1e-14), 1.0, 1e-6) << "r=" << r;
  }
}

TEST(TLogPdf, TruncatedCauchyMassMatchesArctan) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [](double x) { return std::exp(log_pdf_1d(x, 1.0, 1.0)); };
  double mass = 0.0;
  const double cuts[] = {-1e4, -1e2, -1.0, 0.0, 1.0, 1e2, 1e4};
  for (int i = 0; i + 1 < 7; ++i) mass += integrator.integrate(f, cuts[i], cuts[i + 1], 1e-14);
  EXPECT_NEAR(mass, 2.0 * std::atan(1e4) / kPi, 1e-9);
}

TEST(TLogPdf, ScaledDensityIntegratesToOne) {
  boost::math::quadrature::sinh_sinh<double> integrator;
  auto f = [](double x) { return std::exp(log_pdf_1d(x, 0.3, 4.0)); };
  EXPECT_NEAR(integrator.integrate(f, 1e-14), 1.0, 1e-6);
}

TEST(TLogPdf, DomainErrors) {
  const double k[1] = {0.0};
  const double mu[1] = {0.0};
  const double bad[1] = {0.0};
  const double ok[1] = {1.0};
  EXPECT_THROW(t_log_pdf(k, mu, bad, 1.0), DomainError);
  EXPECT_THROW(t_log_pdf(k, mu, ok, 0.0), DomainError);
}

TEST(TLogPdf, IsNegatedLoss) {
  Rng rng(31);
  std::vector<double> k(5), mu(5), delta(5), s2(5);
  for (int i = 0; i < 5; ++i) {
    k[i] = rng.bernoulli(0.5);
    mu[i] = rng.uniform();
    delta[i] = k[i] - mu[i];
    s2[i] = rng.uniform(0.1, 3.0);
  }
  const StudentTParams p = make_params(2.5, s2);
  EXPECT_NEAR(t_log_pdf(k, mu, s2, p.r()), -residual_loss(delta, p, TLossMode::kMultivariate), 1e-12);
}

TEST(TLoss, PerVoxelZeroResidual) {
  BinaryMask k({2, 2, 2});
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = i % 3 == 0;
  ProbabilityMask mu({2, 2, 2});
  for (std::size_t i = 0; i < k.size(); ++i) mu[i] = k[i];
  const auto p = StudentTParams::identity_init(ScaleScope::kShared, k.dims());
  EXPECT_NEAR(t_loss(k, mu, p, TLossMode::kPerVoxel), std::log(kPi), 1e-10);
  EXPECT_NEAR(t_loss(k, mu, p, TLossMode::kPerVoxel), 1.1447298858, 1e-10);
  const TLossResult g = t_loss_grad(k, mu, p);
  for (double d : g.grad.d_mu) EXPECT_EQ(d, 0.0);
}

TEST(TLoss, MultivariateHandValue) {
  BinaryMask k({1, 1, 2}, 1);
  ProbabilityMask mu({1, 1, 2}, 0.0);
  const StudentTParams p = make_params(2.0, {1.0, 1.0});
  const double expect = std::log(2.0 * kPi) + 2.0 * std::log(2.0);
  EXPECT_NEAR(t_loss(k, mu, p, TLossMode::kMultivariate), expect, 1e-10);
  EXPECT_NEAR(expect, 3.2241714276, 1e-10);
}

TEST(TLoss, PerVoxelUnitResidual) {
  BinaryMask k({2, 1, 2});
  ProbabilityMask mu({2, 1, 2});
  for (std::size_t i = 0; i < k.size(); ++i) {
    k[i] = i % 2;
    mu[i] = 1.0 - k[i];
  }
  const auto p = StudentTParams::identity_init(ScaleScope::kPerVoxel, k.dims());
  EXPECT_NEAR(t_loss(k, mu, p), std::log(kPi) + std::log(2.0), 1e-10);
}

TEST(TLoss, CauchyGradientAtUnitResidual) {
  BinaryMask k({1, 1, 1}, 1);
  ProbabilityMask mu({1, 1, 1}, 0.0);
  const auto p = StudentTParams::identity_init(ScaleScope::kShared, k.dims());
  EXPECT_NEAR(t_loss_grad(k, mu, p).grad.d_mu[0], -1.0, 1e-12);
}

TEST(TLoss, ShapeErrors) {
  BinaryMask k({2, 2, 2});
  ProbabilityMask mu({2, 2, 1});
  const auto p = StudentTParams::identity_init(ScaleScope::kShared, k.dims());
  EXPECT_THROW(t_loss(k, mu, p), ShapeError);
  const auto wrong = StudentTParams::identity_init(ScaleScope::kPerVoxel, {1, 1, 3});
  EXPECT_THROW(t_loss(k, ProbabilityMask({2, 2, 2}), wrong), ShapeError);
}

TEST(TLoss, ModesAgreeOnOneVoxel) {
  Rng rng(32);
  for (int t = 0; t < 50; ++t) {
    const std::vector<double> delta = {rng.uniform(-1.0, 1.0)};
    const StudentTParams p = make_params(rng.uniform(0.5, 50.0), {rng.uniform(0.05, 5.0)});
    const TLossResult a = t_loss_grad_residual(delta, p, TLossMode::kPerVoxel);
    const TLossResult b = t_loss_grad_residual(delta, p, TLossMode::kMultivariate);
    EXPECT_DOUBLE_EQ(a.loss, b.loss);
    EXPECT_DOUBLE_EQ(a.grad.d_mu[0], b.grad.d_mu[0]);
    EXPECT_DOUBLE_EQ(a.grad.d_rho_raw, b.grad.d_rho_raw);
    EXPECT_DOUBLE_EQ(a.grad.d_scale_raw[0], b.grad.d_scale_raw[0]);
  }
}

TEST(TLoss, SymmetricInResidualSign) {
  Rng rng(33);
  for (auto mode : {TLossMode::kPerVoxel, TLossMode::kMultivariate}) {
    std::vector<double> delta(6), s2(6);
    for (int i = 0; i < 6; ++i) {
      delta[i] = rng.uniform(-1.0, 1.0);
      s2[i] = rng.uniform(0.1, 2.0);
    }
    const StudentTParams p = make_params(3.0, s2);
    std::vector<double> neg = delta;
    for (double& d : neg) d = -d;
    EXPECT_EQ(residual_loss(delta, p, mode), residual_loss(neg, p, mode));
  }
}

TEST(TLoss, GaussianLimit) {
  for (double sigma2 : {0.25, 1.0, 4.0}) {
    const StudentTParams p = make_params(1e6, {sigma2});
    const double sigma = std::sqrt(sigma2);
    for (double d = -5.0 * sigma; d <= 5.0 * sigma; d += 0.05 * sigma) {
      const double gauss = 0.5 * std::log(2.0 * kPi * sigma2) + d * d / (2.0 * sigma2);
      EXPECT_NEAR(residual_loss({d}, p, TLossMode::kPerVoxel), gauss, 1e-3) << "delta=" << d;
    }
  }
}

TEST(TLoss, HeavierTailForSmallerR) {
  for (double sigma2 : {0.1, 1.0}) {
    const StudentTParams heavy = make_params(1.0, {sigma2});
    const StudentTParams light = make_params(100.0, {sigma2});
    const double base_h = residual_loss({0.0}, heavy, TLossMode::kPerVoxel);
    const double base_l = residual_loss({0.0}, light, TLossMode::kPerVoxel);
    const double sigma = std::sqrt(sigma2);
    for (double m = 2.01; m < 40.0; m *= 1.3) {
      const double d = m * sigma;
      EXPECT_LT(residual_loss({d}, heavy, TLossMode::kPerVoxel) - base_h,
                residual_loss({d}, light, TLossMode::kPerVoxel) - base_l);
    }
  }
}

TEST(TLoss, BoundedInfluence) {
  for (double r : {0.5, 1.0, 2.0, 10.0, 80.0}) {
    for (double sigma2 : {0.04, 0.5, 3.0}) {
      const StudentTParams p = make_params(r, {sigma2});
      const double sigma = std::sqrt(sigma2);
      const double bound = (r + 1.0) / (2.0 * sigma * std::sqrt(r));
      auto influence = [&](double d) {
        return std::abs(t_loss_grad_residual(std::vector<double>{d}, p, TLossMode::kPerVoxel).grad.d_mu[0]);
      };
      for (double d = 0.0; d < 100.0 * sigma; d += 0.01 * sigma) EXPECT_LE(influence(d), bound * (1 + 1e-12));
      EXPECT_NEAR(influence(sigma * std::sqrt(r)), bound, 1e-12 * bound);
      EXPECT_LT(influence(1e6 * sigma), 1e-3 * bound);
    }
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

TEST(TLossGrad, MatchesCentralDifferences) {
  Rng rng(34);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const TLossMode mode = t % 2 ? TLossMode::kMultivariate : TLossMode::kPerVoxel;
    const bool shared = (t / 2) % 2 == 0;
    std::vector<double> delta(n), s2(shared ? 1 : n);
    for (double& d : delta) d = rng.uniform(-1.0, 1.0);
    for (double& s : s2) s = std::exp(rng.uniform(std::log(0.01), std::log(10.0)));
    const double r = std::exp(rng.uniform(std::log(0.5), std::log(100.0)));
    StudentTParams p = make_params(r, s2);
    if (!shared && n == 1) p.scope = ScaleScope::kPerVoxel;
    const TLossResult g = t_loss_grad_residual(delta, p, mode);

    for (std::size_t i = 0; i < n; ++i) {
      auto up = delta, dn = delta;
      up[i] -= h;  // mu + h
      dn[i] += h;
      const double fd = (residual_loss(up, p, mode) - residual_loss(dn, p, mode)) / (2 * h);
      worst = std::max(worst, relative_error(g.grad.d_mu[i], fd));
    }
    for (std::size_t i = 0; i < p.scale_raw.size(); ++i) {
      auto up = p, dn = p;
      up.scale_raw[i] += h;
      dn.scale_raw[i] -= h;
      const double fd = (residual_loss(delta, up, mode) - residual_loss(delta, dn, mode)) / (2 * h);
      worst = std::max(worst, relative_error(g.grad.d_scale_raw[i], fd));
    }
    auto up = p, dn = p;
    up.rho_raw += h;
    dn.rho_raw -= h;
    const double fd = (residual_loss(delta, up, mode) - residual_loss(delta, dn, mode)) / (2 * h);
    worst = std::max(worst, relative_error(g.grad.d_rho_raw, fd));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(TLossGrad, ClosedFormRGradient) {
  const double r = 3.0, s2 = 0.7, d = 0.4;
  const StudentTParams p = make_params(r, {s2});
  const double S = d * d / s2;
  const double dr = 0.5 / r + 0.5 * digamma(r / 2) - 0.5 * digamma((r + 1) / 2) + 0.5 * std::log1p(S / r) -
                    (r + 1) * S / (2 * r * (r + S));
  const TLossResult g = t_loss_grad_residual(std::vector<double>{d}, p, TLossMode::kPerVoxel);
  EXPECT_NEAR(g.grad.d_rho_raw, dr * sigmoid(p.rho_raw), 1e-14);
}

TEST(TLossGrad, PerVoxelIsMeanOfBlocks) {
  const std::vector<double> delta = {0.3, -0.8, 0.1};
  const StudentTParams p = make_params(2.0, {0.5, 1.0, 2.0});
  const TLossResult all = t_loss_grad_residual(delta, p, TLossMode::kPerVoxel);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) sum += residual_loss({delta[i]}, make_params(2.0, {p.sigma2(i)}), TLossMode::kPerVoxel);
  EXPECT_NEAR(all.loss, sum / 3.0, 1e-14);
}

TEST(TLossGrad, FiniteAtExtremes) {
  const StudentTParams p = make_params(1e-8 + 1e-12, {1e-8 + 1e-12});
  const TLossResult g = t_loss_grad_residual(std::vector<double>{1.0, -1.0, 0.0}, p, TLossMode::kMultivariate);
  EXPECT_TRUE(std::isfinite(g.loss));
  for (double d : g.grad.d_mu) EXPECT_TRUE(std::isfinite(d));
  EXPECT_TRUE(std::isfinite(g.grad.d_rho_raw));
}

}  // namespace
}  // namespace tloss
