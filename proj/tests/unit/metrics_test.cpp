#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "tloss/metrics.hpp"
#include "tloss/rng.hpp"

namespace tloss {
namespace {

// ---- brute-force oracles ----

std::vector<Voxel> oracle_surface(const BinaryMask& m) {
  const Dims n = m.dims();
  std::vector<Voxel> out;
  for (std::int64_t i = 0; i < n.d; ++i)
    for (std::int64_t j = 0; j < n.h; ++j)
      for (std::int64_t k = 0; k < n.w; ++k) {
        if (!m(i, j, k)) continue;
        const std::int64_t nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                       {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        bool surface = false;
        for (const auto& q : nb) {
          if (!m.in_bounds(q[0], q[1], q[2]) || !m(q[0], q[1], q[2])) surface = true;
        }
        if (surface) out.push_back({i, j, k});
      }
  return out;
}

std::vector<double> oracle_directed(const std::vector<Voxel>& from, const std::vector<Voxel>& to, Spacing s) {
  std::vector<double> out;
  for (const Voxel& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Voxel& q : to) {
      const double dd = static_cast<double>(p.d - q.d) * s.d;
      const double dh = static_cast<double>(p.h - q.h) * s.h;
      const double dw = static_cast<double>(p.w - q.w) * s.w;
      best = std::min(best, std::sqrt(dd * dd + dh * dh + dw * dw));
    }
    out.push_back(best);
  }
  return out;
}

double oracle_percentile95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()) - 1e-9));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

struct OracleDistances {
  double hd95;
  double asd;
  double hausdorff;
};

OracleDistances oracle(const BinaryMask& a, const BinaryMask& b) {
  const auto sa = oracle_surface(a), sb = oracle_surface(b);
  const auto ab = oracle_directed(sa, sb, a.spacing());
  const auto ba = oracle_directed(sb, sa, a.spacing());
  double mab = 0.0, mba = 0.0;
  for (double d : ab) mab += d;
  for (double d : ba) mba += d;
  mab /= static_cast<double>(ab.size());
  mba /= static_cast<double>(ba.size());
  return {std::max(oracle_percentile95(ab), oracle_percentile95(ba)), 0.5 * (mab + mba),
          std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()))};
}

BinaryMask random_blobby_mask(Rng& rng, Dims dims, Spacing spacing) {
  BinaryMask m(dims, 0, spacing);
  const int balls = static_cast<int>(rng.uniform_int(1, 4));
  for (int b = 0; b < balls; ++b) {
    const double ci = rng.uniform(0, dims.d), cj = rng.uniform(0, dims.h), ck = rng.uniform(0, dims.w);
    const double r = rng.uniform(0.5, 5.0);
    for (std::int64_t i = 0; i < dims.d; ++i)
      for (std::int64_t j = 0; j < dims.h; ++j)
        for (std::int64_t k = 0; k < dims.w; ++k)
          if ((i - ci) * (i - ci) + (j - cj) * (j - cj) + (k - ck) * (k - ck) <= r * r) m(i, j, k) = 1;
  }
  for (std::size_t i = 0; i < m.size(); ++i)
    if (rng.bernoulli(0.02)) m[i] = 1 - m[i];
  if (count_foreground(m) == 0) m[0] = 1;
  return m;
}

BinaryMask mask_from(Dims dims, std::initializer_list<std::uint8_t> v) { return BinaryMask(dims, std::vector<std::uint8_t>(v)); }

// ---- confusion and rates ----

TEST(Confusion, HandCount) {
  const auto c = confusion(mask_from({1, 1, 4}, {1, 1, 0, 0}), mask_from({1, 1, 4}, {1, 0, 1, 0}));
  EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 1}));
}

TEST(Confusion, IdentityAndAllMissed) {
  const auto m = mask_from({1, 2, 2}, {1, 0, 1, 1});
  const auto c = confusion(m, m);
  EXPECT_EQ(c.fp, 0);
  EXPECT_EQ(c.fn, 0);
  EXPECT_EQ(confusion(BinaryMask({2, 2, 2}, 0), BinaryMask({2, 2, 2}, 1)).fn, 8);
  EXPECT_THROW(confusion(BinaryMask({2, 2, 2}), BinaryMask({2, 2, 1})), ShapeError);
}

TEST(Dice, Values) {
  const auto a = mask_from({1, 1, 4}, {1, 1, 1, 0});
  const auto b = mask_from({1, 1, 4}, {0, 1, 1, 1});
  EXPECT_DOUBLE_EQ(dice(a, b), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(mask_from({1, 1, 2}, {1, 0}), mask_from({1, 1, 2}, {0, 1})), 0.0);
  EXPECT_THROW(dice(BinaryMask({2, 2, 2}, 0), BinaryMask({2, 2, 2}, 0)), UndefinedMetricError);
}

TEST(Rates, HandArithmetic) {
  const Rates r = rates({1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(r.iou, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.acc, 0.5);
  EXPECT_DOUBLE_EQ(r.pre, 0.5);
  EXPECT_DOUBLE_EQ(r.sen, 0.5);
  EXPECT_DOUBLE_EQ(r.spe, 0.5);
  const Rates p = rates({3, 0, 0, 5});
  EXPECT_EQ(p.iou, 1.0);
  EXPECT_EQ(p.acc, 1.0);
  EXPECT_EQ(p.pre, 1.0);
  EXPECT_EQ(p.sen, 1.0);
  EXPECT_EQ(p.spe, 1.0);
}

TEST(Rates, ZeroDenominators) {
  const auto c = confusion(BinaryMask({2, 2, 2}, 1), BinaryMask({2, 2, 2}, 1));
  EXPECT_THROW(specificity(c), UndefinedMetricError);
  EXPECT_THROW(rates(c), UndefinedMetricError);
  EXPECT_THROW(precision({0, 0, 3, 5}), UndefinedMetricError);
  EXPECT_THROW(sensitivity({0, 4, 0, 5}), UndefinedMetricError);
}

TEST(Rates, DiceIouIdentity) {
  Rng rng(51);
  for (int t = 0; t < 200; ++t) {
    const Dims dims{rng.uniform_int(1, 6), rng.uniform_int(1, 6), rng.uniform_int(1, 6)};
    const auto a = random_blobby_mask(rng, dims, {});
    const auto b = random_blobby_mask(rng, dims, {});
    const auto c = confusion(a, b);
    EXPECT_NEAR(dice(c), 2.0 * iou(c) / (1.0 + iou(c)), 1e-14);
  }
}

TEST(EvaluateMasks, UndefinedEntriesAreEmpty) {
  const MetricRow row = evaluate_masks(BinaryMask({2, 2, 2}, 0), BinaryMask({2, 2, 2}, 1));
  EXPECT_EQ(row.dice, 0.0);
  EXPECT_FALSE(row.hd95.has_value());
  EXPECT_FALSE(row.asd.has_value());
  EXPECT_FALSE(row.pre.has_value());
  EXPECT_FALSE(row.spe.has_value());
}

// ---- surfaces and distances ----

TEST(Surface, CubeInsideVolume) {
  BinaryMask m({5, 5, 5}, 0);
  for (int i = 1; i < 4; ++i)
    for (int j = 1; j < 4; ++j)
      for (int k = 1; k < 4; ++k) m(i, j, k) = 1;
  const auto s = extract_surface(m);
  EXPECT_EQ(s.points.size(), 26u);
  EXPECT_EQ(std::count(s.points.begin(), s.points.end(), Voxel{2, 2, 2}), 0);
  EXPECT_TRUE(std::is_sorted(s.points.begin(), s.points.end()));
}

TEST(Surface, SingleVoxelAndEmpty) {
  BinaryMask m({3, 3, 3}, 0);
  m(1, 2, 0) = 1;
  EXPECT_EQ(extract_surface(m).points, (std::vector<Voxel>{{1, 2, 0}}));
  EXPECT_TRUE(extract_surface(BinaryMask({3, 3, 3}, 0)).points.empty());
}

TEST(Surface, FullVolumeMatchesNeighbourScan) {
  BinaryMask m({4, 5, 6}, 1);
  const auto s = extract_surface(m);
  EXPECT_EQ(s.points, oracle_surface(m));
  EXPECT_EQ(s.points.size(), static_cast<std::size_t>(4 * 5 * 6 - 2 * 3 * 4));
}

TEST(Distances, SingleVoxelsThreeApart) {
  BinaryMask a({4, 1, 1}, 0), b({4, 1, 1}, 0);
  a(0, 0, 0) = 1;
  b(3, 0, 0) = 1;
  EXPECT_DOUBLE_EQ(hd95(a, b), 3.0);
  EXPECT_DOUBLE_EQ(asd(a, b), 3.0);
  EXPECT_EQ(hd95(a, a), 0.0);
  EXPECT_EQ(asd(a, a), 0.0);
}

TEST(Distances, EmptyMaskIsError) {
  BinaryMask a({2, 2, 2}, 0), b({2, 2, 2}, 1);
  EXPECT_THROW(hd95(a, b), UndefinedMetricError);
  EXPECT_THROW(asd(b, a), UndefinedMetricError);
}

TEST(Distances, SpacingMustMatch) {
  BinaryMask a({2, 2, 2}, 1), b({2, 2, 2}, 1, Spacing{2.0, 1.0, 1.0});
  EXPECT_THROW(hd95(a, b), ShapeError);
}

TEST(Distances, MatchBruteForceOracle) {
  Rng rng(52);
  for (int t = 0; t < 200; ++t) {
    const Dims dims{rng.uniform_int(1, 16), rng.uniform_int(1, 16), rng.uniform_int(1, 16)};
    const Spacing s = t % 3 == 0 ? Spacing{rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)}
                                 : Spacing{};
    const auto a = random_blobby_mask(rng, dims, s);
    const auto b = random_blobby_mask(rng, dims, s);
    const OracleDistances o = oracle(a, b);
    EXPECT_EQ(hd95(a, b), o.hd95) << "trial " << t;
    EXPECT_NEAR(asd(a, b), o.asd, 1e-12) << "trial " << t;
    const MetricRow row = evaluate_masks(a, b);
    EXPECT_EQ(row.hd95, o.hd95);
    EXPECT_NEAR(*row.asd, o.asd, 1e-12);
  }
}

TEST(Distances, Symmetric) {
  Rng rng(53);
  for (int t = 0; t < 50; ++t) {
    const Dims dims{rng.uniform_int(2, 10), rng.uniform_int(2, 10), rng.uniform_int(2, 10)};
    const auto a = random_blobby_mask(rng, dims, {});
    const auto b = random_blobby_mask(rng, dims, {});
    EXPECT_EQ(hd95(a, b), hd95(b, a));
    EXPECT_NEAR(asd(a, b), asd(b, a), 1e-15);
  }
}

TEST(Distances, TranslationInvariant) {
  Rng rng(54);
  for (int t = 0; t < 30; ++t) {
    BinaryMask a({14, 14, 14}, 0), b({14, 14, 14}, 0), a2({14, 14, 14}, 0), b2({14, 14, 14}, 0);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        for (int k = 0; k < 10; ++k) {
          const std::uint8_t va = rng.bernoulli(0.3), vb = rng.bernoulli(0.3);
          a(i, j, k) = va;
          b(i, j, k) = vb;
          a2(i + 2, j + 3, k + 1) = va;
          b2(i + 2, j + 3, k + 1) = vb;
        }
    if (!count_foreground(a) || !count_foreground(b)) continue;
    EXPECT_EQ(hd95(a, b), hd95(a2, b2));
    EXPECT_NEAR(asd(a, b), asd(a2, b2), 1e-12);
  }
}

TEST(Distances, Hd95BoundedByHausdorff) {
  Rng rng(55);
  for (int t = 0; t < 100; ++t) {
    const Dims dims{rng.uniform_int(1, 12), rng.uniform_int(1, 12), rng.uniform_int(1, 12)};
    const auto a = random_blobby_mask(rng, dims, {});
    const auto b = random_blobby_mask(rng, dims, {});
    const OracleDistances o = oracle(a, b);
    EXPECT_LE(hd95(a, b), o.hausdorff);
    if (oracle_surface(a).size() <= 19 && oracle_surface(b).size() <= 19) EXPECT_EQ(hd95(a, b), o.hausdorff);
  }
}

TEST(Percentile, NearestRank) {
  EXPECT_EQ(nearest_rank_percentile({5.0, 1.0, 3.0}, 95), 5.0);
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  EXPECT_EQ(nearest_rank_percentile(v, 95), 95.0);
  v.push_back(101);
  EXPECT_EQ(nearest_rank_percentile(v, 95), 96.0);
  EXPECT_THROW(nearest_rank_percentile({}, 95), UndefinedMetricError);
}

// ---- Wilcoxon ----

double oracle_exact_p(const std::vector<double>& d) {
  std::vector<double> mag;
  std::vector<int> sign;
  for (double x : d)
    if (x != 0.0) {
      mag.push_back(std::abs(x));
      sign.push_back(x > 0);
    }
  const std::size_t n = mag.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      less += mag[j] < mag[i];
      equal += mag[j] == mag[i];
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i) w += sign[i] * rank[i];
  const double mean = static_cast<double>(n * (n + 1)) / 4.0;
  double extreme = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) s += rank[i];
    if (std::abs(s - mean) >= std::abs(w - mean) - 1e-9) extreme += 1.0;
  }
  return std::min(1.0, extreme / static_cast<double>(1u << n));
}

TEST(Wilcoxon, FiveAllPositive) {
  const std::vector<double> x = {1.1, 2.2, 3.3, 4.4, 5.5}, y = {1, 2, 3, 4, 5};
  const WilcoxonResult r = wilcoxon_signed_rank(x, y);
  EXPECT_DOUBLE_EQ(r.p_two_sided, 0.0625);
  EXPECT_DOUBLE_EQ(r.w_plus, 15.0);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 5u);
}

TEST(Wilcoxon, ErrorsOnTooFewDifferences) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  EXPECT_THROW(wilcoxon_signed_rank(x, x), UndefinedMetricError);
  const std::vector<double> y = {1, 2, 3, 4, 6, 7};
  EXPECT_THROW(wilcoxon_signed_rank(x, y), UndefinedMetricError);
  EXPECT_THROW(wilcoxon_signed_rank(x, std::vector<double>{1, 2}), ShapeError);
}

TEST(Wilcoxon, ExactMatchesEnumerationOracle) {
  Rng rng(56);
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(5, 12));
    std::vector<double> x(n), y(n, 0.0);
    // Coarse values force ties and zeros.
    for (double& v : x) v = static_cast<double>(rng.uniform_int(-4, 5)) * 0.5;
    std::size_t nonzero = std::count_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
    if (nonzero < 5) continue;
    const WilcoxonResult r = wilcoxon_signed_rank(x, y, WilcoxonMethod::kExact);
    EXPECT_NEAR(r.p_two_sided, oracle_exact_p(x), 1e-12) << "trial " << t;
  }
}

TEST(Wilcoxon, ExactAndNormalAgreeAtTwenty) {
  Rng rng(57);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(20), y(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = rng.normal() + 0.3;
      y[i] = rng.normal();
    }
    const double pe = wilcoxon_signed_rank(x, y, WilcoxonMethod::kExact).p_two_sided;
    const double pn = wilcoxon_signed_rank(x, y, WilcoxonMethod::kNormal).p_two_sided;
    EXPECT_NEAR(pe, pn, 0.02);
  }
}

TEST(Wilcoxon, AutoSwitchesToNormalAboveTwenty) {
  std::vector<double> x(21), y(21, 0.0);
  for (int i = 0; i < 21; ++i) x[i] = i + 1;
  EXPECT_TRUE(wilcoxon_signed_rank(std::span(x).first(20), std::span(y).first(20)).exact);
  EXPECT_FALSE(wilcoxon_signed_rank(x, y).exact);
}

}  // namespace
}  // namespace tloss
