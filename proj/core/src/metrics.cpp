#include "tloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

namespace tloss {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_dims(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

double ratio(std::int64_t num, std::int64_t den, const char* what) {
  if (den == 0) throw UndefinedMetricError(std::string(what) + ": zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double dice(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "dice (both masks empty)"); }
double dice(const BinaryMask& pred, const BinaryMask& gt) { return dice(confusion(pred, gt)); }
double iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn, "iou"); }
double accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total(), "accuracy"); }
double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp, "precision"); }
double sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn, "sensitivity"); }
double specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp, "specificity"); }

Rates rates(const ConfusionCounts& c) {
  return {iou(c), accuracy(c), precision(c), sensitivity(c), specificity(c)};
}

SurfacePointSet extract_surface(const BinaryMask& m) {
  SurfacePointSet s;
  s.spacing = m.spacing();
  const Dims& n = m.dims();
  static constexpr std::int64_t kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                                  {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  for (std::int64_t i = 0; i < n.d; ++i) {
    for (std::int64_t j = 0; j < n.h; ++j) {
      for (std::int64_t k = 0; k < n.w; ++k) {
        if (!m(i, j, k)) continue;
        for (const auto& o : kOffsets) {
          const std::int64_t a = i + o[0], b = j + o[1], c = k + o[2];
          if (!m.in_bounds(a, b, c) || !m(a, b, c)) {
            s.points.push_back({i, j, k});
            break;
          }
        }
      }
    }
  }
  return s;
}

namespace {

// Target points bucketed by (d, h) row with sorted w values, for exact
// nearest-neighbour queries with row pruning.
class RowIndex {
 public:
  explicit RowIndex(const SurfacePointSet& to) : spacing_(to.spacing) {
    for (const Voxel& v : to.points) {
      lo_.d = std::min(lo_.d, v.d);
      lo_.h = std::min(lo_.h, v.h);
      hi_.d = std::max(hi_.d, v.d);
      hi_.h = std::max(hi_.h, v.h);
    }
    rows_h_ = hi_.h - lo_.h + 1;
    rows_.resize(static_cast<std::size_t>((hi_.d - lo_.d + 1) * rows_h_));
    // Points arrive in lexicographic order, so each row's w list is sorted.
    for (const Voxel& v : to.points) row(v.d, v.h).push_back(v.w);
  }

  // Squared distance to the nearest target. Each candidate distance is
  // evaluated as dd*dd + dh*dh + dw*dw with per-axis scaled offsets.
  double nearest_sq(const Voxel& q) const {
    double best = std::numeric_limits<double>::infinity();
    const std::int64_t d0 = std::clamp(q.d, lo_.d, hi_.d);
    // Walk d outward from the closest populated slab in both directions.
    for (int dir = 0; dir < 2; ++dir) {
      for (std::int64_t d = dir == 0 ? d0 : d0 + 1; d >= lo_.d && d <= hi_.d; d += dir == 0 ? -1 : 1) {
        const double dd = static_cast<double>(q.d - d) * spacing_.d;
        if (dd * dd >= best) break;
        scan_slab(q, d, dd, best);
      }
    }
    return best;
  }

 private:
  std::vector<std::int64_t>& row(std::int64_t d, std::int64_t h) {
    return rows_[static_cast<std::size_t>((d - lo_.d) * rows_h_ + (h - lo_.h))];
  }
  const std::vector<std::int64_t>& row(std::int64_t d, std::int64_t h) const {
    return rows_[static_cast<std::size_t>((d - lo_.d) * rows_h_ + (h - lo_.h))];
  }

  void scan_slab(const Voxel& q, std::int64_t d, double dd, double& best) const {
    const std::int64_t h0 = std::clamp(q.h, lo_.h, hi_.h);
    for (int dir = 0; dir < 2; ++dir) {
      for (std::int64_t h = dir == 0 ? h0 : h0 + 1; h >= lo_.h && h <= hi_.h; h += dir == 0 ? -1 : 1) {
        const double dh = static_cast<double>(q.h - h) * spacing_.h;
        if (dd * dd + dh * dh >= best) break;
        const auto& ws = row(d, h);
        if (ws.empty()) continue;
        // For a fixed row the distance grows with |dw|, so the closest w wins.
        auto it = std::lower_bound(ws.begin(), ws.end(), q.w);
        if (it != ws.end()) consider(dd, dh, q.w - *it, best);
        if (it != ws.begin()) consider(dd, dh, q.w - *std::prev(it), best);
      }
    }
  }

  void consider(double dd, double dh, std::int64_t dw_vox, double& best) const {
    const double dw = static_cast<double>(dw_vox) * spacing_.w;
    const double dist = dd * dd + dh * dh + dw * dw;
    if (dist < best) best = dist;
  }

  Spacing spacing_;
  Voxel lo_{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(), 0};
  Voxel hi_{std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(), 0};
  std::int64_t rows_h_ = 0;
  std::vector<std::vector<std::int64_t>> rows_;
};

void require_pair(const BinaryMask& a, const BinaryMask& b, const char* what) {
  require_same_dims(a, b, what);
  if (!(a.spacing() == b.spacing())) {
    throw ShapeError(std::string(what) + ": masks have different spacing");
  }
}

struct SurfacePair {
  std::vector<double> ab;
  std::vector<double> ba;
};

SurfacePair surface_distances(const BinaryMask& a, const BinaryMask& b, const char* what) {
  require_pair(a, b, what);
  const SurfacePointSet sa = extract_surface(a);
  const SurfacePointSet sb = extract_surface(b);
  if (sa.points.empty() || sb.points.empty()) {
    throw UndefinedMetricError(std::string(what) + ": empty mask");
  }
  return {directed_surface_distances(sa, sb), directed_surface_distances(sb, sa)};
}

}  // namespace

std::vector<double> directed_surface_distances(const SurfacePointSet& from,
                                               const SurfacePointSet& to) {
  if (to.points.empty()) throw UndefinedMetricError("surface distance to an empty point set");
  const RowIndex index(to);
  std::vector<double> out;
  out.reserve(from.points.size());
  for (const Voxel& p : from.points) out.push_back(std::sqrt(index.nearest_sq(p)));
  return out;
}

double nearest_rank_percentile(std::vector<double> values, int percent) {
  if (values.empty()) throw UndefinedMetricError("percentile of an empty set");
  const auto n = static_cast<std::int64_t>(values.size());
  // ceil(percent * n / 100) in exact integer arithmetic, at least 1.
  const std::int64_t rank = std::max<std::int64_t>(1, (percent * n + 99) / 100);
  std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
  return values[static_cast<std::size_t>(rank - 1)];
}

double hd95(const BinaryMask& a, const BinaryMask& b) {
  SurfacePair d = surface_distances(a, b, "hd95");
  return std::max(nearest_rank_percentile(std::move(d.ab), 95),
                  nearest_rank_percentile(std::move(d.ba), 95));
}

double asd(const BinaryMask& a, const BinaryMask& b) {
  SurfacePair d = surface_distances(a, b, "asd");
  const double mean_ab = std::accumulate(d.ab.begin(), d.ab.end(), 0.0) / static_cast<double>(d.ab.size());
  const double mean_ba = std::accumulate(d.ba.begin(), d.ba.end(), 0.0) / static_cast<double>(d.ba.size());
  return 0.5 * (mean_ab + mean_ba);
}

MetricRow evaluate_masks(const BinaryMask& pred, const BinaryMask& gt) {
  const ConfusionCounts c = confusion(pred, gt);
  auto guarded = [](auto&& f) -> std::optional<double> {
    try {
      return f();
    } catch (const UndefinedMetricError&) {
      return std::nullopt;
    }
  };
  MetricRow row;
  row.dice = guarded([&] { return dice(c); });
  row.iou = guarded([&] { return iou(c); });
  row.acc = guarded([&] { return accuracy(c); });
  row.pre = guarded([&] { return precision(c); });
  row.sen = guarded([&] { return sensitivity(c); });
  row.spe = guarded([&] { return specificity(c); });
  if (c.tp + c.fp > 0 && c.tp + c.fn > 0) {
    SurfacePair d = surface_distances(pred, gt, "evaluate_masks");
    const double mean_ab = std::accumulate(d.ab.begin(), d.ab.end(), 0.0) / static_cast<double>(d.ab.size());
    const double mean_ba = std::accumulate(d.ba.begin(), d.ba.end(), 0.0) / static_cast<double>(d.ba.size());
    row.asd = 0.5 * (mean_ab + mean_ba);
    row.hd95 = std::max(nearest_rank_percentile(std::move(d.ab), 95),
                        nearest_rank_percentile(std::move(d.ba), 95));
  }
  return row;
}

namespace {

// Average ranks (1-based) of |d|, ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& magnitudes) {
  const std::size_t n = magnitudes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Exact null distribution of W+ over all 2^n sign assignments. Ranks are
// doubled so tied (half-integer) ranks stay integral.
double exact_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<std::int64_t> doubled(ranks.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::llround(2.0 * ranks[i]);
    total += doubled[i];
  }
  std::vector<double> count(static_cast<std::size_t>(total + 1), 0.0);
  count[0] = 1.0;
  std::int64_t reach = 0;
  for (std::int64_t r : doubled) {
    for (std::int64_t s = reach; s >= 0; --s) {
      if (count[s] != 0.0) count[s + r] += count[s];
    }
    reach += r;
  }
  const std::int64_t w2 = std::llround(2.0 * w_plus);
  double lower = 0.0;
  double upper = 0.0;
  double all = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    all += count[s];
    if (s <= w2) lower += count[s];
    if (s >= w2) upper += count[s];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double normal_p(const std::vector<double>& magnitudes, double w_plus) {
  const double n = static_cast<double>(magnitudes.size());
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method) {
  if (x.size() != y.size()) throw ShapeError("wilcoxon_signed_rank: samples differ in length");
  std::vector<double> magnitudes;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d == 0.0) continue;
    magnitudes.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (magnitudes.size() < 5) {
    throw UndefinedMetricError("wilcoxon_signed_rank: need at least 5 nonzero differences, have " +
                               std::to_string(magnitudes.size()));
  }
  const std::vector<double> ranks = average_ranks(magnitudes);
  WilcoxonResult res;
  res.n = magnitudes.size();
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (positive[i]) res.w_plus += ranks[i];
  }
  res.exact = method == WilcoxonMethod::kExact || (method == WilcoxonMethod::kAuto && res.n <= 20);
  res.p_two_sided = res.exact ? exact_p(ranks, res.w_plus) : normal_p(magnitudes, res.w_plus);
  return res;
}

}  // namespace tloss
