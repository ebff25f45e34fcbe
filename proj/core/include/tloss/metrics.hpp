#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tloss/volume.hpp"

namespace tloss {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

/// 2 tp / (2 tp + fp + fn). Both masks empty is an UndefinedMetricError.
double dice(const BinaryMask& pred, const BinaryMask& gt);
double dice(const ConfusionCounts& c);

// Each throws UndefinedMetricError when its denominator is zero.
double iou(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);

struct Rates {
  double iou = 0.0;
  double acc = 0.0;
  double pre = 0.0;
  double sen = 0.0;
  double spe = 0.0;
};

/// All five rates; throws if any of them is undefined.
Rates rates(const ConfusionCounts& c);

/// Foreground voxels with at least one 6-neighbour that is background or
/// outside the volume, in lexicographic (d, h, w) order.
struct SurfacePointSet {
  std::vector<Voxel> points;
  Spacing spacing;
};

SurfacePointSet extract_surface(const BinaryMask& m);

/// For each point of `from`, the Euclidean distance (voxel centres scaled by
/// spacing) to the nearest point of `to`. Exact; `to` must be non-empty.
std::vector<double> directed_surface_distances(const SurfacePointSet& from,
                                               const SurfacePointSet& to);

/// Symmetric 95th-percentile surface distance (nearest-rank percentile).
double hd95(const BinaryMask& a, const BinaryMask& b);

/// Mean of the two directed average surface distances.
double asd(const BinaryMask& a, const BinaryMask& b);

/// Nearest-rank percentile: element ceil(q/100 * n) (1-based) of the sorted values.
double nearest_rank_percentile(std::vector<double> values, int percent);

/// One row of the evaluation table. Entries that are undefined for the given
/// masks (zero denominators, empty surfaces) are std::nullopt.
struct MetricRow {
  std::optional<double> dice, iou, acc, pre, sen, spe, hd95, asd;
};

MetricRow evaluate_masks(const BinaryMask& pred, const BinaryMask& gt);

enum class WilcoxonMethod { kAuto, kExact, kNormal };

struct WilcoxonResult {
  double w_plus = 0.0;       ///< sum of ranks of positive differences
  double p_two_sided = 1.0;
  std::size_t n = 0;         ///< nonzero differences used
  bool exact = false;
};

/// Paired two-sided signed-rank test of x against y. Zero differences are
/// dropped and tied magnitudes share their average rank. kAuto enumerates the
/// null distribution exactly for n <= 20 and otherwise uses the normal
/// approximation with tie and continuity corrections. Fewer than 5 nonzero
/// differences is an UndefinedMetricError.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method = WilcoxonMethod::kAuto);

}  // namespace tloss
