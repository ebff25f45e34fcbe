#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tloss/losses.hpp"
#include "tloss/predictor.hpp"
#include "tloss/synthetic.hpp"
#include "tloss/tdist_loss.hpp"

namespace tloss {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Adam moments for one parameter group. Buffers are sized on first use.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place. Throws ShapeError on a
/// length mismatch and NumericalError naming `group` on a non-finite gradient.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, std::string_view group);

struct OptimState {
  AdamState theta;
  AdamState rho;
  AdamState scale;
};

/// Which validation series drives early stopping.
///  - kTDist: Student-t loss for every trained loss kind.
///  - kOwnLoss: the trained loss itself.
enum class StopCriterion { kTDist, kOwnLoss };

std::string_view to_string(StopCriterion c);
StopCriterion parse_stop_criterion(std::string_view name);

struct TrainConfig {
  double lr_theta = 1e-3;
  double lr_r = 1e-4;
  double lr_sigma = 1e-4;
  int max_epochs = 600;
  int patience = 20;
  double min_delta = 1e-5;
  LossKind loss = LossKind::tdist();
  double tau = 0.5;
  bool augment = true;
  std::uint64_t seed = 1;
  ScaleScope scale_scope = ScaleScope::kPerVoxel;
  std::size_t hidden = kDefaultHidden;
  FeatureConfig features;
  StopCriterion criterion = StopCriterion::kTDist;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// A volume's features with the label the loss is computed against.
struct TrainingSample {
  FeatureField features;
  BinaryMask label;
};

/// Features of each sample's intensity, paired with its weak label (or its
/// ground truth when `use_gt`).
std::vector<TrainingSample> prepare_samples(std::span<const SyntheticSample> samples,
                                            const FeatureConfig& cfg, bool use_gt = false);

struct ScaleSummary {
  double r = 1.0;
  double sigma2_mean = 1.0;
  double sigma2_min = 1.0;
  double sigma2_max = 1.0;
  friend bool operator==(const ScaleSummary&, const ScaleSummary&) = default;
};

ScaleSummary summarize(const StudentTParams& p);

struct TrainReport {
  TrainConfig config;
  std::vector<double> train_loss;     ///< mean training loss per epoch
  std::vector<double> val_ltd;        ///< validation Student-t loss per epoch
  std::vector<double> val_criterion;  ///< the series early stopping watched
  int stopped_epoch = 0;              ///< epochs run (1-based count)
  int best_epoch = 0;                 ///< 1-based
  double best_val = 0.0;
  PredictorParams best_params;
  StudentTParams best_tparams;
  ScaleSummary scale;                 ///< r and sigma^2 of the best snapshot

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Student-t parameters the validation criterion uses for a given run: the
/// learned ones when training with the Student-t loss, else r = 1, sigma^2 = 1.
StudentTParams validation_tparams(const TrainConfig& cfg, const StudentTParams& learned);

/// One volume per optimizer step over a seeded shuffle of `train` each epoch,
/// with optional random flips and equal-length axis swaps. Early stopping on
/// the validation criterion; the best snapshot is returned.
TrainReport train(std::span<const TrainingSample> train_set, std::span<const TrainingSample> val_set,
                  const TrainConfig& cfg);

/// Index map for a random flip/swap: out[v] = in[src[v]]. Swaps only pair
/// axes of equal length so dims are preserved.
std::vector<std::size_t> draw_augmentation(Rng& rng, const Dims& dims);

/// Applies an index map to the intensity channels of `f` (coordinates stay put)
/// and to `label`.
TrainingSample apply_augmentation(const TrainingSample& s, std::span<const std::size_t> src,
                                  std::size_t intensity_channels);

BinaryMask predict_mask(const PredictorParams& p, const FeatureField& f, double tau);

struct FieldEstimateOptions {
  /// Learning rate for r and sigma^2 relative to the logit learning rate.
  double tparam_lr_scale = 1.0;
  ScaleScope scale_scope = ScaleScope::kShared;
};

/// Fits a free logit field (mu = sigmoid(logits), logits start at 0) with Adam
/// against the mean loss over `labels`. With the Student-t loss, r and sigma^2
/// are fitted alongside. Throws NumericalError on a non-finite loss.
ProbabilityMask field_estimate(std::span<const BinaryMask> labels, const LossKind& loss, int steps,
                               double lr, const FieldEstimateOptions& opts = {});

}  // namespace tloss
