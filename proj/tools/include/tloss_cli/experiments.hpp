#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tloss/losses.hpp"
#include "tloss/metrics.hpp"
#include "tloss/trainer.hpp"
#include "tloss_cli/io.hpp"

namespace tloss::cli {

// ---- gradient check ----

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTolerance = 1e-6;

struct GradcheckComponent {
  std::string name;
  int trials = 0;
  /// Largest over trials of max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckComponent> components;
  bool passed() const;
  /// Name of the first failing component, empty when all pass.
  std::string first_failure() const;
};

/// Component names in run order.
std::vector<std::string> gradcheck_components();

/// Central differences with step kFdStep on seeded random instances.
/// `inject_fault` names a component whose analytic gradient is negated, so the
/// failure path can be exercised.
GradcheckReport run_gradcheck(int trials, std::uint64_t seed, std::string_view inject_fault = {});

// ---- ablation ----

struct SampleMetrics {
  std::size_t sample = 0;
  MetricRow row;
};

struct AblationRow {
  std::string loss;
  double dice_mean = 0.0, dice_sd = 0.0;
  double hd95_mean = 0.0, hd95_sd = 0.0;
  double asd_mean = 0.0, asd_sd = 0.0;
  std::optional<double> p_dice, p_asd;
  int undefined_distances = 0;
  int stopped_epoch = 0;
  int best_epoch = 0;
  ScaleSummary scale;
  std::vector<SampleMetrics> per_sample;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  const AblationRow* find(std::string_view loss) const;
};

/// Metrics of binarized predictions against ground truth for `indices`.
std::vector<SampleMetrics> evaluate_params(const Dataset& data, const std::vector<TrainingSample>& prepared,
                                           const std::vector<std::size_t>& indices,
                                           const PredictorParams& params, double tau,
                                           const std::optional<Spacing>& spacing);

/// Trains every kind with the same base config and split, evaluates on the
/// test part and tests each kind against the Student-t loss (signed-rank on
/// per-sample Dice and ASD).
AblationReport run_ablation(const Dataset& data, const Split& split, const std::vector<LossKind>& kinds,
                            const TrainConfig& base, std::ostream* progress = nullptr);

std::string ablation_csv(const AblationReport& report);
std::string ablation_per_sample_csv(const AblationReport& report);
/// Aligned table; p-values at or below 0.05 carry a '*'.
std::string ablation_table(const AblationReport& report);

// ---- field estimation ----

struct FieldEstConfig {
  std::uint64_t seed = 1;
  int seeds = 20;
  double contamination = 0.3;
  int labels = 20;
  int steps = 500;
  double lr = 0.05;
  Dims dims{16, 16, 16};
  /// Boundary flip rate of the independently jittered clean labels.
  double label_flip_rate = 0.15;
  TLossMode mode = TLossMode::kMultivariate;
  std::vector<LossKind> losses;  ///< empty means all six

  void validate() const;
};

struct FieldEstRow {
  std::string loss;
  std::vector<double> dice;  ///< per seed
  double dice_mean = 0.0;
  double dice_sd = 0.0;
  /// Fraction of seeds where the Student-t loss scores at least this Dice.
  std::optional<double> tdist_win_rate;
  /// Same with a strict inequality.
  std::optional<double> tdist_strict_win_rate;
};

struct FieldEstReport {
  std::vector<FieldEstRow> rows;
  const FieldEstRow* find(std::string_view loss) const;
};

/// Label set for one seed: gt plus `labels` masks, round(contamination * labels)
/// of them pure noise (Bernoulli with a per-mask density drawn uniformly from
/// [0, 1]) and the rest boundary-jittered copies of gt.
struct FieldEstCase {
  BinaryMask gt;
  std::vector<BinaryMask> labels;
};
FieldEstCase make_fieldest_case(const FieldEstConfig& cfg, int seed_index);

FieldEstReport run_fieldest(const FieldEstConfig& cfg, std::ostream* progress = nullptr);

std::string fieldest_csv(const FieldEstReport& report);
std::string fieldest_per_seed_csv(const FieldEstReport& report);
std::string fieldest_table(const FieldEstReport& report);

// ---- small statistics helpers ----

double mean_of(const std::vector<double>& v);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sd_of(const std::vector<double>& v);

}  // namespace tloss::cli
