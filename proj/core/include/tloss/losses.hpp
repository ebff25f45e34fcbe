#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tloss/tdist_loss.hpp"
#include "tloss/volume.hpp"

namespace tloss {

/// Clamp applied to mu before any logarithm.
inline constexpr double kLogClamp = 1e-7;

struct LossKind {
  enum class Type { kMse, kMae, kBce, kCe, kFocal, kTDist };

  Type type = Type::kTDist;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  TLossMode mode = TLossMode::kPerVoxel;

  static LossKind mse() { return {Type::kMse}; }
  static LossKind mae() { return {Type::kMae}; }
  static LossKind bce() { return {Type::kBce}; }
  static LossKind ce() { return {Type::kCe}; }
  static LossKind focal(double alpha = 0.25, double gamma = 2.0) {
    return {Type::kFocal, alpha, gamma};
  }
  static LossKind tdist(TLossMode mode = TLossMode::kPerVoxel) {
    return {Type::kTDist, 0.25, 2.0, mode};
  }

  /// Throws UsageError on focal parameters outside alpha in (0,1), gamma >= 0.
  void validate() const;

  friend bool operator==(const LossKind&, const LossKind&) = default;
};

/// Short name used on the command line and in reports: mse, mae, bce, ce, focal, tdist.
std::string_view name(const LossKind& kind);
LossKind parse_loss_kind(std::string_view name, TLossMode mode = TLossMode::kPerVoxel);
/// All six kinds in report order (ce, bce, focal, mse, mae, tdist).
std::vector<LossKind> all_loss_kinds(TLossMode mode = TLossMode::kPerVoxel);
std::string loss_kind_names();

struct LossValueGrad {
  double loss = 0.0;
  std::vector<double> d_mu;
};

/// Mean-aggregated loss and dL/dmu. For kTDist, `tparams` supplies r and
/// sigma^2; when absent the identity initialization (r = 1, shared sigma^2 = 1)
/// is used.
LossValueGrad loss_value_grad(const LossKind& kind, const BinaryMask& k, const ProbabilityMask& mu,
                              const StudentTParams* tparams = nullptr);

}  // namespace tloss
