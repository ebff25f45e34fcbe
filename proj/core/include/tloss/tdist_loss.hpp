#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "tloss/volume.hpp"

namespace tloss {

/// How voxels map onto Student-t dimensions.
///  - kPerVoxel: every voxel is its own 1-D Student-t; the loss is the mean of
///    the per-voxel negative log-likelihoods.
///  - kMultivariate: the whole volume is one D'-dimensional Student-t with a
///    diagonal covariance, D' = voxel count.
enum class TLossMode { kPerVoxel, kMultivariate };

std::string_view to_string(TLossMode mode);
TLossMode parse_tloss_mode(std::string_view name);

/// Whether sigma^2 is one shared scalar or one value per voxel.
enum class ScaleScope { kShared, kPerVoxel };

/// Lower bound added to both r and sigma^2 after the softplus map.
inline constexpr double kSafeguard = 1e-8;

/// Unconstrained Student-t parameters. r = softplus(rho_raw) + epsilon and
/// sigma_i^2 = softplus(scale_raw_i) + epsilon, so any real raw value is valid.
struct StudentTParams {
  double rho_raw = 0.0;
  std::vector<double> scale_raw = {0.0};
  ScaleScope scope = ScaleScope::kShared;
  double epsilon = kSafeguard;

  /// r = 1 and sigma^2 = 1 (identity covariance) exactly.
  static StudentTParams identity_init(ScaleScope scope, const Dims& dims);

  double r() const;
  double sigma2(std::size_t voxel) const;

  /// Throws ShapeError if scale_raw cannot serve a volume of `dims`.
  void check_scope(const Dims& dims) const;

  friend bool operator==(const StudentTParams&, const StudentTParams&) = default;
};

struct EffectiveParams {
  double r = 1.0;
  std::vector<double> sigma2;
};

EffectiveParams effective_params(const StudentTParams& p);

/// Negative log-likelihood of one D'-dimensional Student-t block with diagonal
/// covariance, D' = delta.size(), plus its partial derivatives.
struct BlockNll {
  double loss = 0.0;
  std::vector<double> d_delta;   ///< dL/d delta_i  (dL/d mu_i = -d_delta_i)
  std::vector<double> d_sigma2;  ///< dL/d sigma_i^2, same length as sigma2
  double d_r = 0.0;
};

/// `sigma2` holds either one value per residual or a single broadcast value;
/// in the broadcast case d_sigma2 has one entry (the summed derivative).
BlockNll student_t_nll(std::span<const double> delta, std::span<const double> sigma2,
                       double r, bool with_grad = true);

/// Log-density of a diagonal-covariance Student-t at k with location mu.
double t_log_pdf(std::span<const double> k, std::span<const double> mu,
                 std::span<const double> sigma2, double r);

/// Student-t loss between a label volume and a probability volume.
double t_loss(const BinaryMask& k, const ProbabilityMask& mu, const StudentTParams& p,
              TLossMode mode = TLossMode::kPerVoxel);

struct TLossGrad {
  std::vector<double> d_mu;         ///< per voxel
  std::vector<double> d_scale_raw;  ///< same shape as StudentTParams::scale_raw
  double d_rho_raw = 0.0;
};

struct TLossResult {
  double loss = 0.0;
  TLossGrad grad;
};

TLossResult t_loss_grad(const BinaryMask& k, const ProbabilityMask& mu,
                        const StudentTParams& p, TLossMode mode = TLossMode::kPerVoxel);

/// Same as t_loss_grad but on raw residuals delta = k - mu, with no range
/// restriction on delta. Used by gradient checks and robustness sweeps.
TLossResult t_loss_grad_residual(std::span<const double> delta, const StudentTParams& p,
                                 TLossMode mode);

}  // namespace tloss
