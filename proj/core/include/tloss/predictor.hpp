#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tloss/rng.hpp"
#include "tloss/volume.hpp"

namespace tloss {

struct FeatureConfig {
  std::vector<double> smooth_sigmas = {1.0, 2.0};
  bool include_coords = true;

  void validate() const;
  /// Number of intensity-derived channels (raw plus one per sigma).
  std::size_t intensity_channels() const noexcept { return 1 + smooth_sigmas.size(); }
  std::size_t channels() const noexcept { return intensity_channels() + (include_coords ? 3 : 0); }
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Per-voxel features, voxel-major: value(v, c) = data[v * channels + c].
/// Intensity-derived channels come first, then the (d, h, w) coordinates.
struct FeatureField {
  Dims dims;
  std::size_t channels = 0;
  std::vector<double> data;

  std::size_t voxels() const noexcept { return static_cast<std::size_t>(dims.count()); }
  std::span<const double> at(std::size_t voxel) const noexcept {
    return {data.data() + voxel * channels, channels};
  }
};

/// z-scored raw intensity, z-scored Gaussian-smoothed copies, and coordinates
/// mapped to [-1, 1] per axis (0 on a length-1 axis). Throws DomainError when
/// the intensity (or a smoothed copy) has zero variance.
FeatureField extract_features(const Volume3D& v, const FeatureConfig& cfg);

/// mu = sigmoid(w2 . tanh(W1 x + b1) + b2). W1 is hidden x in, row-major.
struct PredictorParams {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  /// Zero-valued parameters of the given shape.
  static PredictorParams zeros(std::size_t in, std::size_t hidden);

  std::size_t size() const noexcept { return hidden * in + 2 * hidden + 1; }
  /// Order: W1, b1, w2, b2.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  /// Throws ShapeError on inconsistent vector lengths, DomainError on non-finite values.
  void validate() const;

  friend bool operator==(const PredictorParams&, const PredictorParams&) = default;
};

inline constexpr std::size_t kDefaultHidden = 16;

/// W1 and w2 uniform on (-a, a), a = sqrt(6 / (fan_in + fan_out)); biases zero.
PredictorParams init_params(Rng& rng, std::size_t in, std::size_t hidden = kDefaultHidden);
PredictorParams init_params(Rng& rng, const FeatureConfig& cfg,
                            std::size_t hidden = kDefaultHidden);

/// Pre-sigmoid logits are clamped to +-kLogitClamp so mu stays strictly inside (0, 1).
inline constexpr double kLogitClamp = 30.0;

/// Hidden activations kept by forward() for a following backward().
struct ForwardCache {
  std::vector<double> act;  ///< voxels x hidden
  std::vector<double> logit;  ///< pre-clamp
  std::vector<double> mu;
};

ProbabilityMask forward(const PredictorParams& p, const FeatureField& f,
                        ForwardCache* cache = nullptr);

/// Gradient of sum_v d_mu[v] * mu[v] with respect to every parameter, summed
/// over voxels in row-major order. `cache` must come from forward() on the
/// same params and features; it is recomputed when null.
PredictorParams backward(const PredictorParams& p, const FeatureField& f,
                         std::span<const double> d_mu, const ForwardCache* cache = nullptr);

inline constexpr std::uint32_t kMprmVersion = 1;

std::vector<std::uint8_t> encode_params(const PredictorParams& p);
PredictorParams decode_params(std::span<const std::uint8_t> bytes);
void save_params(const std::filesystem::path& path, const PredictorParams& p);
PredictorParams load_params(const std::filesystem::path& path);

}  // namespace tloss
