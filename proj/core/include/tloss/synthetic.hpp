#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tloss/rng.hpp"
#include "tloss/volume.hpp"

namespace tloss {

/// Ground-truth shape: thresholded sum of random anisotropic Gaussian lobes.
struct ShapeSpec {
  Dims dims{32, 32, 32};
  int n_lobes = 3;
  double lobe_sigma_min = 2.5;
  double lobe_sigma_max = 5.0;
  double threshold = 0.5;

  void validate() const;
};

struct Lobe {
  std::array<double, 3> center{};
  std::array<double, 3> sigma{};
};

/// Lobe centres are uniform over the middle 60% of each axis.
std::vector<Lobe> draw_lobes(Rng& rng, const ShapeSpec& spec);

/// Min-max normalizes the lobe sum to [0,1] and thresholds it. A flat field
/// (max == min) normalizes to zero and yields an empty mask.
BinaryMask render_lobes(const std::vector<Lobe>& lobes, const ShapeSpec& spec);

/// Draws until the mask is non-empty; after 10 empty draws throws DomainError.
BinaryMask gen_shape(Rng& rng, const ShapeSpec& spec);

struct IntensitySpec {
  double fg_mean = 1.0;
  double bg_mean = 0.0;
  double noise_sd = 0.35;
  /// Gaussian smoothing after the noise; 0 disables it.
  double smooth_sigma = 0.8;

  void validate() const;
};

/// Class means plus Gaussian noise, smoothed, then rounded to f32 so the
/// result survives an MVOL round trip unchanged.
Volume3D gen_intensity(Rng& rng, const BinaryMask& gt, const IntensitySpec& spec);

/// Weak-label corruption model. Stages run in order: morphology with a radius
/// drawn uniformly from [morph_min, morph_max], boundary-band flips, spurious
/// balls, then (with drop_component_prob) removal of one 6-connected component.
struct CorruptionSpec {
  double boundary_flip_rate = 0.15;
  int outlier_blob_count = 3;
  int outlier_blob_radius = 3;
  int morph_min = -1;
  int morph_max = 2;
  double drop_component_prob = 0.0;

  static CorruptionSpec none() { return {0.0, 0, 0, 0, 0, 0.0}; }
  void validate() const;
};

/// Voxels within Euclidean distance 1 of the mask surface (surface voxels and
/// their 6-neighbours).
BinaryMask boundary_band(const BinaryMask& m);

BinaryMask corrupt_labels(Rng& rng, const BinaryMask& gt, const CorruptionSpec& spec);

struct SyntheticSample {
  Volume3D intensity;
  BinaryMask gt;
  BinaryMask weak;
};

struct DatasetSpec {
  std::uint64_t seed = 7;
  int n = 60;
  ShapeSpec shape;
  CorruptionSpec corruption;
  IntensitySpec intensity;

  void validate() const;
};

/// Sample `index` drawn from its own stream Rng(derive_seed(seed, index)).
SyntheticSample gen_sample(const DatasetSpec& spec, std::uint64_t index);

std::vector<SyntheticSample> gen_dataset(const DatasetSpec& spec);

}  // namespace tloss
