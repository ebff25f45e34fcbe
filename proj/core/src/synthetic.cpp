#include "tloss/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "tloss/metrics.hpp"
#include "tloss/morphology.hpp"
#include "tloss/mvol.hpp"

namespace tloss {

void ShapeSpec::validate() const {
  validate_dims(dims);
  if (n_lobes < 1) throw UsageError("ShapeSpec: n_lobes must be >= 1");
  if (!(lobe_sigma_min > 0.0) || !(lobe_sigma_min <= lobe_sigma_max)) {
    throw UsageError("ShapeSpec: need 0 < lobe_sigma_min <= lobe_sigma_max");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("ShapeSpec: threshold must be in (0,1)");
}

void IntensitySpec::validate() const {
  if (fg_mean == bg_mean) throw UsageError("IntensitySpec: fg_mean must differ from bg_mean");
  if (!(noise_sd >= 0.0)) throw UsageError("IntensitySpec: noise_sd must be >= 0");
  if (!(smooth_sigma >= 0.0)) throw UsageError("IntensitySpec: smooth_sigma must be >= 0");
}

void CorruptionSpec::validate() const {
  if (!(boundary_flip_rate >= 0.0 && boundary_flip_rate <= 1.0)) {
    throw UsageError("CorruptionSpec: boundary_flip_rate must be in [0,1]");
  }
  if (!(drop_component_prob >= 0.0 && drop_component_prob <= 1.0)) {
    throw UsageError("CorruptionSpec: drop_component_prob must be in [0,1]");
  }
  if (outlier_blob_count < 0 || outlier_blob_radius < 0) {
    throw UsageError("CorruptionSpec: blob count and radius must be >= 0");
  }
  if (morph_min > morph_max) throw UsageError("CorruptionSpec: morph_min > morph_max");
}

void DatasetSpec::validate() const {
  if (n < 1) throw UsageError("DatasetSpec: n must be >= 1");
  shape.validate();
  corruption.validate();
  intensity.validate();
}

std::vector<Lobe> draw_lobes(Rng& rng, const ShapeSpec& spec) {
  std::vector<Lobe> lobes(static_cast<std::size_t>(spec.n_lobes));
  for (Lobe& lobe : lobes) {
    for (int a = 0; a < 3; ++a) {
      const double extent = static_cast<double>(spec.dims[a] - 1);
      lobe.center[a] = rng.uniform(0.2 * extent, 0.8 * extent);
    }
    for (int a = 0; a < 3; ++a) lobe.sigma[a] = rng.uniform(spec.lobe_sigma_min, spec.lobe_sigma_max);
  }
  return lobes;
}

BinaryMask render_lobes(const std::vector<Lobe>& lobes, const ShapeSpec& spec) {
  const Dims& n = spec.dims;
  std::vector<double> field(static_cast<std::size_t>(n.count()), 0.0);
  for (const Lobe& lobe : lobes) {
    std::size_t idx = 0;
    for (std::int64_t i = 0; i < n.d; ++i) {
      const double zi = (static_cast<double>(i) - lobe.center[0]) / lobe.sigma[0];
      for (std::int64_t j = 0; j < n.h; ++j) {
        const double zj = (static_cast<double>(j) - lobe.center[1]) / lobe.sigma[1];
        for (std::int64_t k = 0; k < n.w; ++k, ++idx) {
          const double zk = (static_cast<double>(k) - lobe.center[2]) / lobe.sigma[2];
          field[idx] += std::exp(-0.5 * (zi * zi + zj * zj + zk * zk));
        }
      }
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  BinaryMask out(n, 0);
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) return out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    out[i] = (field[i] - lo) / (hi - lo) >= spec.threshold ? 1 : 0;
  }
  return out;
}

BinaryMask gen_shape(Rng& rng, const ShapeSpec& spec) {
  spec.validate();
  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    BinaryMask m = render_lobes(draw_lobes(rng, spec), spec);
    if (count_foreground(m) > 0) return m;
  }
  throw DomainError("gen_shape: mask empty after " + std::to_string(kAttempts) +
                    " draws; shape spec is degenerate");
}

Volume3D gen_intensity(Rng& rng, const BinaryMask& gt, const IntensitySpec& spec) {
  spec.validate();
  std::vector<double> data(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double mean = gt[i] ? spec.fg_mean : spec.bg_mean;
    data[i] = mean + spec.noise_sd * rng.normal();
  }
  Volume3D v(gt.dims(), std::move(data), gt.spacing());
  if (spec.smooth_sigma > 0.0) v = gaussian_smooth(v, spec.smooth_sigma);
  return round_to_f32(v);
}

BinaryMask boundary_band(const BinaryMask& m) {
  BinaryMask surface(m.dims(), 0, m.spacing());
  for (const Voxel& p : extract_surface(m).points) surface(p.d, p.h, p.w) = 1;
  return dilate(surface, 1);
}

namespace {

struct Box {
  std::array<std::int64_t, 3> lo{};
  std::array<std::int64_t, 3> hi{};
};

Box bounding_box(const BinaryMask& m) {
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = m.dims()[a];
    b.hi[a] = -1;
  }
  const Dims& n = m.dims();
  for (std::int64_t i = 0; i < n.d; ++i)
    for (std::int64_t j = 0; j < n.h; ++j)
      for (std::int64_t k = 0; k < n.w; ++k)
        if (m(i, j, k)) {
          const std::int64_t c[3] = {i, j, k};
          for (int a = 0; a < 3; ++a) {
            b.lo[a] = std::min(b.lo[a], c[a]);
            b.hi[a] = std::max(b.hi[a], c[a]);
          }
        }
  return b;
}

bool ball_clear_of(const Box& box, const std::array<std::int64_t, 3>& c, int radius) {
  for (int a = 0; a < 3; ++a) {
    if (c[a] + radius < box.lo[a] || c[a] - radius > box.hi[a]) return true;
  }
  return false;
}

}  // namespace

BinaryMask corrupt_labels(Rng& rng, const BinaryMask& gt, const CorruptionSpec& spec) {
  spec.validate();
  if (count_foreground(gt) == 0) throw DomainError("corrupt_labels: ground truth is empty");

  // 1. Morphological bias. An erosion that wipes the mask out is skipped.
  const int radius = static_cast<int>(rng.uniform_int(spec.morph_min, spec.morph_max));
  BinaryMask weak = morph(gt, radius);
  if (count_foreground(weak) == 0) weak = gt;

  // 2. Boundary flips, visiting the band in raster order.
  if (spec.boundary_flip_rate > 0.0) {
    const BinaryMask band = boundary_band(weak);
    BinaryMask flipped = weak;
    for (std::size_t i = 0; i < band.size(); ++i) {
      if (band[i] && rng.bernoulli(spec.boundary_flip_rate)) flipped[i] = flipped[i] ? 0 : 1;
    }
    if (count_foreground(flipped) > 0) weak = std::move(flipped);
  }

  // 3. Spurious balls, placed away from the ground-truth bounding box when a
  //    clear spot turns up within a bounded number of draws.
  if (spec.outlier_blob_count > 0) {
    const Box box = bounding_box(gt);
    const std::vector<Voxel> ball = ball_offsets(spec.outlier_blob_radius);
    const Dims& n = gt.dims();
    constexpr int kPlacementDraws = 64;
    for (int b = 0; b < spec.outlier_blob_count; ++b) {
      std::array<std::int64_t, 3> c{};
      for (int attempt = 0; attempt < kPlacementDraws; ++attempt) {
        for (int a = 0; a < 3; ++a) c[a] = rng.uniform_int(0, n[a] - 1);
        if (ball_clear_of(box, c, spec.outlier_blob_radius)) break;
      }
      for (const Voxel& o : ball) {
        if (weak.in_bounds(c[0] + o.d, c[1] + o.h, c[2] + o.w)) weak(c[0] + o.d, c[1] + o.h, c[2] + o.w) = 1;
      }
    }
  }

  // 4. Drop a whole component, but never the last one.
  if (spec.drop_component_prob > 0.0 && rng.bernoulli(spec.drop_component_prob)) {
    const ComponentLabels comps = label_components(weak);
    if (comps.count >= 2) {
      const auto victim = static_cast<std::int32_t>(rng.uniform_int(1, comps.count));
      for (std::size_t i = 0; i < weak.size(); ++i) {
        if (comps.labels[i] == victim) weak[i] = 0;
      }
    }
  }
  return weak;
}

SyntheticSample gen_sample(const DatasetSpec& spec, std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, index));
  SyntheticSample s;
  s.gt = gen_shape(rng, spec.shape);
  s.intensity = gen_intensity(rng, s.gt, spec.intensity);
  s.weak = corrupt_labels(rng, s.gt, spec.corruption);
  return s;
}

std::vector<SyntheticSample> gen_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) out.push_back(gen_sample(spec, static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace tloss
