#include "tloss/volume.hpp"

#include <algorithm>

namespace tloss {

void validate_dims(const Dims& dims) {
  if (dims.d < 1 || dims.h < 1 || dims.w < 1) {
    throw ShapeError("dims must be >= 1 along every axis, got " + to_string(dims));
  }
  constexpr std::int64_t kMaxVoxels = std::int64_t{1} << 31;
  // Check the product stepwise so huge extents cannot overflow int64 first.
  if (dims.d > kMaxVoxels || dims.h > kMaxVoxels / dims.d ||
      dims.w > kMaxVoxels / (dims.d * dims.h)) {
    throw ShapeError("voxel count exceeds 2^31 for dims " + to_string(dims));
  }
}

std::string to_string(const Dims& dims) {
  return std::to_string(dims.d) + "x" + std::to_string(dims.h) + "x" +
         std::to_string(dims.w);
}

BinaryMask binarize(const ProbabilityMask& y, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("binarize: tau must lie in (0,1)");
  BinaryMask out(y.dims(), 0, y.spacing());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] >= tau ? 1 : 0;
  return out;
}

std::int64_t count_foreground(const BinaryMask& m) {
  return std::count(m.values().begin(), m.values().end(), std::uint8_t{1});
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("gaussian_kernel: sigma must be positive");
  }
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::int64_t o = -radius; o <= radius; ++o) {
    double t = std::exp(-0.5 * static_cast<double>(o * o) / (sigma * sigma));
    taps[static_cast<std::size_t>(o + radius)] = t;
    sum += t;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

// One pass along `axis`; out-of-range taps read the nearest border voxel.
std::vector<double> convolve_axis(const std::vector<double>& in, const Dims& n, int axis,
                                  const std::vector<double>& taps) {
  const auto radius = static_cast<std::int64_t>(taps.size() / 2);
  const std::int64_t len = n[axis];
  const std::int64_t stride = axis == 0 ? n.h * n.w : (axis == 1 ? n.w : 1);
  std::vector<double> out(in.size());
  std::vector<double> line(static_cast<std::size_t>(len));

  const std::int64_t outer_a = axis == 0 ? n.h : n.d;
  const std::int64_t outer_b = axis == 2 ? n.h : n.w;
  for (std::int64_t a = 0; a < outer_a; ++a) {
    for (std::int64_t b = 0; b < outer_b; ++b) {
      std::int64_t base = 0;
      switch (axis) {
        case 0: base = a * n.w + b; break;
        case 1: base = a * n.h * n.w + b; break;
        default: base = (a * n.h + b) * n.w; break;
      }
      for (std::int64_t t = 0; t < len; ++t) line[t] = in[base + t * stride];
      for (std::int64_t t = 0; t < len; ++t) {
        double acc = 0.0;
        for (std::int64_t o = -radius; o <= radius; ++o) {
          std::int64_t s = std::clamp<std::int64_t>(t + o, 0, len - 1);
          acc += taps[o + radius] * line[s];
        }
        out[base + t * stride] = acc;
      }
    }
  }
  return out;
}

}  // namespace

Volume3D gaussian_smooth(const Volume3D& v, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  std::vector<double> buf(v.values().begin(), v.values().end());
  for (int axis = 0; axis < 3; ++axis) buf = convolve_axis(buf, v.dims(), axis, taps);
  return Volume3D(v.dims(), std::move(buf), v.spacing());
}

}  // namespace tloss
