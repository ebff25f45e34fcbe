#pragma once

#include <cstdint>
#include <vector>

#include "tloss/volume.hpp"

namespace tloss {

/// Offsets o with |o| <= radius (discrete Euclidean ball), lexicographic order.
std::vector<Voxel> ball_offsets(int radius);

BinaryMask dilate(const BinaryMask& m, int radius);

/// Out-of-volume voxels do not erode the mask (erosion is the dual of
/// dilation restricted to the volume).
BinaryMask erode(const BinaryMask& m, int radius);

/// Positive radius dilates, negative erodes, zero is the identity.
/// Requires |radius| <= min extent / 4.
BinaryMask morph(const BinaryMask& m, int radius);

/// 6-connected component labels: 0 for background, 1..count in raster order
/// of each component's first voxel.
struct ComponentLabels {
  std::vector<std::int32_t> labels;
  std::int32_t count = 0;
};

ComponentLabels label_components(const BinaryMask& m);

}  // namespace tloss
