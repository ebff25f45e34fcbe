#include "tloss/morphology.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace tloss {

std::vector<Voxel> ball_offsets(int radius) {
  if (radius < 0) throw DomainError("ball_offsets: radius must be >= 0");
  std::vector<Voxel> out;
  const std::int64_t r = radius;
  for (std::int64_t a = -r; a <= r; ++a) {
    for (std::int64_t b = -r; b <= r; ++b) {
      for (std::int64_t c = -r; c <= r; ++c) {
        if (a * a + b * b + c * c <= r * r) out.push_back({a, b, c});
      }
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& m, int radius) {
  if (radius == 0) return m;
  const std::vector<Voxel> ball = ball_offsets(radius);
  BinaryMask out(m.dims(), 0, m.spacing());
  const Dims& n = m.dims();
  for (std::int64_t i = 0; i < n.d; ++i) {
    for (std::int64_t j = 0; j < n.h; ++j) {
      for (std::int64_t k = 0; k < n.w; ++k) {
        if (!m(i, j, k)) continue;
        for (const Voxel& o : ball) {
          if (out.in_bounds(i + o.d, j + o.h, k + o.w)) out(i + o.d, j + o.h, k + o.w) = 1;
        }
      }
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& m, int radius) {
  if (radius == 0) return m;
  BinaryMask complement(m.dims(), 0, m.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) complement[i] = m[i] ? 0 : 1;
  const BinaryMask grown = dilate(complement, radius);
  BinaryMask out(m.dims(), 0, m.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] && !grown[i]) ? 1 : 0;
  return out;
}

BinaryMask morph(const BinaryMask& m, int radius) {
  const Dims& n = m.dims();
  const std::int64_t limit = std::min({n.d, n.h, n.w}) / 4;
  if (std::abs(radius) > limit) {
    throw DomainError("morph: |radius| " + std::to_string(std::abs(radius)) +
                      " exceeds min extent / 4 = " + std::to_string(limit));
  }
  if (radius > 0) return dilate(m, radius);
  if (radius < 0) return erode(m, -radius);
  return m;
}

ComponentLabels label_components(const BinaryMask& m) {
  ComponentLabels out;
  out.labels.assign(m.size(), 0);
  const Dims& n = m.dims();
  std::vector<std::int64_t> stack;
  for (std::size_t seed = 0; seed < m.size(); ++seed) {
    if (!m[seed] || out.labels[seed] != 0) continue;
    const std::int32_t label = ++out.count;
    out.labels[seed] = label;
    stack.push_back(static_cast<std::int64_t>(seed));
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      const std::int64_t i = idx / (n.h * n.w);
      const std::int64_t j = (idx / n.w) % n.h;
      const std::int64_t k = idx % n.w;
      const std::int64_t nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                     {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
      for (const auto& q : nb) {
        if (!m.in_bounds(q[0], q[1], q[2])) continue;
        const auto qi = static_cast<std::size_t>(m.index(q[0], q[1], q[2]));
        if (m[qi] && out.labels[qi] == 0) {
          out.labels[qi] = label;
          stack.push_back(static_cast<std::int64_t>(qi));
        }
      }
    }
  }
  return out;
}

}  // namespace tloss
