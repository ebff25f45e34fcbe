#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tloss/error.hpp"

namespace tloss {

/// Voxel counts along depth, height and width. Data is stored row-major with
/// w varying fastest.
struct Dims {
  std::int64_t d = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;

  constexpr std::int64_t count() const noexcept { return d * h * w; }
  constexpr std::int64_t operator[](int axis) const noexcept {
    return axis == 0 ? d : (axis == 1 ? h : w);
  }
  constexpr std::int64_t& operator[](int axis) noexcept {
    return axis == 0 ? d : (axis == 1 ? h : w);
  }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

/// Throws ShapeError unless every extent is >= 1 and the product is <= 2^31.
void validate_dims(const Dims& dims);

std::string to_string(const Dims& dims);

/// Integer voxel coordinate (d, h, w).
struct Voxel {
  std::int64_t d = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

/// Physical voxel size per axis. Units are arbitrary; distance metrics are
/// reported in the same units.
struct Spacing {
  double d = 1.0;
  double h = 1.0;
  double w = 1.0;

  constexpr double operator[](int axis) const noexcept {
    return axis == 0 ? d : (axis == 1 ? h : w);
  }
  constexpr double& operator[](int axis) noexcept {
    return axis == 0 ? d : (axis == 1 ? h : w);
  }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

struct IntensityTag {
  static constexpr const char* kName = "Volume3D";
  static bool valid(double v) noexcept { return std::isfinite(v); }
};

struct ProbabilityTag {
  static constexpr const char* kName = "ProbabilityMask";
  static bool valid(double v) noexcept { return v >= 0.0 && v <= 1.0; }
};

struct MaskTag {
  static constexpr const char* kName = "BinaryMask";
  static bool valid(std::uint8_t v) noexcept { return v <= 1; }
};

/// Dense 3D field. The tag fixes the value invariant checked on construction;
/// element-wise mutation through operator() is unchecked.
template <typename T, typename Tag>
class Field {
 public:
  using value_type = T;
  using tag_type = Tag;

  Field() : data_(1, T{}) {}

  explicit Field(Dims dims, T fill = T{}, Spacing spacing = {})
      : dims_(dims), spacing_(spacing) {
    validate_dims(dims_);
    check_value(fill);
    data_.assign(static_cast<std::size_t>(dims_.count()), fill);
  }

  Field(Dims dims, std::vector<T> data, Spacing spacing = {})
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_dims(dims_);
    if (static_cast<std::int64_t>(data_.size()) != dims_.count()) {
      throw ShapeError(std::string(Tag::kName) + ": data length " +
                       std::to_string(data_.size()) + " does not match dims " +
                       to_string(dims_));
    }
    for (const T& v : data_) check_value(v);
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(const Spacing& s) noexcept { spacing_ = s; }

  std::size_t size() const noexcept { return data_.size(); }

  std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return (i * dims_.h + j) * dims_.w + k;
  }
  bool in_bounds(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_.d && j < dims_.h && k < dims_.w;
  }

  T& operator()(std::int64_t i, std::int64_t j, std::int64_t k) noexcept {
    return data_[static_cast<std::size_t>(index(i, j, k))];
  }
  const T& operator()(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return data_[static_cast<std::size_t>(index(i, j, k))];
  }
  T& operator[](std::size_t idx) noexcept { return data_[idx]; }
  const T& operator[](std::size_t idx) const noexcept { return data_[idx]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  static void check_value(const T& v) {
    if (!Tag::valid(v)) {
      throw DomainError(std::string(Tag::kName) + ": value out of range");
    }
  }

  Dims dims_;
  Spacing spacing_;
  std::vector<T> data_;
};

using Volume3D = Field<double, IntensityTag>;
using ProbabilityMask = Field<double, ProbabilityTag>;
using BinaryMask = Field<std::uint8_t, MaskTag>;

/// Shape check shared by every binary operation on fields.
template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError(std::string(what) + ": dims " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
  }
}

/// Voxel is foreground iff y >= tau.
BinaryMask binarize(const ProbabilityMask& y, double tau = 0.5);

std::int64_t count_foreground(const BinaryMask& m);

/// Reverses index order along one axis (0 = d, 1 = h, 2 = w).
template <typename T, typename Tag>
Field<T, Tag> flip_axis(const Field<T, Tag>& v, int axis) {
  if (axis < 0 || axis > 2) throw UsageError("flip_axis: axis must be 0, 1 or 2");
  Field<T, Tag> out = v;
  const Dims& n = v.dims();
  for (std::int64_t i = 0; i < n.d; ++i) {
    for (std::int64_t j = 0; j < n.h; ++j) {
      for (std::int64_t k = 0; k < n.w; ++k) {
        std::int64_t si = axis == 0 ? n.d - 1 - i : i;
        std::int64_t sj = axis == 1 ? n.h - 1 - j : j;
        std::int64_t sk = axis == 2 ? n.w - 1 - k : k;
        out(i, j, k) = v(si, sj, sk);
      }
    }
  }
  return out;
}

/// Transposes two axes in dims, spacing and data.
template <typename T, typename Tag>
Field<T, Tag> swap_axes(const Field<T, Tag>& v, int ax1, int ax2) {
  if (ax1 < 0 || ax1 > 2 || ax2 < 0 || ax2 > 2 || ax1 == ax2) {
    throw UsageError("swap_axes: need two distinct axes in {0,1,2}");
  }
  Dims nd = v.dims();
  std::swap(nd[ax1], nd[ax2]);
  Spacing ns = v.spacing();
  std::swap(ns[ax1], ns[ax2]);
  Field<T, Tag> out(nd, T{}, ns);
  for (std::int64_t i = 0; i < nd.d; ++i) {
    for (std::int64_t j = 0; j < nd.h; ++j) {
      for (std::int64_t k = 0; k < nd.w; ++k) {
        std::int64_t src[3] = {i, j, k};
        std::swap(src[ax1], src[ax2]);
        out(i, j, k) = v(src[0], src[1], src[2]);
      }
    }
  }
  return out;
}

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma), index 0 = offset -radius.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with clamp-to-border replication.
Volume3D gaussian_smooth(const Volume3D& v, double sigma);

}  // namespace tloss
