#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steiner/errors.hpp"

namespace steiner {

namespace detail {

inline void require_finite(std::span<const double> xs, const char* what) {
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(xs[k])) {
      throw InputError(std::string(what) + ": coordinate " + std::to_string(k) +
                       " is not finite");
    }
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// A point (or vector) in D-dimensional real space. Coordinates are always
/// finite; D >= 1.
class Point {
 public:
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw InputError("point: dimension must be at least 1");
    detail::require_finite(coords_, "point");
  }
  Point(std::initializer_list<double> coords) : Point(std::vector<double>(coords)) {}

  static Point zeros(std::size_t dimension) {
    return Point(std::vector<double>(dimension, 0.0));
  }

  std::size_t dimension() const noexcept { return coords_.size(); }
  double operator[](std::size_t k) const { return coords_[k]; }
  std::span<const double> coords() const noexcept { return coords_; }
  const std::vector<double>& vector() const noexcept { return coords_; }

  double norm() const { return detail::norm(coords_); }

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    return std::lexicographical_compare_three_way(a.coords_.begin(), a.coords_.end(),
                                                  b.coords_.begin(), b.coords_.end());
  }

 private:
  std::vector<double> coords_;
};

inline double distance(const Point& a, const Point& b) {
  if (a.dimension() != b.dimension()) throw InputError("distance: dimension mismatch");
  return detail::distance(a.coords(), b.coords());
}

/// n >= 1 anchor points of a common dimension, stored row-major.
class AnchorSet {
 public:
  explicit AnchorSet(const std::vector<Point>& anchors) {
    if (anchors.empty()) throw InputError("anchor set: at least one anchor is required");
    dimension_ = anchors.front().dimension();
    data_.reserve(anchors.size() * dimension_);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      if (anchors[i].dimension() != dimension_) {
        throw InputError("anchor set: anchor " + std::to_string(i) + " has dimension " +
                         std::to_string(anchors[i].dimension()) + ", expected " +
                         std::to_string(dimension_));
      }
      data_.insert(data_.end(), anchors[i].coords().begin(), anchors[i].coords().end());
    }
    size_ = anchors.size();
  }
  AnchorSet(std::initializer_list<Point> anchors) : AnchorSet(std::vector<Point>(anchors)) {}

  std::size_t size() const noexcept { return size_; }
  std::size_t dimension() const noexcept { return dimension_; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * dimension_, dimension_);
  }
  Point operator[](std::size_t i) const {
    auto r = row(i);
    return Point(std::vector<double>(r.begin(), r.end()));
  }
  std::vector<Point> points() const {
    std::vector<Point> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) out.push_back((*this)[i]);
    return out;
  }

  /// Per-axis [min, max] of the anchors.
  std::vector<std::pair<double, double>> bounds() const {
    std::vector<std::pair<double, double>> b(dimension_);
    for (std::size_t k = 0; k < dimension_; ++k) b[k] = {data_[k], data_[k]};
    for (std::size_t i = 1; i < size_; ++i) {
      for (std::size_t k = 0; k < dimension_; ++k) {
        const double v = data_[i * dimension_ + k];
        b[k].first = std::min(b[k].first, v);
        b[k].second = std::max(b[k].second, v);
      }
    }
    return b;
  }

  double bounding_box_diagonal() const {
    double s = 0.0;
    for (const auto& [lo, hi] : bounds()) s += (hi - lo) * (hi - lo);
    return std::sqrt(s);
  }

  /// Union of two anchor sets of the same dimension.
  friend AnchorSet merge(const AnchorSet& a, const AnchorSet& b) {
    auto pts = a.points();
    auto more = b.points();
    pts.insert(pts.end(), more.begin(), more.end());
    return AnchorSet(pts);
  }

 private:
  std::vector<double> data_;
  std::size_t size_ = 0;
  std::size_t dimension_ = 0;
};

}  // namespace steiner
