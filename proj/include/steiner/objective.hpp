#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/point.hpp"
#include "steiner/potentials.hpp"

namespace steiner {

/// U(x) = sum_i dis_i(x - a_i) over an anchor set. Immutable once built.
class Objective {
 public:
  Objective(AnchorSet anchors, PotentialSpec potential)
      : anchors_(std::move(anchors)), potential_(std::move(potential)) {
    potential_.validate(anchors_.size());
    if (!potential_.epsilon) potential_.epsilon = default_epsilon(anchors_);
  }

  /// 1e-9 of the anchor bounding-box diagonal, or of the anchor magnitude
  /// when all anchors coincide.
  static double default_epsilon(const AnchorSet& anchors) {
    double scale = anchors.bounding_box_diagonal();
    if (scale == 0.0) scale = std::max(1.0, detail::norm(anchors.row(0)));
    return 1e-9 * scale;
  }

  const AnchorSet& anchors() const noexcept { return anchors_; }
  const PotentialSpec& potential() const noexcept { return potential_; }
  std::size_t dimension() const noexcept { return anchors_.dimension(); }
  double epsilon() const noexcept { return potential_.eps(); }

  void check_dimension(std::size_t d) const {
    if (d != dimension()) {
      throw InputError("point has dimension " + std::to_string(d) + ", objective expects " +
                       std::to_string(dimension()));
    }
  }

  /// U(x), accumulated with compensated summation.
  double value(std::span<const double> x) const {
    check_dimension(x.size());
    const std::size_t d = dimension();
    std::vector<double> v(d);
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const auto a = anchors_.row(i);
      for (std::size_t k = 0; k < d; ++k) v[k] = x[k] - a[k];
      const double term = potential_value(potential_, v, i);
      const double t = sum + term;
      carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
    }
    return sum + carry;
  }

  /// U(y) - U(x) summed term by term without cancellation.
  double value_change(std::span<const double> x, std::span<const double> y) const {
    check_dimension(x.size());
    check_dimension(y.size());
    const std::size_t d = dimension();
    std::vector<double> vx(d), vy(d), s(d);
    for (std::size_t k = 0; k < d; ++k) s[k] = y[k] - x[k];
    double sum = 0.0;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const auto a = anchors_.row(i);
      for (std::size_t k = 0; k < d; ++k) {
        vx[k] = x[k] - a[k];
        vy[k] = y[k] - a[k];
      }
      sum += potential_change(potential_, vx, vy, s, i);
    }
    return sum;
  }

  /// grad U(x) written to `out`. Returns false if any term was evaluated at
  /// a non-differentiable point (zero subgradient used for that term).
  bool gradient(std::span<const double> x, std::span<double> out) const {
    check_dimension(x.size());
    const std::size_t d = dimension();
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> v(d);
    bool smooth = true;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const auto a = anchors_.row(i);
      for (std::size_t k = 0; k < d; ++k) v[k] = x[k] - a[k];
      smooth = accumulate_potential_gradient(potential_, v, i, out) && smooth;
    }
    return smooth;
  }

  /// Sum over anchors of the per-term gradient bound; the Lipschitz
  /// constant of U for the euclidean family.
  double gradient_scale(double extent) const {
    double s = 0.0;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      s += gradient_bound(potential_, dimension(), i, extent);
    }
    return s;
  }

 private:
  AnchorSet anchors_;
  PotentialSpec potential_;
};

inline double objective_value(const Objective& obj, const Point& point) {
  return obj.value(point.coords());
}

/// grad U at `point`. `nonsmooth`, when given, is set if a subgradient was used.
inline Point gradient(const Objective& obj, const Point& point, bool* nonsmooth = nullptr) {
  std::vector<double> g(point.dimension(), 0.0);
  obj.check_dimension(point.dimension());
  if (!obj.gradient(point.coords(), g) && nonsmooth) *nonsmooth = true;
  return Point(std::move(g));
}

/// Central differences (U(x + h e_k) - U(x - h e_k)) / 2h per coordinate.
inline Point finite_difference_gradient(const Objective& obj, const Point& point, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("finite difference step must be > 0");
  obj.check_dimension(point.dimension());
  std::vector<double> x = point.vector();
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    x[k] = xk + h;
    const double up = obj.value(x);
    x[k] = xk - h;
    const double down = obj.value(x);
    x[k] = xk;
    g[k] = (up - down) / (2.0 * h);
  }
  return Point(std::move(g));
}

}  // namespace steiner
