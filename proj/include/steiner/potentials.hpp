#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/point.hpp"

namespace steiner {

enum class PotentialKind { euclidean, p_norm, squared, weighted_euclidean, gaussian_well };

inline std::string_view to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::euclidean: return "euclidean";
    case PotentialKind::p_norm: return "p_norm";
    case PotentialKind::squared: return "squared";
    case PotentialKind::weighted_euclidean: return "weighted_euclidean";
    case PotentialKind::gaussian_well: return "gaussian_well";
  }
  return "unknown";
}

inline PotentialKind parse_potential_kind(std::string_view name) {
  for (auto k : {PotentialKind::euclidean, PotentialKind::p_norm, PotentialKind::squared,
                 PotentialKind::weighted_euclidean, PotentialKind::gaussian_well}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("potential.kind: unknown kind '" + std::string(name) + "'");
}

/// Declarative choice of the per-anchor potential dis(v).
///
/// An unset epsilon is resolved by Objective to 1e-9 times the anchor
/// bounding-box diagonal; standalone evaluation treats it as 0.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::euclidean;
  double p = 2.0;
  std::optional<double> epsilon;
  double sigma = 1.0;
  std::vector<double> weights;

  static PotentialSpec euclidean(std::optional<double> eps = std::nullopt) {
    return {PotentialKind::euclidean, 2.0, eps, 1.0, {}};
  }
  static PotentialSpec p_norm(double p, std::optional<double> eps = std::nullopt) {
    return {PotentialKind::p_norm, p, eps, 1.0, {}};
  }
  static PotentialSpec squared() { return {PotentialKind::squared, 2.0, std::nullopt, 1.0, {}}; }
  static PotentialSpec weighted_euclidean(std::vector<double> w,
                                          std::optional<double> eps = std::nullopt) {
    return {PotentialKind::weighted_euclidean, 2.0, eps, 1.0, std::move(w)};
  }
  static PotentialSpec gaussian_well(double sigma) {
    return {PotentialKind::gaussian_well, 2.0, std::nullopt, sigma, {}};
  }

  bool euclidean_family() const {
    return kind == PotentialKind::euclidean || kind == PotentialKind::p_norm ||
           kind == PotentialKind::weighted_euclidean;
  }

  double eps() const { return epsilon.value_or(0.0); }

  friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;

  double weight(std::size_t anchor_index) const {
    return kind == PotentialKind::weighted_euclidean ? weights.at(anchor_index) : 1.0;
  }

  /// Throws ConfigError on invalid parameters for an anchor set of size n.
  void validate(std::size_t n) const {
    if (epsilon && !(std::isfinite(*epsilon) && *epsilon >= 0.0)) {
      throw ConfigError("potential.epsilon: must be finite and >= 0");
    }
    switch (kind) {
      case PotentialKind::p_norm:
        if (!(std::isfinite(p) && p >= 1.0)) throw ConfigError("potential.p: must be >= 1");
        break;
      case PotentialKind::gaussian_well:
        if (!(std::isfinite(sigma) && sigma > 0.0)) {
          throw ConfigError("potential.sigma: must be > 0");
        }
        break;
      case PotentialKind::weighted_euclidean:
        if (weights.size() != n) {
          throw ConfigError("potential.weights: expected " + std::to_string(n) +
                            " entries, got " + std::to_string(weights.size()));
        }
        for (std::size_t i = 0; i < weights.size(); ++i) {
          if (!(std::isfinite(weights[i]) && weights[i] > 0.0)) {
            throw ConfigError("potential.weights[" + std::to_string(i) + "]: must be > 0");
          }
        }
        break;
      default:
        break;
    }
    if (kind != PotentialKind::weighted_euclidean && !weights.empty()) {
      throw ConfigError("potential.weights: only valid for weighted_euclidean");
    }
  }
};

namespace detail {

// sqrt(r2 + e^2) - e without cancellation for r2 << e^2.
inline double smoothed_norm(double r2, double eps) {
  if (eps == 0.0) return std::sqrt(r2);
  return r2 / (std::sqrt(r2 + eps * eps) + eps);
}

struct PNormParts {
  double scale;  // max_k u_k
  double norm;   // (sum_k u_k^p)^(1/p)
};

inline PNormParts p_norm_parts(std::span<const double> v, double p, double eps) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::hypot(x, eps));
  if (m == 0.0) return {0.0, 0.0};
  double s = 0.0;
  for (double x : v) s += std::pow(std::hypot(x, eps) / m, p);
  return {m, m * std::pow(s, 1.0 / p)};
}

}  // namespace detail

/// dis(v) for one anchor term. `anchor_index` only matters for weighted kinds.
inline double potential_value(const PotentialSpec& spec, std::span<const double> v,
                              std::size_t anchor_index = 0) {
  const double eps = spec.eps();
  switch (spec.kind) {
    case PotentialKind::euclidean:
      return detail::smoothed_norm(detail::dot(v, v), eps);
    case PotentialKind::weighted_euclidean:
      return spec.weight(anchor_index) * detail::smoothed_norm(detail::dot(v, v), eps);
    case PotentialKind::squared:
      return detail::dot(v, v);
    case PotentialKind::gaussian_well:
      return -std::expm1(-detail::dot(v, v) / (spec.sigma * spec.sigma));
    case PotentialKind::p_norm: {
      const double shift = std::pow(static_cast<double>(v.size()), 1.0 / spec.p) * eps;
      return detail::p_norm_parts(v, spec.p, eps).norm - shift;
    }
  }
  return 0.0;
}

inline double potential_value(const PotentialSpec& spec, const Point& v,
                              std::size_t anchor_index = 0) {
  return potential_value(spec, v.coords(), anchor_index);
}

/// Accumulates the analytic gradient of dis(v) into `out` (out += grad).
/// Returns false when the gradient does not exist at v (unsmoothed
/// euclidean family at v = 0); the zero subgradient is used in that case.
inline bool accumulate_potential_gradient(const PotentialSpec& spec, std::span<const double> v,
                                          std::size_t anchor_index, std::span<double> out) {
  const double eps = spec.eps();
  switch (spec.kind) {
    case PotentialKind::euclidean:
    case PotentialKind::weighted_euclidean: {
      const double s = std::sqrt(detail::dot(v, v) + eps * eps);
      if (s == 0.0) return false;
      const double f = spec.weight(anchor_index) / s;
      for (std::size_t k = 0; k < v.size(); ++k) out[k] += f * v[k];
      return true;
    }
    case PotentialKind::squared:
      for (std::size_t k = 0; k < v.size(); ++k) out[k] += 2.0 * v[k];
      return true;
    case PotentialKind::gaussian_well: {
      const double s2 = spec.sigma * spec.sigma;
      const double f = 2.0 / s2 * std::exp(-detail::dot(v, v) / s2);
      for (std::size_t k = 0; k < v.size(); ++k) out[k] += f * v[k];
      return true;
    }
    case PotentialKind::p_norm: {
      const auto parts = detail::p_norm_parts(v, spec.p, eps);
      if (parts.norm == 0.0) return false;
      bool smooth = true;
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double u = std::hypot(v[k], eps);
        if (u == 0.0) {
          // p = 1 has a kink in every coordinate hyperplane when unsmoothed.
          if (spec.p == 1.0) smooth = false;
          continue;
        }
        out[k] += std::pow(u / parts.norm, spec.p - 1.0) * (v[k] / u);
      }
      return smooth;
    }
  }
  return true;
}

/// Analytic gradient of dis(v). When `nonsmooth` is given it is set to true
/// if the gradient is undefined at v (the zero subgradient is returned).
inline Point potential_gradient(const PotentialSpec& spec, const Point& v,
                                std::size_t anchor_index = 0, bool* nonsmooth = nullptr) {
  std::vector<double> g(v.dimension(), 0.0);
  const bool smooth = accumulate_potential_gradient(spec, v.coords(), anchor_index, g);
  if (!smooth && nonsmooth) *nonsmooth = true;
  return Point(std::move(g));
}

/// dis(v + s) - dis(v) evaluated without cancellation, where `v_new` is the
/// already-rounded v + s. Accurate to a few ulps of the difference itself,
/// which is what a line search needs once U(x) has converged to many digits.
inline double potential_change(const PotentialSpec& spec, std::span<const double> v_old,
                               std::span<const double> v_new, std::span<const double> s,
                               std::size_t anchor_index = 0) {
  // r_new^2 - r_old^2 = s . (v_new + v_old)
  auto sq_change = [&] {
    double c = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) c += s[k] * (v_new[k] + v_old[k]);
    return c;
  };
  const double eps = spec.eps();
  switch (spec.kind) {
    case PotentialKind::euclidean:
    case PotentialKind::weighted_euclidean: {
      const double a = std::sqrt(detail::dot(v_old, v_old) + eps * eps);
      const double b = std::sqrt(detail::dot(v_new, v_new) + eps * eps);
      if (a + b == 0.0) return 0.0;
      return spec.weight(anchor_index) * sq_change() / (a + b);
    }
    case PotentialKind::squared:
      return sq_change();
    case PotentialKind::gaussian_well: {
      const double s2 = spec.sigma * spec.sigma;
      return -std::exp(-detail::dot(v_old, v_old) / s2) * std::expm1(-sq_change() / s2);
    }
    case PotentialKind::p_norm: {
      double m = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        m = std::max({m, std::hypot(v_old[k], eps), std::hypot(v_new[k], eps)});
      }
      if (m == 0.0) return 0.0;
      const double half_p = 0.5 * spec.p;
      double sum_old = 0.0;
      double sum_change = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        const double u2 = (v_old[k] * v_old[k] + eps * eps) / (m * m);
        const double du2 = s[k] * (v_new[k] + v_old[k]) / (m * m);
        const double base = std::pow(u2, half_p);
        sum_old += base;
        sum_change += u2 > 0.0 ? base * std::expm1(half_p * std::log1p(du2 / u2))
                               : std::pow(du2, half_p);
      }
      if (sum_old == 0.0) return m * std::pow(sum_change, 1.0 / spec.p);
      return m * std::pow(sum_old, 1.0 / spec.p) *
             std::expm1(std::log1p(sum_change / sum_old) / spec.p);
    }
  }
  return 0.0;
}

/// Upper bound on |grad dis| for one anchor term over a region of diameter
/// `extent` (only the squared kind depends on it).
inline double gradient_bound(const PotentialSpec& spec, std::size_t dimension,
                             std::size_t anchor_index, double extent) {
  switch (spec.kind) {
    case PotentialKind::euclidean: return 1.0;
    case PotentialKind::weighted_euclidean: return spec.weight(anchor_index);
    case PotentialKind::squared: return 2.0 * extent;
    case PotentialKind::gaussian_well: return std::sqrt(2.0) * std::exp(-0.5) / spec.sigma;
    case PotentialKind::p_norm:
      // Largest euclidean norm of a vector with unit dual (q-)norm.
      return std::max(1.0, std::pow(static_cast<double>(dimension), 1.0 / spec.p - 0.5));
  }
  return 1.0;
}

}  // namespace steiner
