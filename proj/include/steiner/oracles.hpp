#pragma once

// Reference solvers used to validate the flow method. They share nothing
// with the descent code beyond Objective evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string_view>
#include <thread>
#include <vector>

#include "steiner/critical_set.hpp"
#include "steiner/errors.hpp"
#include "steiner/objective.hpp"
#include "steiner/point.hpp"

namespace steiner {

enum class OracleMethod { weiszfeld, centroid, grid };

inline std::string_view to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::weiszfeld: return "weiszfeld";
    case OracleMethod::centroid: return "centroid";
    case OracleMethod::grid: return "grid";
  }
  return "unknown";
}

struct OracleReport {
  Point location;
  double value;
  std::uint64_t iterations = 0;     // weiszfeld
  std::uint64_t cells_scanned = 0;  // grid
  OracleMethod method;
  bool converged = true;
  std::vector<double> value_history;  // weiszfeld: objective after each iterate
};

/// Weighted geometric median by the Weiszfeld iteration started at the
/// weighted centroid, with the Vardi-Zhang correction at anchors.
///
/// An anchor is returned directly when it satisfies the vertex optimality
/// condition |sum_{j != i} w_j (a_i - a_j) / |a_i - a_j|| <= w_i; this is
/// checked up front (n <= 4096) and whenever an iterate comes within `tol`
/// of an anchor. The report's value is the unsmoothed sum of weighted
/// distances at the returned location.
inline OracleReport weiszfeld(const AnchorSet& anchors, const std::vector<double>& weights,
                              double tol, std::uint64_t max_iter) {
  const std::size_t n = anchors.size();
  const std::size_t d = anchors.dimension();
  if (!(tol > 0.0)) throw ConfigError("weiszfeld: tol must be > 0");
  std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
  if (w.size() != n) throw ConfigError("weiszfeld: weights must have one entry per anchor");
  for (double wi : w) {
    if (!(wi > 0.0) || !std::isfinite(wi)) throw ConfigError("weiszfeld: weights must be > 0");
  }
  const Objective sum_of_distances(
      anchors, PotentialSpec::weighted_euclidean(w, 0.0));

  auto report = [&](std::vector<double> x, std::uint64_t iters, bool ok,
                    std::vector<double> history) {
    Point loc(std::move(x));
    const double value = objective_value(sum_of_distances, loc);
    return OracleReport{loc, value, iters, 0, OracleMethod::weiszfeld, ok, std::move(history)};
  };

  // Resultant of the other anchors' unit pulls at anchor i; optimal iff |R| <= w_i.
  auto vertex_resultant = [&](std::size_t i, std::vector<double>& r) {
    std::fill(r.begin(), r.end(), 0.0);
    const auto ai = anchors.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto aj = anchors.row(j);
      const double dist = detail::distance(ai, aj);
      if (dist == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) r[k] += w[j] * (aj[k] - ai[k]) / dist;
    }
    return detail::norm(r);
  };
  // Weight of all anchors coinciding with anchor i.
  auto coincident_weight = [&](std::span<const double> x) {
    double eta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (detail::distance(x, anchors.row(j)) == 0.0) eta += w[j];
    }
    return eta;
  };

  std::vector<double> r(d);
  if (n <= 4096) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ai = anchors.row(i);
      if (vertex_resultant(i, r) <= coincident_weight(ai)) {
        return report(std::vector<double>(ai.begin(), ai.end()), 0, true, {});
      }
    }
  }

  std::vector<double> x(d, 0.0);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = anchors.row(i);
    for (std::size_t k = 0; k < d; ++k) x[k] += w[i] * a[k] / wsum;
  }

  std::vector<double> history;
  std::vector<double> num(d), next(d);
  for (std::uint64_t it = 1; it <= max_iter; ++it) {
    // Snap to an anchor the iterate has reached.
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = anchors.row(i);
      if (detail::distance(x, a) <= tol) {
        x.assign(a.begin(), a.end());
        break;
      }
    }
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(r.begin(), r.end(), 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = anchors.row(i);
      const double dist = detail::distance(x, a);
      if (dist == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        num[k] += w[i] * a[k] / dist;
        r[k] += w[i] * (a[k] - x[k]) / dist;
      }
      den += w[i] / dist;
    }
    const double eta = coincident_weight(x);
    const double pull = detail::norm(r);
    if (den == 0.0 || pull <= eta) {
      history.push_back(objective_value(sum_of_distances, Point(x)));
      return report(x, it, true, std::move(history));
    }
    const double keep = std::min(1.0, eta / pull);
    for (std::size_t k = 0; k < d; ++k) next[k] = (1.0 - keep) * num[k] / den + keep * x[k];
    const double step = detail::distance(x, next);
    x.swap(next);
    history.push_back(objective_value(sum_of_distances, Point(x)));
    if (step <= tol) return report(x, it, true, std::move(history));
  }
  return report(x, max_iter, false, std::move(history));
}

inline OracleReport weiszfeld(const AnchorSet& anchors, double tol = 1e-12,
                              std::uint64_t max_iter = 1'000'000) {
  return weiszfeld(anchors, {}, tol, max_iter);
}

/// Closed-form minimizer of the squared potential. `obj`, when given, is
/// used for the report's value; otherwise the squared objective is.
inline OracleReport centroid(const AnchorSet& anchors, const Objective* obj = nullptr) {
  const std::size_t d = anchors.dimension();
  std::vector<double> c(d, 0.0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto a = anchors.row(i);
    for (std::size_t k = 0; k < d; ++k) c[k] += a[k];
  }
  for (auto& v : c) v /= static_cast<double>(anchors.size());
  Point loc(std::move(c));
  const double value = obj ? objective_value(*obj, loc)
                           : objective_value(Objective(anchors, PotentialSpec::squared()), loc);
  return OracleReport{loc, value, 0, 0, OracleMethod::centroid, true, {}};
}

inline constexpr double kMaxGridCells = 1e8;

/// Lattice points lo + j * spacing (j = 0, 1, ...) not exceeding hi on each axis.
inline std::vector<std::size_t> grid_shape(const Box& box, double spacing) {
  box.validate();
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ConfigError("grid: spacing must be > 0");
  }
  std::vector<std::size_t> shape;
  double cells = 1.0;
  for (const auto& [lo, hi] : box.axes) {
    const double steps = std::floor((hi - lo) / spacing * (1.0 + 1e-12));
    cells *= steps + 1.0;
    if (cells > kMaxGridCells) {
      throw ConfigError("grid: lattice exceeds 1e8 points; increase spacing");
    }
    shape.push_back(static_cast<std::size_t>(steps) + 1);
  }
  return shape;
}

/// Brute-force minimum over the lattice; first found in lexicographic scan
/// order wins ties, i.e. the lexicographically smallest point.
inline OracleReport grid_search(const Objective& obj, const Box& box, double spacing,
                                unsigned threads = 1) {
  obj.check_dimension(box.dimension());
  const auto shape = grid_shape(box, spacing);
  const std::size_t d = shape.size();

  struct Best {
    double value = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    std::uint64_t cells = 0;
  };
  // Scans slabs j0 = begin, begin + stride, ... along the first axis.
  auto scan = [&](std::size_t begin, std::size_t stride) {
    Best best;
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    for (std::size_t j0 = begin; j0 < shape[0]; j0 += stride) {
      std::fill(idx.begin(), idx.end(), 0);
      idx[0] = j0;
      while (true) {
        for (std::size_t k = 0; k < d; ++k) {
          x[k] = box.axes[k].first + static_cast<double>(idx[k]) * spacing;
        }
        const double v = obj.value(x);
        ++best.cells;
        if (v < best.value || (v == best.value && x < best.x)) {
          best.value = v;
          best.x = x;
        }
        std::size_t k = d;
        while (k > 1 && ++idx[k - 1] == shape[k - 1]) idx[--k] = 0;
        if (k <= 1) break;
      }
    }
    return best;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shape[0])));
  std::vector<Best> partial(workers);
  if (workers == 1) {
    partial[0] = scan(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { partial[w] = scan(w, workers); });
    }
    for (auto& t : pool) t.join();
  }
  Best best;
  for (auto& p : partial) {
    best.cells += p.cells;
    if (p.x.empty()) continue;
    if (p.value < best.value || (p.value == best.value && p.x < best.x)) {
      best.value = p.value;
      best.x = p.x;
    }
  }
  if (best.x.empty()) throw NumericalFailure("grid: objective not finite anywhere", {});
  Point loc(std::move(best.x));
  return OracleReport{loc, objective_value(obj, loc), 0, best.cells, OracleMethod::grid, true, {}};
}

}  // namespace steiner
