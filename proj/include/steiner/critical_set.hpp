#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/flow.hpp"
#include "steiner/objective.hpp"
#include "steiner/point.hpp"

namespace steiner {

/// Axis-aligned box, one [lo, hi] interval per coordinate.
struct Box {
  std::vector<std::pair<double, double>> axes;

  std::size_t dimension() const noexcept { return axes.size(); }

  friend bool operator==(const Box&, const Box&) = default;

  double diagonal() const {
    double s = 0.0;
    for (const auto& [lo, hi] : axes) s += (hi - lo) * (hi - lo);
    return std::sqrt(s);
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t k = 0; k < axes.size(); ++k) {
      if (x[k] < axes[k].first || x[k] > axes[k].second) return false;
    }
    return true;
  }

  void validate() const {
    if (axes.empty()) throw ConfigError("domain_box: must have at least one axis");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const auto [lo, hi] = axes[k];
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ConfigError("domain_box[" + std::to_string(k) + "]: need finite lo < hi");
      }
    }
  }

  /// Anchor bounds widened by 20% of each axis extent. Axes with no extent
  /// are widened by 20% of max(1, bounding-box diagonal).
  static Box around(const AnchorSet& anchors) {
    Box box{anchors.bounds()};
    const double fallback = 0.2 * std::max(1.0, anchors.bounding_box_diagonal());
    for (auto& [lo, hi] : box.axes) {
      const double margin = hi > lo ? 0.2 * (hi - lo) : fallback;
      lo -= margin;
      hi += margin;
    }
    return box;
  }
};

enum class TestingStrategy { grid, uniform_random, anchors_jittered };

inline std::string_view to_string(TestingStrategy s) {
  switch (s) {
    case TestingStrategy::grid: return "grid";
    case TestingStrategy::uniform_random: return "uniform_random";
    case TestingStrategy::anchors_jittered: return "anchors_jittered";
  }
  return "unknown";
}

inline TestingStrategy parse_testing_strategy(std::string_view name) {
  for (auto s : {TestingStrategy::grid, TestingStrategy::uniform_random,
                 TestingStrategy::anchors_jittered}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("testing_plan.strategy: unknown strategy '" + std::string(name) + "'");
}

/// Where the descent traces start. An empty domain_box is filled in from
/// the anchors by resolve().
struct TestingPlan {
  TestingStrategy strategy = TestingStrategy::grid;
  std::size_t count = 16;
  Box domain_box;
  std::uint64_t seed = 0;

  /// Fills an empty box from the anchors and checks the plan against them.
  TestingPlan resolved(const AnchorSet& anchors) const {
    TestingPlan plan = *this;
    if (plan.count < 1) throw ConfigError("testing_plan.count: must be >= 1");
    if (plan.domain_box.axes.empty()) {
      plan.domain_box = Box::around(anchors);
      return plan;
    }
    plan.domain_box.validate();
    if (plan.domain_box.dimension() != anchors.dimension()) {
      throw ConfigError("testing_plan.domain_box: has " +
                        std::to_string(plan.domain_box.dimension()) + " axes, expected " +
                        std::to_string(anchors.dimension()));
    }
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      if (!plan.domain_box.contains(anchors.row(i))) {
        throw ConfigError("testing_plan.domain_box: does not contain anchor " +
                          std::to_string(i));
      }
    }
    return plan;
  }
};

namespace detail {

// Portable uniform [0,1) from a 64-bit engine; std::uniform_real_distribution
// differs between standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t lattice_side(std::size_t count, std::size_t d) {
  std::size_t m = 1;
  auto cells = [d](std::size_t side) {
    double c = 1.0;
    for (std::size_t k = 0; k < d; ++k) c *= static_cast<double>(side);
    return c;
  };
  while (cells(m) < static_cast<double>(count)) ++m;
  return m;
}

}  // namespace detail

/// Deterministic testing points for a plan with a concrete box.
/// anchors_jittered needs the anchors; it yields ceil(count / n) points per
/// anchor, each displaced by at most 1% of the box diagonal.
inline std::vector<Point> generate_testing_points(const TestingPlan& plan,
                                                  const AnchorSet* anchors = nullptr) {
  plan.domain_box.validate();
  if (plan.count < 1) throw ConfigError("testing_plan.count: must be >= 1");
  const auto& axes = plan.domain_box.axes;
  const std::size_t d = axes.size();
  std::vector<Point> points;

  switch (plan.strategy) {
    case TestingStrategy::grid: {
      const std::size_t m = detail::lattice_side(plan.count, d);
      std::vector<std::size_t> idx(d, 0);
      std::vector<double> x(d);
      while (true) {
        for (std::size_t k = 0; k < d; ++k) {
          const auto [lo, hi] = axes[k];
          x[k] = m == 1 ? 0.5 * (lo + hi)
                        : lo + (hi - lo) * static_cast<double>(idx[k]) / static_cast<double>(m - 1);
        }
        points.emplace_back(x);
        std::size_t k = d;
        while (k > 0 && ++idx[k - 1] == m) idx[--k] = 0;
        if (k == 0) break;
      }
      break;
    }
    case TestingStrategy::uniform_random: {
      std::mt19937_64 rng(plan.seed);
      std::vector<double> x(d);
      for (std::size_t i = 0; i < plan.count; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
          const auto [lo, hi] = axes[k];
          x[k] = lo + (hi - lo) * detail::unit_uniform(rng);
        }
        points.emplace_back(x);
      }
      break;
    }
    case TestingStrategy::anchors_jittered: {
      if (!anchors) throw ConfigError("anchors_jittered: anchors are required");
      if (anchors->dimension() != d) throw ConfigError("anchors_jittered: dimension mismatch");
      std::mt19937_64 rng(plan.seed);
      const double radius = 0.01 * plan.domain_box.diagonal();
      const double half_side = radius / std::sqrt(static_cast<double>(d));
      const std::size_t per_anchor = (plan.count + anchors->size() - 1) / anchors->size();
      std::vector<double> x(d);
      for (std::size_t rep = 0; rep < per_anchor; ++rep) {
        for (std::size_t i = 0; i < anchors->size(); ++i) {
          const auto a = anchors->row(i);
          for (std::size_t k = 0; k < d; ++k) {
            const double jitter = half_side * (2.0 * detail::unit_uniform(rng) - 1.0);
            x[k] = std::clamp(a[k] + jitter, axes[k].first, axes[k].second);
          }
          points.emplace_back(x);
        }
      }
      break;
    }
  }
  return points;
}

/// An element of the critical set {x : grad U(x) = 0}.
struct CriticalPoint {
  Point location;
  double value;
  double grad_norm;
  std::size_t basin_count;  // testing points whose trace came to rest here
  bool negative_curvature = false;  // saddle or maximum direction found by probing
};

struct SolveDiagnostics {
  std::size_t testing_points = 0;
  std::size_t converged = 0;
  std::size_t stalled = 0;
  std::size_t max_steps = 0;
  std::size_t failed = 0;  // numerical failures
  std::size_t clusters = 0;
  bool degenerate = false;  // distinct clusters with values within 1e-9 relative
  bool nonsmooth = false;   // a subgradient was used on some trace
};

struct SteinerResult {
  CriticalPoint steiner;
  std::vector<CriticalPoint> critical_set;
  std::optional<std::vector<FlowTrace>> traces_kept;  // one per testing point, in order
  SolveDiagnostics diagnostics;
};

class NoCriticalPointFound : public Error {
 public:
  explicit NoCriticalPointFound(SolveDiagnostics diag)
      : Error("no testing point converged to a critical point"), diag_(diag) {}
  const SolveDiagnostics& diagnostics() const noexcept { return diag_; }

 private:
  SolveDiagnostics diag_;
};

/// Minimal value; values within 1e-12 relative of the minimum tie and the
/// lexicographically smallest location among them wins.
inline CriticalPoint select_steiner(const std::vector<CriticalPoint>& critical_set) {
  if (critical_set.empty()) throw InputError("select_steiner: empty critical set");
  double best = critical_set.front().value;
  for (const auto& c : critical_set) best = std::min(best, c.value);
  const double slack = 1e-12 * std::abs(best);
  const CriticalPoint* pick = nullptr;
  for (const auto& c : critical_set) {
    if (c.value - best > slack) continue;
    if (!pick || c.location < pick->location) pick = &c;
  }
  return *pick;
}

struct SolveOptions {
  unsigned threads = 1;
  bool keep_traces = false;
};

namespace detail {

// Groups by single linkage at `radius`; returns a group id per point.
inline std::vector<std::size_t> single_linkage(const std::vector<Point>& pts, double radius) {
  std::vector<std::size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (distance(pts[i], pts[j]) <= radius) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::size_t> group(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) group[i] = find(i);
  return group;
}

// Second differences along the axes and D seeded random directions.
inline bool has_negative_curvature(const Objective& obj, const Point& x, double h,
                                   std::uint64_t seed) {
  const std::size_t d = x.dimension();
  const double u0 = objective_value(obj, x);
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(u0));
  std::mt19937_64 rng(seed);
  std::vector<double> dir(d), plus(d), minus(d);
  for (std::size_t probe = 0; probe < 2 * d; ++probe) {
    if (probe < d) {
      std::fill(dir.begin(), dir.end(), 0.0);
      dir[probe] = 1.0;
    } else {
      for (auto& c : dir) c = 2.0 * unit_uniform(rng) - 1.0;
      const double len = norm(dir);
      if (len == 0.0) continue;
      for (auto& c : dir) c /= len;
    }
    for (std::size_t k = 0; k < d; ++k) {
      plus[k] = x[k] + h * dir[k];
      minus[k] = x[k] - h * dir[k];
    }
    const double second = obj.value(plus) + obj.value(minus) - 2.0 * u0;
    if (second < -floor) return true;
  }
  return false;
}

struct Terminal {
  Point location;
  double value;
  std::size_t start_index;
};

}  // namespace detail

/// Runs trace_flow from every testing point, clusters the converged rest
/// points, polishes each cluster's best member with grad_tol / 10 and
/// selects the Steiner point by value.
inline SteinerResult enumerate_critical_points(const Objective& obj,
                                               const std::vector<Point>& testing_points,
                                               const FlowConfig& cfg, double cluster_radius,
                                               const SolveOptions& options = {},
                                               std::uint64_t probe_seed = 0) {
  cfg.validate();
  if (!(cluster_radius > 0.0) || !std::isfinite(cluster_radius)) {
    throw ConfigError("cluster_radius: must be > 0");
  }
  if (testing_points.empty()) throw ConfigError("no testing points");
  for (const auto& p : testing_points) obj.check_dimension(p.dimension());

  const std::size_t m = testing_points.size();
  std::vector<FlowTrace> traces(m);
  std::vector<char> failed(m, 0);
  std::exception_ptr error;
  std::mutex error_mutex;

  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < m; i += stride) {
      try {
        traces[i] = trace_flow(obj, testing_points[i], cfg);
      } catch (const NumericalFailure& e) {
        traces[i] = e.partial_trace();
        failed[i] = 1;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(m)));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  SolveDiagnostics diag;
  diag.testing_points = m;
  std::vector<detail::Terminal> terminals;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& tr = traces[i];
    if (failed[i]) {
      ++diag.failed;
      continue;
    }
    diag.nonsmooth = diag.nonsmooth || tr.nonsmooth;
    switch (tr.status) {
      case FlowStatus::converged:
        ++diag.converged;
        terminals.push_back({tr.back().point, tr.back().value, i});
        break;
      case FlowStatus::stalled: ++diag.stalled; break;
      case FlowStatus::max_steps: ++diag.max_steps; break;
    }
  }
  if (terminals.empty()) throw NoCriticalPointFound(diag);

  // Sorting first makes clustering independent of execution order.
  std::sort(terminals.begin(), terminals.end(), [](const auto& a, const auto& b) {
    if (a.location != b.location) return a.location < b.location;
    return a.start_index < b.start_index;
  });
  std::vector<Point> locs;
  for (const auto& t : terminals) locs.push_back(t.location);
  const auto group = detail::single_linkage(locs, cluster_radius);

  struct Cluster {
    std::size_t best;
    std::size_t members = 0;
  };
  std::vector<std::pair<std::size_t, Cluster>> clusters;  // group id -> cluster
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    auto it = std::find_if(clusters.begin(), clusters.end(),
                           [&](const auto& c) { return c.first == group[i]; });
    if (it == clusters.end()) {
      clusters.push_back({group[i], {i, 1}});
      continue;
    }
    auto& c = it->second;
    ++c.members;
    const auto& cur = terminals[c.best];
    if (terminals[i].value < cur.value ||
        (terminals[i].value == cur.value && terminals[i].location < cur.location)) {
      c.best = i;
    }
  }

  FlowConfig polish = cfg;
  polish.grad_tol = cfg.grad_tol / 10.0;
  std::vector<CriticalPoint> reps;
  for (const auto& [id, c] : clusters) {
    Point loc = terminals[c.best].location;
    try {
      const auto tr = trace_flow(obj, loc, polish);
      diag.nonsmooth = diag.nonsmooth || tr.nonsmooth;
      if (tr.back().grad_norm <= cfg.grad_tol) loc = tr.back().point;
    } catch (const NumericalFailure&) {
    }
    reps.push_back({loc, objective_value(obj, loc), gradient(obj, loc).norm(), c.members});
  }

  // Polishing can pull two clusters onto the same point; merge those.
  std::sort(reps.begin(), reps.end(),
            [](const auto& a, const auto& b) { return a.location < b.location; });
  std::vector<Point> rep_locs;
  for (const auto& r : reps) rep_locs.push_back(r.location);
  const auto rep_group = detail::single_linkage(rep_locs, cluster_radius);
  std::vector<CriticalPoint> merged;
  std::vector<std::size_t> merged_group;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    auto it = std::find(merged_group.begin(), merged_group.end(), rep_group[i]);
    if (it == merged_group.end()) {
      merged.push_back(reps[i]);
      merged_group.push_back(rep_group[i]);
      continue;
    }
    auto& into = merged[static_cast<std::size_t>(it - merged_group.begin())];
    const std::size_t basins = into.basin_count + reps[i].basin_count;
    if (reps[i].value < into.value) into = reps[i];
    into.basin_count = basins;
  }

  const double probe_h = 10.0 * cluster_radius;
  for (auto& c : merged) {
    c.negative_curvature = detail::has_negative_curvature(obj, c.location, probe_h, probe_seed);
  }
  std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.location < b.location;
  });
  for (std::size_t i = 0; i < merged.size() && !diag.degenerate; ++i) {
    for (std::size_t j = i + 1; j < merged.size(); ++j) {
      const double scale = std::max(std::abs(merged[i].value), std::abs(merged[j].value));
      if (std::abs(merged[i].value - merged[j].value) <= 1e-9 * scale) {
        diag.degenerate = true;
        break;
      }
    }
  }
  diag.clusters = merged.size();

  SteinerResult result{select_steiner(merged), merged, std::nullopt, diag};
  if (options.keep_traces) result.traces_kept = std::move(traces);
  return result;
}

/// Default cluster radius: 1e-4 of the box diagonal.
inline double default_cluster_radius(const Box& box) { return 1e-4 * box.diagonal(); }

/// Plan-driven overload; the plan's box is resolved from the anchors if empty.
inline SteinerResult enumerate_critical_points(const Objective& obj, const TestingPlan& plan,
                                               const FlowConfig& cfg, double cluster_radius,
                                               const SolveOptions& options = {}) {
  const TestingPlan resolved = plan.resolved(obj.anchors());
  return enumerate_critical_points(obj, generate_testing_points(resolved, &obj.anchors()), cfg,
                                   cluster_radius, options, resolved.seed);
}

}  // namespace steiner
