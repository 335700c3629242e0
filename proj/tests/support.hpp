#pragma once

// Test-side reference computations. Nothing here calls the library's
// oracles or flow code, so agreement with them is independent evidence.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "steiner/critical_set.hpp"
#include "steiner/flow.hpp"
#include "steiner/objective.hpp"

namespace ref {

using Coords = std::vector<std::vector<double>>;

inline long double dist(const std::vector<double>& x, const std::vector<double>& a) {
  long double s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const long double d = static_cast<long double>(x[k]) - a[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Unsmoothed sum of weighted distances in extended precision.
inline long double distance_sum(const Coords& anchors, const std::vector<double>& x,
                                const std::vector<double>& w = {}) {
  long double s = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) s += (w.empty() ? 1.0L : w[i]) * dist(x, anchors[i]);
  return s;
}

// Plain Weiszfeld iteration in long double, for instances whose median is
// not an anchor.
inline std::vector<double> geometric_median(const Coords& anchors, int iterations = 200000) {
  const std::size_t d = anchors[0].size();
  std::vector<long double> x(d, 0);
  for (const auto& a : anchors) {
    for (std::size_t k = 0; k < d; ++k) x[k] += static_cast<long double>(a[k]) / anchors.size();
  }
  for (int it = 0; it < iterations; ++it) {
    std::vector<long double> num(d, 0);
    long double den = 0;
    for (const auto& a : anchors) {
      long double r = 0;
      for (std::size_t k = 0; k < d; ++k) r += (x[k] - a[k]) * (x[k] - a[k]);
      r = std::sqrt(r);
      if (r == 0) return {a.begin(), a.end()};
      for (std::size_t k = 0; k < d; ++k) num[k] += a[k] / r;
      den += 1 / r;
    }
    long double step = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const long double nx = num[k] / den;
      step = std::max(step, std::abs(nx - x[k]));
      x[k] = nx;
    }
    if (step < 1e-17L) break;
  }
  return {x.begin(), x.end()};
}

// Brute-force lattice minimum of `f` over [lo, hi] with the given spacing (2-D).
template <class F>
std::pair<std::vector<double>, double> grid_min_2d(F f, double x0, double x1, double y0, double y1,
                                                   double spacing) {
  std::vector<double> best{x0, y0};
  double best_v = f(best);
  const long nx = std::lround((x1 - x0) / spacing), ny = std::lround((y1 - y0) / spacing);
  std::vector<double> p(2);
  for (long i = 0; i <= nx; ++i) {
    for (long j = 0; j <= ny; ++j) {
      p[0] = x0 + i * spacing;
      p[1] = y0 + j * spacing;
      const double v = f(p);
      if (v < best_v) {
        best_v = v;
        best = p;
      }
    }
  }
  return {best, best_v};
}

// Random orthogonal matrix (Gram-Schmidt on a Gaussian matrix), row-major.
inline std::vector<std::vector<double>> random_rotation(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (;;) {
      for (auto& v : q[i]) v = n01(rng);
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < d; ++k) q[i][k] -= dot * q[j][k];
      }
      double len = 0;
      for (double v : q[i]) len += v * v;
      len = std::sqrt(len);
      if (len < 1e-6) continue;
      for (auto& v : q[i]) v /= len;
      break;
    }
  }
  return q;
}

inline std::vector<double> apply(const std::vector<std::vector<double>>& m, std::span<const double> x) {
  std::vector<double> y(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < x.size(); ++k) y[i] += m[i][k] * x[k];
  }
  return y;
}

}  // namespace ref

namespace support {

inline std::vector<steiner::Point> random_points(std::size_t n, std::size_t d, double lo, double hi,
                                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<steiner::Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> c(d);
    for (auto& v : c) v = u(rng);
    pts.emplace_back(std::move(c));
  }
  return pts;
}

inline ref::Coords coords(const steiner::AnchorSet& a) {
  ref::Coords out;
  for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a.row(i).begin(), a.row(i).end());
  return out;
}

// Samples strictly decrease by the certified change, stored values never
// rise beyond rounding, and a converged trace ends below grad_tol.
inline bool descent_ok(const steiner::FlowTrace& tr, double grad_tol, std::string* why = nullptr) {
  for (std::size_t k = 1; k < tr.samples.size(); ++k) {
    const auto& prev = tr.samples[k - 1];
    const auto& cur = tr.samples[k];
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(prev.value);
    if (!(cur.decrease < 0.0) || cur.value > prev.value + slack) {
      if (why) {
        std::ostringstream s;
        s << "step " << k << ": decrease " << cur.decrease << ", U " << prev.value << " -> "
          << cur.value;
        *why = s.str();
      }
      return false;
    }
  }
  if (tr.status == steiner::FlowStatus::converged && tr.back().grad_norm > grad_tol) {
    if (why) *why = "converged above grad_tol";
    return false;
  }
  return true;
}

struct EquivarianceErrors {
  double translation = 0, rotation = 0, scale = 0;
  double tol = 0;        // 10 grad_tol
  double scale_tol = 0;  // 10 grad_tol max(1, s)
};

// Solves a random euclidean instance and its translated, rotated and
// scaled copies from correspondingly transformed testing points.
inline EquivarianceErrors equivariance(std::mt19937_64& rng) {
  using namespace steiner;
  std::uniform_int_distribution<int> pick_n(3, 20), pick_d(2, 3);
  std::uniform_real_distribution<double> u(-20.0, 20.0), pick_s(0.2, 5.0);
  const std::size_t n = static_cast<std::size_t>(pick_n(rng));
  const std::size_t d = static_cast<std::size_t>(pick_d(rng));
  const auto pts = random_points(n, d, 0.0, 10.0, rng);
  const AnchorSet anchors(pts);
  const Objective obj(anchors, PotentialSpec::euclidean());
  TestingPlan plan;
  plan.strategy = TestingStrategy::uniform_random;
  plan.count = 8;
  plan.seed = rng();
  plan = plan.resolved(anchors);
  const auto starts = generate_testing_points(plan, &anchors);
  const FlowConfig cfg = FlowConfig::defaults_for(obj, plan.domain_box.diagonal());
  const double radius = default_cluster_radius(plan.domain_box);
  const Point base = enumerate_critical_points(obj, starts, cfg, radius).steiner.location;

  auto transformed = [&](auto map, double eps, double r, const FlowConfig& c) {
    std::vector<Point> a2, s2;
    for (const auto& p : pts) a2.emplace_back(map(p.coords()));
    for (const auto& p : starts) s2.emplace_back(map(p.coords()));
    const Objective o2(AnchorSet(a2), PotentialSpec::euclidean(eps));
    return enumerate_critical_points(o2, s2, c, r).steiner.location;
  };
  auto err = [&](const Point& got, const std::vector<double>& want) {
    double e = 0;
    for (std::size_t k = 0; k < d; ++k) e = std::max(e, std::abs(got[k] - want[k]));
    return e;
  };

  EquivarianceErrors out;
  out.tol = 10.0 * cfg.grad_tol;

  std::vector<double> t(d);
  for (auto& v : t) v = u(rng);
  auto shift = [&](std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t k = 0; k < d; ++k) y[k] += t[k];
    return y;
  };
  out.translation = err(transformed(shift, obj.epsilon(), radius, cfg), shift(base.coords()));

  const auto rot = ref::random_rotation(d, rng);
  auto rotate = [&](std::span<const double> x) { return ref::apply(rot, x); };
  out.rotation = err(transformed(rotate, obj.epsilon(), radius, cfg), rotate(base.coords()));

  const double s = pick_s(rng);
  auto scale = [&](std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (auto& v : y) v *= s;
    return y;
  };
  FlowConfig scaled = cfg;
  scaled.initial_step *= s;
  scaled.min_step *= s;
  out.scale = err(transformed(scale, obj.epsilon() * s, radius * s, scaled), scale(base.coords()));
  out.scale_tol = out.tol * std::max(1.0, s);
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("steiner-" + tag + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace support
