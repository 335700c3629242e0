#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/objective.hpp"
#include "steiner/point.hpp"

namespace steiner {

/// Parameters of the dissipative descent. A particle at x moves along
/// -grad U(x); the step length t is found by backtracking from initial_step.
struct FlowConfig {
  double grad_tol = 1e-8;
  int max_steps = 100000;
  double initial_step = 1.0;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double min_step = 1e-16;

  void validate() const {
    auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(grad_tol)) throw ConfigError("flow.grad_tol: must be > 0");
    if (max_steps <= 0) throw ConfigError("flow.max_steps: must be > 0");
    if (!positive(initial_step)) throw ConfigError("flow.initial_step: must be > 0");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("flow.armijo_c: must be in (0,1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
      throw ConfigError("flow.backtrack_factor: must be in (0,1)");
    }
    if (!positive(min_step)) throw ConfigError("flow.min_step: must be > 0");
    if (!(min_step < initial_step)) throw ConfigError("flow.min_step: must be < initial_step");
  }

  /// Scale-aware defaults: grad_tol is relative to the objective's gradient
  /// bound over `extent`, and the first trial step moves about `extent`.
  static FlowConfig defaults_for(const Objective& obj, double extent) {
    if (!(extent > 0.0)) extent = 1.0;
    const double scale = obj.gradient_scale(extent);
    FlowConfig cfg;
    cfg.grad_tol = 1e-6 * scale;
    cfg.initial_step = extent / scale;
    cfg.min_step = 1e-18 * cfg.initial_step;
    return cfg;
  }
};

enum class FlowStatus { converged, max_steps, stalled };

inline std::string_view to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::converged: return "converged";
    case FlowStatus::max_steps: return "max_steps";
    case FlowStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct FlowSample {
  Point point;
  double value;
  double grad_norm;
  double step_len;  // length of the step that produced this sample; 0 for the first
  double decrease = 0.0;  // U(this) - U(previous), evaluated without cancellation
};

/// The iterative curve from a testing point to its rest point.
struct FlowTrace {
  std::vector<FlowSample> samples;
  FlowStatus status = FlowStatus::max_steps;
  bool nonsmooth = false;  // a subgradient was used somewhere along the trace

  const FlowSample& front() const { return samples.front(); }
  const FlowSample& back() const { return samples.back(); }
};

/// Thrown when U or grad U stops being finite; carries the trace so far.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, FlowTrace partial)
      : Error(what), partial_(std::move(partial)) {}
  const FlowTrace& partial_trace() const noexcept { return partial_; }

 private:
  FlowTrace partial_;
};

namespace detail {

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Traces x <- x - t grad U(x) from `start` until |grad U| <= grad_tol.
///
/// Each step starts from t = initial_step and shrinks until the Armijo
/// condition U(x - t g) <= U(x) - c t |g|^2 holds with a strict decrease,
/// both judged on Objective::value_change rather than on two rounded
/// values of U. The shrink factor is taken from the minimizer of the
/// quadratic through U(x), U'(x) and the rejected trial, clamped to
/// [min(0.1, backtrack_factor), backtrack_factor].
inline FlowTrace trace_flow(const Objective& obj, const Point& start, const FlowConfig& cfg) {
  cfg.validate();
  obj.check_dimension(start.dimension());
  const std::size_t d = start.dimension();

  FlowTrace trace;
  std::vector<double> x = start.vector();
  std::vector<double> g(d), y(d);

  double ux = obj.value(x);
  bool smooth = obj.gradient(x, g);
  trace.nonsmooth = !smooth;
  double gnorm = detail::norm(g);
  if (!std::isfinite(ux) || !detail::all_finite(g)) {
    throw NumericalFailure("objective or gradient not finite at the testing point", trace);
  }
  trace.samples.push_back({start, ux, gnorm, 0.0});

  const double low_shrink = std::min(0.1, cfg.backtrack_factor);
  for (int step = 0;; ++step) {
    if (gnorm <= cfg.grad_tol) {
      trace.status = FlowStatus::converged;
      return trace;
    }
    if (step >= cfg.max_steps) {
      trace.status = FlowStatus::max_steps;
      return trace;
    }
    const double gg = gnorm * gnorm;
    double t = cfg.initial_step;
    double uy = 0.0;
    double change = 0.0;
    bool accepted = false;
    while (t >= cfg.min_step) {
      for (std::size_t k = 0; k < d; ++k) y[k] = x[k] - t * g[k];
      change = detail::all_finite(y) ? obj.value_change(x, y)
                                                  : std::numeric_limits<double>::infinity();
      if (std::isfinite(change) && change < 0.0 && change <= -cfg.armijo_c * t * gg) {
        accepted = true;
        break;
      }
      double next = cfg.backtrack_factor * t;
      if (std::isfinite(change)) {
        const double curvature = change + t * gg;
        if (curvature > 0.0) {
          const double tq = gg * t * t / (2.0 * curvature);
          next = std::clamp(tq, low_shrink * t, cfg.backtrack_factor * t);
        }
      }
      t = next;
    }
    if (!accepted) {
      trace.status = FlowStatus::stalled;
      return trace;
    }
    const double len = detail::distance(x, y);
    uy = obj.value(y);
    std::swap(x, y);
    ux = uy;
    smooth = obj.gradient(x, g);
    if (!smooth) trace.nonsmooth = true;
    if (!detail::all_finite(g)) {
      throw NumericalFailure("gradient not finite along the trace", trace);
    }
    gnorm = detail::norm(g);
    trace.samples.push_back({Point(x), ux, gnorm, len, change});
  }
}

/// Largest sine of the angle between a trace step x_{k+1} - x_k and
/// -grad U(x_k). The part of each step's perpendicular component that is
/// explainable by rounding of the stored coordinates is discounted, so an
/// exact multiple of -grad U scores 0. Zero-length steps are skipped.
inline double tangency_residual(const Objective& obj, const FlowTrace& trace) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double worst = 0.0;
  if (trace.samples.size() < 2) return worst;
  const std::size_t d = trace.samples.front().point.dimension();
  obj.check_dimension(d);
  std::vector<double> g(d), s(d);
  for (std::size_t k = 0; k + 1 < trace.samples.size(); ++k) {
    const auto x0 = trace.samples[k].point.coords();
    const auto x1 = trace.samples[k + 1].point.coords();
    double xmax = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      s[j] = x1[j] - x0[j];
      xmax = std::max({xmax, std::abs(x0[j]), std::abs(x1[j])});
    }
    const double slen = detail::norm(s);
    if (slen == 0.0) continue;
    obj.gradient(x0, g);
    const double glen = detail::norm(g);
    if (glen == 0.0) {
      worst = 1.0;
      continue;
    }
    // component of s along the descent direction -g/|g|
    const double along = -detail::dot(s, g) / glen;
    double perp2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = s[j] + along * g[j] / glen;
      perp2 += r * r;
    }
    double perp = std::sqrt(perp2);
    if (along < 0.0) perp = std::max(perp, slen);  // step against the force
    const double rounding = 8.0 * eps * (slen + std::sqrt(static_cast<double>(d)) * xmax);
    worst = std::max(worst, std::max(0.0, perp - rounding) / slen);
  }
  return std::min(worst, 1.0);
}

namespace detail {

// Longest run of samples [first, last] with strictly monotone axis
// coordinate and |dU/dZ_axis| >= floor at every sample.
inline std::optional<std::pair<std::size_t, std::size_t>> monotone_segment(
    const std::vector<double>& z, const std::vector<double>& slope, double floor) {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t n = z.size();
  std::size_t i = 0;
  while (i < n) {
    if (std::abs(slope[i]) < floor) {
      ++i;
      continue;
    }
    std::size_t j = i;
    int dir = 0;
    while (j + 1 < n && std::abs(slope[j + 1]) >= floor) {
      const double dz = z[j + 1] - z[j];
      const int sd = dz > 0.0 ? 1 : (dz < 0.0 ? -1 : 0);
      if (sd == 0 || (dir != 0 && sd != dir)) break;
      dir = sd;
      ++j;
    }
    if (j > i && (!best || j - i > best->second - best->first)) best = std::pair{i, j};
    i = j > i ? j : i + 1;
  }
  return best;
}

}  // namespace detail

/// Integral-equation residuals of a traced curve parameterized by `axis`:
/// for each coordinate i != axis,
///   |Z_i(end) - Z_i(start) - int (dU/dZ_i) / (dU/dZ_axis) dZ_axis|
/// by the trapezoid rule over the samples of the longest qualifying segment.
/// Returns an empty list for D = 1, and nullopt when no segment qualifies.
inline std::optional<std::vector<double>> graph_residual(const Objective& obj,
                                                         const FlowTrace& trace,
                                                         std::size_t axis, double slope_floor) {
  if (trace.samples.empty()) return std::nullopt;
  const std::size_t d = trace.samples.front().point.dimension();
  obj.check_dimension(d);
  if (axis >= d) throw InputError("graph_residual: axis out of range");
  if (d == 1) return std::vector<double>{};

  const std::size_t m = trace.samples.size();
  std::vector<std::vector<double>> grads(m, std::vector<double>(d));
  std::vector<double> z(m), slope(m);
  for (std::size_t k = 0; k < m; ++k) {
    obj.gradient(trace.samples[k].point.coords(), grads[k]);
    z[k] = trace.samples[k].point[axis];
    slope[k] = grads[k][axis];
  }
  const auto seg = detail::monotone_segment(z, slope, slope_floor);
  if (!seg) return std::nullopt;
  const auto [first, last] = *seg;

  std::vector<double> residuals;
  for (std::size_t i = 0; i < d; ++i) {
    if (i == axis) continue;
    double integral = 0.0;
    for (std::size_t k = first; k < last; ++k) {
      const double r0 = grads[k][i] / grads[k][axis];
      const double r1 = grads[k + 1][i] / grads[k + 1][axis];
      integral += 0.5 * (r0 + r1) * (z[k + 1] - z[k]);
    }
    const double dz = trace.samples[last].point[i] - trace.samples[first].point[i];
    residuals.push_back(std::abs(dz - integral));
  }
  return residuals;
}

/// graph_residual with slope_floor = 1e-6 * max |dU/dZ_axis| along the trace.
inline std::optional<std::vector<double>> graph_residual(const Objective& obj,
                                                         const FlowTrace& trace,
                                                         std::size_t axis) {
  double peak = 0.0;
  for (const auto& s : trace.samples) {
    peak = std::max(peak, std::abs(gradient(obj, s.point)[axis]));
  }
  return graph_residual(obj, trace, axis, 1e-6 * peak);
}

/// Writes `step,Z_1,...,Z_D,U,grad_norm,step_len` with 17 significant digits.
inline void write_trace_csv(std::ostream& os, const FlowTrace& trace) {
  if (trace.samples.empty()) return;
  const std::size_t d = trace.samples.front().point.dimension();
  os << "step";
  for (std::size_t k = 1; k <= d; ++k) os << ",Z_" << k;
  os << ",U,grad_norm,step_len\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t s = 0; s < trace.samples.size(); ++s) {
    const auto& sample = trace.samples[s];
    os << s;
    for (double c : sample.point.coords()) {
      os << ',';
      num(c);
    }
    os << ',';
    num(sample.value);
    os << ',';
    num(sample.grad_norm);
    os << ',';
    num(sample.step_len);
    os << '\n';
  }
}

}  // namespace steiner
