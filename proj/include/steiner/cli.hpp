#pragma once

// Subcommand bodies of the `steiner` tool. Each returns the process exit
// code and reports problems on `err`; argument parsing lives in the tool.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include "steiner/critical_set.hpp"
#include "steiner/errors.hpp"
#include "steiner/flow.hpp"
#include "steiner/io.hpp"
#include "steiner/objective.hpp"
#include "steiner/oracles.hpp"

namespace steiner {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNoCriticalPoint = 2, kExitCheckFailed = 3 };

/// Command-line overrides for `solve`; unset fields defer to the file.
struct SolveFlags {
  std::optional<std::string> trace_prefix;
  std::optional<double> grad_tol;
  std::optional<std::size_t> starts;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

/// Builds the solve configuration: flags over file fields over defaults.
inline ResolvedConfig resolve_config(const InstanceFile& inst, const Objective& obj,
                                     const SolveFlags& flags = {}) {
  TestingPlan plan;
  if (inst.testing_plan) plan = inst.testing_plan->apply(plan);
  if (flags.starts) plan.count = *flags.starts;
  if (flags.strategy) plan.strategy = parse_testing_strategy(*flags.strategy);
  if (flags.seed) plan.seed = *flags.seed;
  plan = plan.resolved(obj.anchors());

  FlowConfig flow = FlowConfig::defaults_for(obj, plan.domain_box.diagonal());
  if (inst.flow) flow = inst.flow->apply(flow);
  if (flags.grad_tol) flow.grad_tol = *flags.grad_tol;
  flow.validate();

  const double radius = inst.cluster_radius.value_or(default_cluster_radius(plan.domain_box));
  return {obj.dimension(), obj.anchors().size(), obj.potential(), plan, flow, radius};
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("cannot write " + path);
}

inline Objective load_objective(const InstanceFile& inst) {
  return Objective(inst.anchor_set(), inst.potential);
}

// Runs `body`, mapping library errors onto exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const NoCriticalPointFound& e) {
    const auto& d = e.diagnostics();
    err << "error: " << e.what() << " (testing_points=" << d.testing_points
        << " stalled=" << d.stalled << " max_steps=" << d.max_steps << " failed=" << d.failed
        << ")\n";
    return kExitNoCriticalPoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace detail

inline int cmd_solve(const std::string& input_path, const std::string& output_path,
                     const SolveFlags& flags = {}, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const InstanceFile inst = read_instance(input_path);
    const Objective obj = detail::load_objective(inst);
    const ResolvedConfig cfg = resolve_config(inst, obj, flags);
    SolveOptions options;
    options.threads = std::max(1u, flags.threads);
    options.keep_traces = flags.trace_prefix.has_value();
    const SteinerResult result =
        enumerate_critical_points(obj, cfg.plan, cfg.flow, cfg.cluster_radius, options);
    detail::write_text(output_path, print_json(result_to_json(result, cfg)));
    if (flags.trace_prefix && result.traces_kept) {
      const auto& traces = *result.traces_kept;
      for (std::size_t k = 0; k < traces.size(); ++k) {
        std::ostringstream csv;
        write_trace_csv(csv, traces[k]);
        detail::write_text(*flags.trace_prefix + "." + std::to_string(k) + ".csv", csv.str());
      }
    }
    return static_cast<int>(kExitOk);
  });
}

struct OracleFlags {
  std::optional<double> tol;      // weiszfeld
  std::optional<double> spacing;  // grid
  unsigned threads = 1;
};

/// Grid spacing giving about 1e6 lattice points over the box.
inline double default_grid_spacing(const Box& box) {
  double log_volume = 0.0;
  for (const auto& [lo, hi] : box.axes) log_volume += std::log(hi - lo);
  return std::exp((log_volume - std::log(1e6)) / static_cast<double>(box.dimension()));
}

inline int cmd_oracle(OracleMethod method, const std::string& input_path,
                      const std::string& output_path, const OracleFlags& flags = {},
                      std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const InstanceFile inst = read_instance(input_path);
    const Objective obj = detail::load_objective(inst);
    OracleReport report{Point::zeros(obj.dimension()), 0.0, 0, 0, method, true, {}};
    switch (method) {
      case OracleMethod::weiszfeld: {
        const auto kind = obj.potential().kind;
        if (kind != PotentialKind::euclidean && kind != PotentialKind::weighted_euclidean) {
          throw ConfigError("weiszfeld: needs a euclidean or weighted_euclidean potential, got " +
                            std::string(to_string(kind)));
        }
        report = weiszfeld(obj.anchors(), obj.potential().weights, flags.tol.value_or(1e-12),
                           1'000'000);
        break;
      }
      case OracleMethod::centroid:
        report = centroid(obj.anchors(), &obj);
        break;
      case OracleMethod::grid: {
        TestingPlan plan;
        if (inst.testing_plan) plan = inst.testing_plan->apply(plan);
        plan = plan.resolved(obj.anchors());
        const double spacing = flags.spacing.value_or(default_grid_spacing(plan.domain_box));
        report = grid_search(obj, plan.domain_box, spacing, std::max(1u, flags.threads));
        break;
      }
    }
    detail::write_text(output_path, print_json(oracle_to_json(report)));
    return static_cast<int>(kExitOk);
  });
}

struct GradcheckOptions {
  std::size_t samples = 1000;
  std::optional<double> h;  // default 1e-5 x box diagonal
  // Applied to every analytic gradient before comparison; tests use it to
  // check that a wrong gradient is caught.
  std::function<void(std::span<double>)> gradient_hook;
};

struct GradcheckReport {
  std::size_t samples = 0;
  double h = 0.0;
  double exclusion_radius = 0.0;
  double max_relative_error = 0.0;
  Point worst_point = Point::zeros(1);
  double threshold = 1e-5;
  bool passed = false;
};

/// Compares grad U with central differences at random points of the box.
///
/// Relative error is |g - fd| / max(|g|, |fd|, 1e-4 x gradient scale); the
/// floor keeps points where the gradient nearly vanishes from reporting
/// pure rounding noise. Samples keep max(10 eps, 1000 h) away from the
/// potential's kinks: anchors for the euclidean kinds, every coordinate
/// hyperplane through an anchor for p_norm.
inline GradcheckReport run_gradcheck(const Objective& obj, const TestingPlan& plan,
                                     const GradcheckOptions& options) {
  if (options.samples < 1) throw ConfigError("gradcheck: samples must be >= 1");
  const Box& box = plan.domain_box;
  box.validate();
  const std::size_t d = obj.dimension();
  const double diag = box.diagonal();
  const double h = options.h.value_or(1e-5 * diag);
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("gradcheck: h must be > 0");

  const auto kind = obj.potential().kind;
  const bool kinked = obj.potential().euclidean_family();
  const double radius = kinked ? std::max(10.0 * obj.epsilon(), 1000.0 * h) : 10.0 * obj.epsilon();
  auto admissible = [&](std::span<const double> x) {
    for (std::size_t i = 0; i < obj.anchors().size(); ++i) {
      const auto a = obj.anchors().row(i);
      if (kind == PotentialKind::p_norm) {
        for (std::size_t k = 0; k < d; ++k) {
          if (std::abs(x[k] - a[k]) < radius) return false;
        }
      } else if (detail::distance(x, a) < radius) {
        return false;
      }
    }
    return true;
  };

  GradcheckReport report;
  report.samples = options.samples;
  report.h = h;
  report.exclusion_radius = radius;
  const double floor = 1e-4 * obj.gradient_scale(diag);
  std::mt19937_64 rng(plan.seed);
  std::vector<double> x(d), g(d);
  std::size_t taken = 0;
  std::size_t attempts = 0;
  while (taken < options.samples) {
    if (++attempts > 1000 * options.samples) {
      throw ConfigError("gradcheck: cannot place samples away from anchors; reduce h");
    }
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = box.axes[k].first + (box.axes[k].second - box.axes[k].first) * detail::unit_uniform(rng);
    }
    if (!admissible(x)) continue;
    ++taken;
    obj.gradient(x, g);
    if (options.gradient_hook) options.gradient_hook(g);
    const Point p(x);
    const Point fd = finite_difference_gradient(obj, p, h);
    double diff = 0.0;
    for (std::size_t k = 0; k < d; ++k) diff += (g[k] - fd[k]) * (g[k] - fd[k]);
    const double rel = std::sqrt(diff) / std::max({detail::norm(g), fd.norm(), floor});
    if (rel > report.max_relative_error || taken == 1) {
      report.max_relative_error = std::max(report.max_relative_error, rel);
      report.worst_point = p;
    }
  }
  report.passed = report.max_relative_error <= report.threshold;
  return report;
}

inline Json gradcheck_to_json(const GradcheckReport& r) {
  Json j = Json::object();
  j["samples"] = r.samples;
  j["h"] = r.h;
  j["exclusion_radius"] = r.exclusion_radius;
  j["max_relative_error"] = r.max_relative_error;
  j["worst_point"] = detail::to_json(r.worst_point);
  j["threshold"] = r.threshold;
  j["passed"] = r.passed;
  return j;
}

/// Exit 0 iff the check passes, kExitCheckFailed if it runs but fails.
inline int cmd_gradcheck(const std::string& input_path, const GradcheckOptions& options,
                         const std::string& report_path, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const InstanceFile inst = read_instance(input_path);
    const Objective obj = detail::load_objective(inst);
    TestingPlan plan;
    if (inst.testing_plan) plan = inst.testing_plan->apply(plan);
    plan = plan.resolved(obj.anchors());
    const auto report = run_gradcheck(obj, plan, options);
    detail::write_text(report_path, print_json(gradcheck_to_json(report)));
    if (!report.passed) {
      err << "gradcheck: max relative error " << report.max_relative_error << " exceeds "
          << report.threshold << "\n";
      return static_cast<int>(kExitCheckFailed);
    }
    return static_cast<int>(kExitOk);
  });
}

}  // namespace steiner
