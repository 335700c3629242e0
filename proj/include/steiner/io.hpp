#pragma once

// Instance files in, result documents out. Output is written by a small
// printer of our own so that numbers always carry 17 significant digits and
// key order is fixed, making result files byte-stable.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "steiner/critical_set.hpp"
#include "steiner/errors.hpp"
#include "steiner/flow.hpp"
#include "steiner/oracles.hpp"
#include "steiner/point.hpp"
#include "steiner/potentials.hpp"

namespace steiner {

using Json = nlohmann::ordered_json;

/// Flow fields given in an instance file; unset ones fall back to defaults.
struct FlowOverrides {
  std::optional<double> grad_tol;
  std::optional<int> max_steps;
  std::optional<double> initial_step;
  std::optional<double> armijo_c;
  std::optional<double> backtrack_factor;
  std::optional<double> min_step;

  FlowConfig apply(FlowConfig cfg) const {
    if (grad_tol) cfg.grad_tol = *grad_tol;
    if (max_steps) cfg.max_steps = *max_steps;
    if (initial_step) cfg.initial_step = *initial_step;
    if (armijo_c) cfg.armijo_c = *armijo_c;
    if (backtrack_factor) cfg.backtrack_factor = *backtrack_factor;
    if (min_step) cfg.min_step = *min_step;
    return cfg;
  }

  friend bool operator==(const FlowOverrides&, const FlowOverrides&) = default;
};

/// Testing-plan fields given in an instance file.
struct PlanOverrides {
  std::optional<TestingStrategy> strategy;
  std::optional<std::size_t> count;
  std::optional<Box> domain_box;
  std::optional<std::uint64_t> seed;

  TestingPlan apply(TestingPlan plan) const {
    if (strategy) plan.strategy = *strategy;
    if (count) plan.count = *count;
    if (domain_box) plan.domain_box = *domain_box;
    if (seed) plan.seed = *seed;
    return plan;
  }

  friend bool operator==(const PlanOverrides&, const PlanOverrides&) = default;
};

struct InstanceFile {
  std::size_t dimension = 0;
  std::vector<Point> anchors;
  PotentialSpec potential;
  std::optional<PlanOverrides> testing_plan;
  std::optional<FlowOverrides> flow;
  std::optional<double> cluster_radius;

  AnchorSet anchor_set() const { return AnchorSet(anchors); }

  friend bool operator==(const InstanceFile&, const InstanceFile&) = default;
};

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset; ++i) line += text[i] == '\n';
  return line;
}

// Line number on which each element of the top-level "anchors" array
// starts. Only used to decorate error messages, so it tolerates anything
// the JSON parser has already accepted.
inline std::vector<std::size_t> anchor_row_lines(std::string_view text) {
  std::vector<std::size_t> lines;
  std::vector<char> stack;
  std::string last_string;
  bool key_pending = false;  // last_string was followed by ':'
  std::size_t anchors_depth = 0;
  bool in_scalar = false;
  std::size_t line = 1;

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') ++line;
    const bool in_anchors = anchors_depth != 0 && stack.size() == anchors_depth;
    if (in_scalar) {
      if (c == ',' || c == ']' || c == '}' || c == ' ' || c == '\n' || c == '\t' || c == '\r') {
        in_scalar = false;
      } else {
        continue;
      }
    }
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == ',') continue;
    if (c == ':') {
      key_pending = true;
      continue;
    }
    if (in_anchors && c != ']') lines.push_back(line);
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\') ++i;
        else s += text[i];
        if (i < text.size() && text[i] == '\n') ++line;
      }
      last_string = std::move(s);
      key_pending = false;
      continue;
    }
    if (c == '[' || c == '{') {
      if (c == '[' && key_pending && last_string == "anchors" && stack.size() == 1 &&
          stack.back() == '{') {
        anchors_depth = stack.size() + 1;
      }
      stack.push_back(c);
      key_pending = false;
      continue;
    }
    if (c == ']' || c == '}') {
      if (!stack.empty()) {
        if (stack.size() == anchors_depth) anchors_depth = 0;
        stack.pop_back();
      }
      key_pending = false;
      continue;
    }
    in_scalar = true;
    key_pending = false;
  }
  return lines;
}

inline void reject_unknown_keys(const Json& obj, std::string_view where,
                                std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError(std::string(where) + key + ": unknown field");
    }
  }
}

inline double get_number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw InputError(field + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t get_unsigned(const Json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
  throw InputError(field + ": expected a non-negative integer");
}

inline std::string get_string(const Json& j, const std::string& field) {
  if (!j.is_string()) throw InputError(field + ": expected a string");
  return j.get<std::string>();
}

inline Box parse_box(const Json& j, const std::string& field) {
  if (!j.is_array()) throw InputError(field + ": expected a list of [lo, hi] pairs");
  Box box;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string f = field + "[" + std::to_string(k) + "]";
    if (!j[k].is_array() || j[k].size() != 2) throw InputError(f + ": expected [lo, hi]");
    box.axes.emplace_back(get_number(j[k][0], f), get_number(j[k][1], f));
  }
  return box;
}

}  // namespace detail

/// Parses an instance document. Structural problems raise InputError naming
/// the field (anchor rows also cite their line); parameter values are
/// checked later by the types that own them.
inline InstanceFile parse_instance(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw InputError("malformed JSON at line " +
                     std::to_string(detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                     ": " + e.what());
  }
  if (!doc.is_object()) throw InputError("instance: expected a JSON object");
  detail::reject_unknown_keys(
      doc, "", {"dimension", "anchors", "potential", "testing_plan", "flow", "cluster_radius"});

  InstanceFile inst;
  if (!doc.contains("dimension")) throw InputError("dimension: missing");
  const auto dim = detail::get_unsigned(doc["dimension"], "dimension");
  if (dim < 1) throw InputError("dimension: must be >= 1");
  inst.dimension = static_cast<std::size_t>(dim);

  if (!doc.contains("anchors")) throw InputError("anchors: missing");
  const Json& rows = doc["anchors"];
  if (!rows.is_array() || rows.empty()) throw InputError("anchors: expected a non-empty list");
  const auto lines = detail::anchor_row_lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string where = "anchors[" + std::to_string(i) + "]";
    if (i < lines.size()) where += " (line " + std::to_string(lines[i]) + ")";
    const Json& row = rows[i];
    if (!row.is_array()) throw InputError(where + ": expected a list of coordinates");
    if (row.size() != inst.dimension) {
      throw InputError(where + ": has " + std::to_string(row.size()) +
                       " coordinates, dimension is " + std::to_string(inst.dimension));
    }
    std::vector<double> coords;
    for (const auto& c : row) coords.push_back(detail::get_number(c, where));
    try {
      inst.anchors.emplace_back(std::move(coords));
    } catch (const Error& e) {
      throw InputError(where + ": " + e.what());
    }
  }

  if (!doc.contains("potential")) throw InputError("potential: missing");
  const Json& pot = doc["potential"];
  if (!pot.is_object()) throw InputError("potential: expected an object");
  detail::reject_unknown_keys(pot, "potential.", {"kind", "p", "epsilon", "sigma", "weights"});
  if (!pot.contains("kind")) throw InputError("potential.kind: missing");
  inst.potential.kind = parse_potential_kind(detail::get_string(pot["kind"], "potential.kind"));
  if (pot.contains("p")) inst.potential.p = detail::get_number(pot["p"], "potential.p");
  if (pot.contains("epsilon")) {
    inst.potential.epsilon = detail::get_number(pot["epsilon"], "potential.epsilon");
  }
  if (pot.contains("sigma")) inst.potential.sigma = detail::get_number(pot["sigma"], "potential.sigma");
  if (pot.contains("weights")) {
    const Json& w = pot["weights"];
    if (!w.is_array()) throw InputError("potential.weights: expected a list of numbers");
    for (std::size_t i = 0; i < w.size(); ++i) {
      inst.potential.weights.push_back(
          detail::get_number(w[i], "potential.weights[" + std::to_string(i) + "]"));
    }
  }

  if (doc.contains("testing_plan")) {
    const Json& tp = doc["testing_plan"];
    if (!tp.is_object()) throw InputError("testing_plan: expected an object");
    detail::reject_unknown_keys(tp, "testing_plan.", {"strategy", "count", "domain_box", "seed"});
    PlanOverrides plan;
    if (tp.contains("strategy")) {
      plan.strategy = parse_testing_strategy(
          detail::get_string(tp["strategy"], "testing_plan.strategy"));
    }
    if (tp.contains("count")) {
      plan.count = static_cast<std::size_t>(detail::get_unsigned(tp["count"], "testing_plan.count"));
    }
    if (tp.contains("domain_box")) {
      plan.domain_box = detail::parse_box(tp["domain_box"], "testing_plan.domain_box");
    }
    if (tp.contains("seed")) plan.seed = detail::get_unsigned(tp["seed"], "testing_plan.seed");
    inst.testing_plan = plan;
  }

  if (doc.contains("flow")) {
    const Json& fl = doc["flow"];
    if (!fl.is_object()) throw InputError("flow: expected an object");
    detail::reject_unknown_keys(fl, "flow.", {"grad_tol", "max_steps", "initial_step", "armijo_c",
                                              "backtrack_factor", "min_step"});
    FlowOverrides f;
    auto num = [&](const char* key, std::optional<double>& out) {
      if (fl.contains(key)) out = detail::get_number(fl[key], std::string("flow.") + key);
    };
    num("grad_tol", f.grad_tol);
    num("initial_step", f.initial_step);
    num("armijo_c", f.armijo_c);
    num("backtrack_factor", f.backtrack_factor);
    num("min_step", f.min_step);
    if (fl.contains("max_steps")) {
      const auto steps = detail::get_unsigned(fl["max_steps"], "flow.max_steps");
      if (steps > 1'000'000'000) throw InputError("flow.max_steps: too large");
      f.max_steps = static_cast<int>(steps);
    }
    inst.flow = f;
  }

  if (doc.contains("cluster_radius")) {
    inst.cluster_radius = detail::get_number(doc["cluster_radius"], "cluster_radius");
  }
  return inst;
}

inline InstanceFile read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance(buf.str());
}

namespace detail {

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void print_json(std::string& out, const Json& j, int level) {
  const std::string pad(2 * static_cast<std::size_t>(level + 1), ' ');
  const std::string close_pad(2 * static_cast<std::size_t>(level), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        print_json(out, value, level + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      // Arrays of scalars stay on one line; coordinate lists read better so.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) {
        return e.is_structured();
      });
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += flat ? "[" : "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += flat ? ", " : ",\n";
        if (!flat) out += pad;
        print_json(out, j[i], level + 1);
      }
      out += flat ? "]" : "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

inline Json to_json(const Point& p) { return Json(p.vector()); }

inline Json to_json(const Box& box) {
  Json axes = Json::array();
  for (const auto& [lo, hi] : box.axes) axes.push_back(Json::array({lo, hi}));
  return axes;
}

inline Json to_json(const PotentialSpec& spec) {
  Json j = Json::object();
  j["kind"] = std::string(to_string(spec.kind));
  if (spec.kind == PotentialKind::p_norm || spec.p != 2.0) j["p"] = spec.p;
  if (spec.epsilon) j["epsilon"] = *spec.epsilon;
  if (spec.kind == PotentialKind::gaussian_well || spec.sigma != 1.0) j["sigma"] = spec.sigma;
  if (!spec.weights.empty()) j["weights"] = spec.weights;
  return j;
}

inline Json to_json(const TestingPlan& plan) {
  Json j = Json::object();
  j["strategy"] = std::string(to_string(plan.strategy));
  j["count"] = plan.count;
  j["domain_box"] = to_json(plan.domain_box);
  j["seed"] = plan.seed;
  return j;
}

inline Json to_json(const FlowConfig& cfg) {
  Json j = Json::object();
  j["grad_tol"] = cfg.grad_tol;
  j["max_steps"] = cfg.max_steps;
  j["initial_step"] = cfg.initial_step;
  j["armijo_c"] = cfg.armijo_c;
  j["backtrack_factor"] = cfg.backtrack_factor;
  j["min_step"] = cfg.min_step;
  return j;
}

inline Json to_json(const CriticalPoint& c) {
  Json j = Json::object();
  j["location"] = to_json(c.location);
  j["value"] = c.value;
  j["grad_norm"] = c.grad_norm;
  j["basin_count"] = c.basin_count;
  j["negative_curvature"] = c.negative_curvature;
  return j;
}

inline Json to_json(const SolveDiagnostics& d) {
  Json j = Json::object();
  j["testing_points"] = d.testing_points;
  j["converged"] = d.converged;
  j["stalled"] = d.stalled;
  j["max_steps"] = d.max_steps;
  j["failed"] = d.failed;
  j["clusters"] = d.clusters;
  j["degenerate"] = d.degenerate;
  j["nonsmooth"] = d.nonsmooth;
  return j;
}

}  // namespace detail

/// Pretty-printed JSON with 17 significant digits for every float.
inline std::string print_json(const Json& j) {
  std::string out;
  detail::print_json(out, j, 0);
  out += '\n';
  return out;
}

inline Json instance_to_json(const InstanceFile& inst) {
  Json j = Json::object();
  j["dimension"] = inst.dimension;
  Json rows = Json::array();
  for (const auto& a : inst.anchors) rows.push_back(detail::to_json(a));
  j["anchors"] = rows;
  j["potential"] = detail::to_json(inst.potential);
  if (inst.testing_plan) {
    const auto& tp = *inst.testing_plan;
    Json p = Json::object();
    if (tp.strategy) p["strategy"] = std::string(to_string(*tp.strategy));
    if (tp.count) p["count"] = *tp.count;
    if (tp.domain_box) p["domain_box"] = detail::to_json(*tp.domain_box);
    if (tp.seed) p["seed"] = *tp.seed;
    j["testing_plan"] = p;
  }
  if (inst.flow) {
    const auto& f = *inst.flow;
    Json p = Json::object();
    if (f.grad_tol) p["grad_tol"] = *f.grad_tol;
    if (f.max_steps) p["max_steps"] = *f.max_steps;
    if (f.initial_step) p["initial_step"] = *f.initial_step;
    if (f.armijo_c) p["armijo_c"] = *f.armijo_c;
    if (f.backtrack_factor) p["backtrack_factor"] = *f.backtrack_factor;
    if (f.min_step) p["min_step"] = *f.min_step;
    j["flow"] = p;
  }
  if (inst.cluster_radius) j["cluster_radius"] = *inst.cluster_radius;
  return j;
}

inline std::string serialize_instance(const InstanceFile& inst) {
  return print_json(instance_to_json(inst));
}

/// Everything a solve actually used, after defaults, file and flags.
struct ResolvedConfig {
  std::size_t dimension;
  std::size_t anchor_count;
  PotentialSpec potential;  // epsilon resolved
  TestingPlan plan;         // box resolved
  FlowConfig flow;
  double cluster_radius;
};

inline Json config_to_json(const ResolvedConfig& cfg) {
  Json j = Json::object();
  j["dimension"] = cfg.dimension;
  j["anchor_count"] = cfg.anchor_count;
  j["potential"] = detail::to_json(cfg.potential);
  j["testing_plan"] = detail::to_json(cfg.plan);
  j["flow"] = detail::to_json(cfg.flow);
  j["cluster_radius"] = cfg.cluster_radius;
  return j;
}

inline Json result_to_json(const SteinerResult& result, const ResolvedConfig& cfg) {
  Json j = Json::object();
  Json st = Json::object();
  st["location"] = detail::to_json(result.steiner.location);
  st["value"] = result.steiner.value;
  st["grad_norm"] = result.steiner.grad_norm;
  j["steiner"] = st;
  Json set = Json::array();
  for (const auto& c : result.critical_set) set.push_back(detail::to_json(c));
  j["critical_set"] = set;
  j["diagnostics"] = detail::to_json(result.diagnostics);
  j["config_echo"] = config_to_json(cfg);
  return j;
}

inline Json oracle_to_json(const OracleReport& report) {
  Json j = Json::object();
  j["method"] = std::string(to_string(report.method));
  j["location"] = detail::to_json(report.location);
  j["value"] = report.value;
  if (report.method == OracleMethod::weiszfeld) j["iterations"] = report.iterations;
  if (report.method == OracleMethod::grid) j["cells_scanned"] = report.cells_scanned;
  j["converged"] = report.converged;
  return j;
}

}  // namespace steiner
