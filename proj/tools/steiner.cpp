// steiner: solve, oracle and gradcheck subcommands over instance files.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "steiner/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generalized Steiner point solver"};
  app.require_subcommand(1);

  std::string input, output;

  steiner::SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "enumerate critical points and pick the Steiner point");
  solve->add_option("--input", input, "instance JSON")->required();
  solve->add_option("--output", output, "result JSON")->required();
  solve->add_option("--trace", solve_flags.trace_prefix, "write <PREFIX>.<k>.csv per testing point");
  solve->add_option("--grad-tol", solve_flags.grad_tol, "stopping gradient norm");
  solve->add_option("--starts", solve_flags.starts, "number of testing points")
      ->check(CLI::PositiveNumber);
  solve->add_option("--strategy", solve_flags.strategy, "grid | uniform_random | anchors_jittered");
  solve->add_option("--seed", solve_flags.seed, "testing-point seed");
  solve->add_option("--threads", solve_flags.threads, "parallel traces")->check(CLI::PositiveNumber);

  steiner::OracleFlags oracle_flags;
  std::string method;
  auto* oracle = app.add_subcommand("oracle", "run a reference solver");
  oracle->add_option("method", method, "weiszfeld | centroid | grid")
      ->required()
      ->check(CLI::IsMember({"weiszfeld", "centroid", "grid"}));
  oracle->add_option("--input", input, "instance JSON")->required();
  oracle->add_option("--output", output, "report JSON")->required();
  oracle->add_option("--tol", oracle_flags.tol, "weiszfeld step tolerance");
  oracle->add_option("--spacing", oracle_flags.spacing, "grid spacing");
  oracle->add_option("--threads", oracle_flags.threads, "grid workers")->check(CLI::PositiveNumber);

  steiner::GradcheckOptions check_options;
  std::string report;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gradcheck->set_help_flag("--help", "print this help and exit");  // frees -h for --h
  gradcheck->add_option("--input", input, "instance JSON")->required();
  gradcheck->add_option("--samples", check_options.samples, "sample points")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--h", check_options.h, "finite-difference step (default 1e-5 x box diagonal)");
  gradcheck->add_option("--report", report, "report JSON")->required();
#ifdef STEINER_TEST_HOOKS
  bool corrupt = false;
  gradcheck->add_flag("--corrupt-gradient", corrupt)->group("");
#endif

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : steiner::kExitInput;
  }

  if (*solve) return steiner::cmd_solve(input, output, solve_flags);
  if (*oracle) {
    const auto m = method == "weiszfeld" ? steiner::OracleMethod::weiszfeld
                   : method == "centroid" ? steiner::OracleMethod::centroid
                                          : steiner::OracleMethod::grid;
    return steiner::cmd_oracle(m, input, output, oracle_flags);
  }
#ifdef STEINER_TEST_HOOKS
  if (corrupt) {
    check_options.gradient_hook = [](std::span<double> g) { g[0] *= 1.01; };
  }
#endif
  return steiner::cmd_gradcheck(input, check_options, report);
}
