#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mfteam/acceptance.hpp"
#include "mfteam/convergence.hpp"
#include "mfteam/dp.hpp"
#include "mfteam/errors.hpp"
#include "mfteam/io.hpp"
#include "mfteam/sim.hpp"

namespace {

using namespace mfteam;

enum Exit : int { kOk = 0, kInvalidModel = 1, kIo = 2, kCap = 3, kCheckFailed = 4 };

struct InvalidModel {
  std::string report;
};

ModelSpec load_valid(const std::string& path) {
  ModelSpec model = load_model(path);
  const auto report = validate_model(model);
  if (!report.ok()) throw InvalidModel{report.to_string()};
  return model;
}

std::string number(double v) { return format_double(v); }

void emit(const std::optional<std::string>& out, const nlohmann::json& doc) {
  if (out) {
    write_json(*out, doc);
  } else {
    std::cout << doc.dump(2) << '\n';
  }
}

std::string policy_string(const LocalPolicy& gamma) {
  std::string s;
  for (Action u : gamma.actions()) s += (s.empty() ? "" : " ") + std::to_string(u);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field team control: sharing and decentralized dynamic programs"};
  app.require_subcommand(1);
  unsigned workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = all cores)");

  std::string model_path;
  std::optional<std::string> out_path;
  int agents = 0;
  int grid_res = 0;
  std::uint64_t seed = 0;
  std::size_t reps = 0;

  auto* validate = app.add_subcommand("validate", "Check model admissibility");
  validate->add_option("--model", model_path, "Model JSON")->required();

  auto* solve = app.add_subcommand("solve", "Quantized lifted DP over the 1/nu grid");
  solve->add_option("--model", model_path, "Model JSON")->required();
  solve->add_option("--grid-res", grid_res, "Grid resolution nu")->required()->check(CLI::PositiveNumber);
  solve->add_option("--out", out_path, "Solution JSON (default: stdout)");

  auto* sharing = app.add_subcommand("sharing", "Exact mean-field sharing DP for n agents");
  sharing->add_option("--model", model_path, "Model JSON")->required();
  sharing->add_option("--agents", agents, "Population size n")->required()->check(CLI::PositiveNumber);
  sharing->add_option("--out", out_path, "Solution JSON (default: stdout)");

  bool exact = false;
  bool mc = false;
  auto* gap = app.add_subcommand("gap", "J(g) - J* for the grid strategy");
  gap->add_option("--model", model_path, "Model JSON")->required();
  gap->add_option("--agents", agents, "Population size n")->required()->check(CLI::PositiveNumber);
  gap->add_option("--grid-res", grid_res, "Grid resolution nu")->required()->check(CLI::PositiveNumber);
  auto* exact_flag = gap->add_flag("--exact", exact, "Evaluate J(g) on the exact mean-field chain");
  auto* mc_flag = gap->add_flag("--mc", mc, "Estimate J(g) by simulation");
  exact_flag->excludes(mc_flag);
  gap->add_option("--reps", reps, "Monte Carlo replications")->needs(mc_flag)->check(CLI::PositiveNumber);
  gap->add_option("--seed", seed, "Root seed")->required();

  std::vector<int> agent_list;
  bool follows_n = false;
  std::size_t mc_reps = 10'000;
  auto* convergence = app.add_subcommand("convergence", "Optimality gap table across population sizes");
  convergence->add_option("--model", model_path, "Model JSON")->required();
  convergence->add_option("--agents", agent_list, "Ascending population sizes")
      ->required()
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  auto* grid_opt = convergence->add_option("--grid-res", grid_res, "Fixed grid resolution")->check(CLI::PositiveNumber);
  auto* follows_flag = convergence->add_flag("--grid-follows-n", follows_n, "Use nu = n (default)");
  grid_opt->excludes(follows_flag);
  convergence->add_option("--seed", seed, "Root seed")->required();
  convergence->add_option("--mc-reps", mc_reps, "Replications for Monte Carlo rows")->check(CLI::PositiveNumber);
  convergence->add_option("--out", out_path, "CSV output")->required();

  double p = 0.5;
  auto* deviation = app.add_subcommand("deviation", "E|empirical - p| for i.i.d. Bernoulli(p) samples");
  deviation->add_option("--p", p, "Success probability")->required()->check(CLI::Range(0.0, 1.0));
  deviation->add_option("--agents", agent_list, "Sample sizes")->required()->delimiter(',')->check(CLI::PositiveNumber);
  deviation->add_option("--reps", reps, "Replications")->required()->check(CLI::PositiveNumber);
  deviation->add_option("--seed", seed, "Root seed")->required();

  auto* check = app.add_subcommand("check", "Run the acceptance suite, plus certificates for a model");
  check->add_option("--model", model_path, "Model JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  SolverOptions solver;
  solver.workers = workers;

  try {
    if (*validate) {
      const auto report = validate_model(load_model(model_path));
      std::cout << report.to_string();
      return report.ok() ? kOk : kInvalidModel;
    }

    if (*solve) {
      const auto sol = solve_decentralized_grid(load_valid(model_path), grid_res, solver);
      if (out_path) write_json(*out_path, solution_to_json(sol));
      std::cout << "value " << number(sol.value) << '\n';
      for (std::size_t t = 0; t < sol.policies.size(); ++t) {
        std::cout << "stage " << t + 1 << " policy " << policy_string(sol.policies[t]) << '\n';
      }
      return kOk;
    }

    if (*sharing) {
      const auto sol = solve_sharing(load_valid(model_path), agents, solver);
      if (out_path) {
        write_json(*out_path, solution_to_json(sol));
        std::cout << "J_star " << number(sol.j_star) << '\n';
      } else {
        emit(out_path, solution_to_json(sol));
      }
      return kOk;
    }

    if (*gap) {
      if (!exact && !mc) throw CLI::RequiredError("--exact or --mc");
      if (mc && reps == 0) throw CLI::RequiredError("--reps");
      const ModelSpec model = load_valid(model_path);
      if (exact) {
        const auto g = optimality_gap(model, agents, grid_res, solver);
        std::cout << "J_g " << number(g.j_g) << "\nJ_star " << number(g.j_star) << "\ngap " << number(g.gap) << '\n';
      } else {
        const auto grid = solve_decentralized_grid(model, grid_res, solver);
        const std::uint64_t sub = derive_seed(seed, seed_tag::kGap, static_cast<std::uint64_t>(agents));
        const auto stats = estimate_cost(model, agents, grid.policies, sub, reps, workers);
        const double j_star = solve_sharing(model, agents, solver).j_star;
        std::cout << "J_g " << number(stats.mean) << "\nstderr " << number(stats.std_error) << "\nJ_star "
                  << number(j_star) << "\ngap " << number(stats.mean - j_star) << "\nseed " << sub << '\n';
      }
      return kOk;
    }

    if (*convergence) {
      ConvergenceOptions co;
      if (grid_opt->count() > 0) co.nu.fixed = grid_res;
      co.seed = seed;
      co.mc_reps = mc_reps;
      co.solver = solver;
      const auto table = run_convergence(load_valid(model_path), agent_list, co);
      std::ofstream out(*out_path, std::ios::binary);
      if (!out) throw IoError("cannot write " + *out_path);
      write_csv(out, table);
      out.close();
      if (!out) throw IoError("write failed for " + *out_path);
      try {
        const auto fit = fit_rate(table);
        if (fit.vacuous) {
          std::cout << "rate vacuously satisfied: every gap is zero\n";
        } else {
          std::cout << "slope " << number(fit.slope) << "\nintercept " << number(fit.intercept) << "\nr2 "
                    << number(fit.r2) << '\n';
        }
      } catch (const InvalidArgument& e) {
        std::cout << "no rate fit: " << e.what() << '\n';
      }
      return kOk;
    }

    if (*deviation) {
      const std::vector<double> pmf = {p, 1.0 - p};
      std::cout << "n,mean,stderr,reps,exact,sqrt_n_mean\n";
      for (int n : agent_list) {
        const auto s = iid_deviation(pmf, n, derive_seed(seed, seed_tag::kDeviation, static_cast<std::uint64_t>(n)),
                                     reps, workers)[0];
        const std::string exact_value = n <= 1000 ? number(exact_binomial_deviation(p, n)) : std::string();
        std::cout << n << ',' << number(s.mean) << ',' << number(s.std_error) << ',' << s.reps << ',' << exact_value
                  << ',' << number(std::sqrt(static_cast<double>(n)) * s.mean) << '\n';
      }
      return kOk;
    }

    if (*check) {
      AcceptanceOptions ao;
      ao.workers = workers;
      std::optional<ModelSpec> model;
      if (!model_path.empty()) model = load_valid(model_path);
      bool ok = true;
      for (const auto& r : run_acceptance(ao)) {
        std::cout << format_result(r) << '\n' << std::flush;
        ok = ok && r.passed;
      }
      if (model) {
        for (const auto& r : run_model_checks(*model, ao)) {
          std::cout << format_result(r) << '\n';
          ok = ok && r.passed;
        }
      }
      std::cout << (ok ? "all checks passed\n" : "some checks failed\n");
      return ok ? kOk : kCheckFailed;
    }
  } catch (const InvalidModel& e) {
    std::cerr << "model is not admissible:\n" << e.report;
    return kInvalidModel;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kIo;
  } catch (const CapExceeded& e) {
    std::cerr << "compute cap exceeded: " << e.what() << '\n';
    return kCap;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kIo;
}
