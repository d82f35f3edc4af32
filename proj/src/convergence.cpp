#include "mfteam/convergence.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mfteam/errors.hpp"
#include "mfteam/rng.hpp"
#include "mfteam/sim.hpp"

namespace mfteam {

namespace {

constexpr double kGapFloor = 1e-12;

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag, std::uint64_t n) {
  return splitmix64(splitmix64(root ^ tag) + n);
}

ConvergenceTable run_convergence(const ModelSpec& model, std::span<const int> n_list,
                                 const ConvergenceOptions& options) {
  if (n_list.empty()) throw InvalidArgument("run_convergence: empty population list");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1) throw InvalidArgument("run_convergence: population sizes must be positive");
    if (i > 0 && n_list[i] <= n_list[i - 1]) throw InvalidArgument("run_convergence: population list must be ascending");
  }

  ConvergenceTable table;
  bool any_exact_star = false;
  for (int n : n_list) {
    ConvergenceRow row;
    row.n = n;
    row.nu = options.nu.resolve(n);
    if (row.nu < 1) throw InvalidArgument("run_convergence: grid resolution must be positive");
    const auto grid = solve_decentralized_grid(model, row.nu, options.solver);

    const bool exact = empirical_count(n, model.num_states()) <= options.exact_cap;
    if (exact) {
      row.method = GapMethod::exact;
      row.j_g = evaluate_strategy_exact(model, n, grid.policies, options.solver);
    } else {
      row.method = GapMethod::mc;
      row.seed = derive_seed(options.seed, seed_tag::kConvergence, static_cast<std::uint64_t>(n));
      const SimStats stats = estimate_cost(model, n, grid.policies, *row.seed, options.mc_reps, options.solver.workers);
      row.j_g = stats.mean;
      row.std_error = stats.std_error;
    }

    try {
      row.j_star = solve_sharing(model, n, options.solver).j_star;
      any_exact_star = true;
    } catch (const CapExceeded&) {
      row.j_star = std::numeric_limits<double>::quiet_NaN();
    }
    row.gap = row.j_g - row.j_star;
    row.gap_sqrt_n = row.gap * std::sqrt(static_cast<double>(n));
    table.rows.push_back(row);
  }
  if (!any_exact_star) throw Error("no fit-eligible rows");
  return table;
}

RateFit fit_rate(const ConvergenceTable& table) {
  std::vector<double> xs, ys;
  std::size_t exact_rows = 0;
  for (const auto& row : table.rows) {
    if (row.method != GapMethod::exact || std::isnan(row.gap)) continue;
    ++exact_rows;
    if (row.gap > kGapFloor) {
      xs.push_back(std::log(static_cast<double>(row.n)));
      ys.push_back(std::log(row.gap));
    }
  }
  RateFit fit;
  fit.rows = xs.size();
  if (xs.empty() && exact_rows >= 1) {
    fit.vacuous = true;
    return fit;
  }
  if (xs.size() < 3) throw InvalidArgument("fit_rate: need at least 3 exact rows with a positive gap");

  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const ConvergenceTable& table) {
  os << "n,nu,J_g,J_star,gap,gap_sqrt_n,method,stderr,seed\n";
  for (const auto& r : table.rows) {
    os << r.n << ',' << r.nu << ',' << format_double(r.j_g) << ',' << format_double(r.j_star) << ','
       << format_double(r.gap) << ',' << format_double(r.gap_sqrt_n) << ','
       << (r.method == GapMethod::exact ? "exact" : "mc") << ','
       << (r.std_error ? format_double(*r.std_error) : std::string()) << ','
       << (r.seed ? std::to_string(*r.seed) : std::string()) << '\n';
  }
}

}  // namespace mfteam
