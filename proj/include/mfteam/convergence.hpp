#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfteam/dp.hpp"
#include "mfteam/model.hpp"

namespace mfteam {

/// Grid resolution per population size: nu = n by default, or a fixed value.
struct NuPolicy {
  std::optional<int> fixed;

  [[nodiscard]] int resolve(int n) const { return fixed.value_or(n); }
};

enum class GapMethod { exact, mc };

struct ConvergenceRow {
  int n = 0;
  int nu = 0;
  double j_g = 0.0;
  double j_star = 0.0;  ///< NaN when the sharing DP was out of reach
  double gap = 0.0;
  double gap_sqrt_n = 0.0;
  GapMethod method = GapMethod::exact;
  std::optional<double> std_error;    ///< Monte Carlo rows only
  std::optional<std::uint64_t> seed;  ///< Monte Carlo rows only
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
};

struct ConvergenceOptions {
  NuPolicy nu;
  std::uint64_t seed = 0;
  std::size_t mc_reps = 10'000;
  std::size_t exact_cap = 100'000;  ///< largest |M_n| evaluated exactly
  SolverOptions solver;
};

/// Sub-seed for one (subcommand, n) pair; fixed function of the root seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag, std::uint64_t n);

/// Subcommand tags for derive_seed.
namespace seed_tag {
inline constexpr std::uint64_t kGap = 0x6761700000000000ull;
inline constexpr std::uint64_t kConvergence = 0x636f6e7600000000ull;
inline constexpr std::uint64_t kDeviation = 0x6465760000000000ull;
}  // namespace seed_tag

/**
 * For each n (ascending): solve the grid DP, then compute J(g) exactly when
 * |M_n| <= exact_cap and by Monte Carlo otherwise. J* always comes from the
 * exact sharing DP; rows where it is out of reach carry NaN and do not
 * count towards the fit. Throws Error("no fit-eligible rows") when no row
 * has an exact J*.
 */
[[nodiscard]] ConvergenceTable run_convergence(const ModelSpec& model, std::span<const int> n_list,
                                               const ConvergenceOptions& options);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t rows = 0;
  bool vacuous = false;  ///< every eligible gap was zero
};

/// Least-squares fit of log(gap) against log(n) over exact rows with gap > 1e-12.
[[nodiscard]] RateFit fit_rate(const ConvergenceTable& table);

/// Header `n,nu,J_g,J_star,gap,gap_sqrt_n,method,stderr,seed`; doubles at 17 significant digits.
void write_csv(std::ostream& os, const ConvergenceTable& table);

[[nodiscard]] std::string format_double(double v);

}  // namespace mfteam
