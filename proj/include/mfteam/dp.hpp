#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "mfteam/lift.hpp"
#include "mfteam/model.hpp"
#include "mfteam/simplex.hpp"

namespace mfteam {

/// Compute caps and parallelism shared by all solvers. Exceeding a cap throws CapExceeded.
struct SolverOptions {
  std::size_t enumeration_cap = kDefaultEnumerationCap;  ///< |M_n| and |Q_nu|
  std::size_t policy_cap = kDefaultPolicyCap;            ///< |U|^|X|
  std::size_t work_cap = 1'000'000'000;                  ///< (point, policy, stage) triples per DP
  std::size_t tree_cap = 10'000'000;                     ///< |G|^T policy sequences
  std::size_t brute_force_cap = 1'000'000;               ///< |G|^(|M_n| T) strategy tables
  unsigned workers = 0;                                  ///< 0 = hardware concurrency
};

/// One local policy per stage, applied regardless of the realized mean-field.
using PolicySequence = std::vector<LocalPolicy>;

/// Mean-field feedback: policy[t][r] is the policy index used at stage t when
/// the mean-field is the r-th point of M_n (CompositionIndex order).
struct FeedbackTable {
  int n = 0;
  std::vector<std::vector<std::size_t>> policy;
};

using Strategy = std::variant<PolicySequence, FeedbackTable>;

enum class SolveMode { exact_tree, grid };

struct DecentralizedSolution {
  SolveMode mode = SolveMode::exact_tree;
  int nu = 0;                                     ///< grid resolution, 0 in tree mode
  std::vector<std::vector<double>> trajectory;    ///< z_1 .. z_{T+1}
  PolicySequence policies;                        ///< psi_t evaluated along the trajectory
  double value = 0.0;                             ///< lifted value at z_1 (or its grid point)
  std::vector<std::vector<double>> value_tables;  ///< grid mode: T+1 tables over Q_nu
  std::vector<std::vector<std::size_t>> policy_tables;  ///< grid mode: T argmin tables
};

struct SharingSolution {
  int n = 0;
  std::vector<DistVector> points;                 ///< M_n in CompositionIndex order
  std::vector<std::vector<double>> value;         ///< T+1 tables, value[T] == 0
  std::vector<std::vector<std::size_t>> policy;   ///< T argmin tables (policy indices)
  double j_star = 0.0;

  [[nodiscard]] FeedbackTable strategy() const { return {n, policy}; }
};

struct GapRecord {
  double j_g = 0.0;
  double j_star = 0.0;
  double gap = 0.0;
};

/**
 * Exact law of m_{t+1} given m_t = m (population n) when every agent applies
 * gamma. Entry r is the probability of the r-th point of M_n.
 */
[[nodiscard]] std::vector<double> next_meanfield_distribution(const ModelSpec& model, int n,
                                                              std::span<const double> m, Stage t,
                                                              const LocalPolicy& gamma,
                                                              const SolverOptions& options = {});

/// Law of m_1 when the n initial states are i.i.d. with pmf initial_dist.
[[nodiscard]] std::vector<double> initial_meanfield_distribution(const ModelSpec& model, int n,
                                                                 const SolverOptions& options = {});

/// Backward induction over M_n; ties go to the lowest policy index.
[[nodiscard]] SharingSolution solve_sharing(const ModelSpec& model, int n, const SolverOptions& options = {});

/// Minimum over every table (t, m) -> gamma of the exact expected cost. Tiny instances only.
[[nodiscard]] double brute_force_sharing_value(const ModelSpec& model, int n, const SolverOptions& options = {});

/// Exhaustive search over policy sequences along the deterministic lifted flow from initial_dist.
[[nodiscard]] DecentralizedSolution solve_decentralized_tree(const ModelSpec& model, const SolverOptions& options = {});

/// Same search starting at stage `start` from an arbitrary point z.
[[nodiscard]] DecentralizedSolution solve_decentralized_tree(const ModelSpec& model, Stage start,
                                                             std::span<const double> z,
                                                             const SolverOptions& options = {});

/// Quantized lifted DP over Q_nu, followed by a forward pass from quantize(z_1).
[[nodiscard]] DecentralizedSolution solve_decentralized_grid(const ModelSpec& model, int nu,
                                                             const SolverOptions& options = {});

/// Exact expected total cost of a homogeneous strategy for population n.
[[nodiscard]] double evaluate_strategy_exact(const ModelSpec& model, int n, const Strategy& strategy,
                                             const SolverOptions& options = {});

/// J(g) of the grid-DP strategy, J* of the sharing DP, and their difference.
[[nodiscard]] GapRecord optimality_gap(const ModelSpec& model, int n, int nu, const SolverOptions& options = {});

}  // namespace mfteam
