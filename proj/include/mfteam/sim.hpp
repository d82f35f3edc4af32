#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfteam/dp.hpp"
#include "mfteam/model.hpp"
#include "mfteam/rng.hpp"

namespace mfteam {

struct StageRecord {
  std::vector<State> states;
  DistVector mean_field;
  std::vector<Action> actions;
  double cost = 0.0;  ///< (1/n) sum_i l_t(x_i, u_i, m_t)
};

struct SimRun {
  std::uint64_t seed = 0;
  std::size_t rep = 0;
  int n = 0;
  std::vector<StageRecord> stages;  ///< one record per stage t = 1..T
  std::vector<State> final_states;  ///< states at T+1
  double total_cost = 0.0;
};

/// Sample mean, its standard error, and the number of replications.
struct SimStats {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
};

/// Mean and standard error of `samples`, summed pairwise in index order.
[[nodiscard]] SimStats summarize(std::span<const double> samples);

/// Stream tags separating the independent uses of one root seed.
namespace stream {
inline constexpr std::uint64_t kPopulation = 1;
inline constexpr std::uint64_t kOneStep = 2;
inline constexpr std::uint64_t kIid = 3;
}  // namespace stream

/**
 * Index of the first entry whose cumulative mass exceeds u. Round-off that
 * leaves the total slightly below 1 falls back to the last positive entry.
 */
[[nodiscard]] int sample_index(std::span<const double> pmf, double u);

/**
 * Simulates `reps` independent populations of n agents under `strategy`.
 * Each draw is keyed by (seed, rep, stage, agent), so a run is a pure
 * function of (seed, rep) whatever the worker count.
 */
[[nodiscard]] std::vector<SimRun> simulate_population(const ModelSpec& model, int n, const Strategy& strategy,
                                                      std::uint64_t seed, std::size_t reps, unsigned workers = 0);

/// Functional-model variant: each agent draws w ~ p_W and moves to f_t(x, u, w, m).
[[nodiscard]] std::vector<SimRun> simulate_population(const FunctionalModel& model, int n, const Strategy& strategy,
                                                      std::uint64_t seed, std::size_t reps, unsigned workers = 0);

/// Monte Carlo estimate of J(g) without keeping per-run records.
[[nodiscard]] SimStats estimate_cost(const ModelSpec& model, int n, const Strategy& strategy, std::uint64_t seed,
                                     std::size_t reps, unsigned workers = 0);

/// Monte Carlo estimate of E || m_{t+1} - f_t(m, gamma) ||_inf for the agent-wise update.
[[nodiscard]] SimStats one_step_deviation(const ModelSpec& model, int n, std::span<const double> m, Stage t,
                                          const LocalPolicy& gamma, std::uint64_t seed, std::size_t reps,
                                          unsigned workers = 0);

[[nodiscard]] SimStats one_step_deviation(const FunctionalModel& model, int n, std::span<const double> m, Stage t,
                                          const LocalPolicy& gamma, std::uint64_t seed, std::size_t reps,
                                          unsigned workers = 0);

/// Per-symbol Monte Carlo estimate of E | (1/n) #{i : W_i = w} - p(w) | for i.i.d. W_i ~ p.
[[nodiscard]] std::vector<SimStats> iid_deviation(std::span<const double> p, int n, std::uint64_t seed,
                                                  std::size_t reps, unsigned workers = 0);

/// sum_k C(n,k) p^k (1-p)^(n-k) |k/n - p|, summed exactly term by term.
[[nodiscard]] double exact_binomial_deviation(double p, int n);

/// One JSON object per (rep, stage): {"rep", "stage", "mean_field", "cost"}.
void write_trajectory_jsonl(std::ostream& os, std::span<const SimRun> runs);

}  // namespace mfteam
