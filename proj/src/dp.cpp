#include "mfteam/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "mfteam/errors.hpp"
#include "mfteam/parallel.hpp"

namespace mfteam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t checked_product(std::initializer_list<std::size_t> factors, std::size_t cap, const std::string& what) {
  std::size_t p = 1;
  for (std::size_t f : factors) {
    if (f != 0 && p > cap / f) throw CapExceeded(what + " exceeds cap " + std::to_string(cap));
    p *= f;
  }
  if (p > cap) throw CapExceeded(what + " exceeds cap " + std::to_string(cap));
  return p;
}

std::size_t checked_power(std::size_t base, std::size_t exponent, std::size_t cap, const std::string& what) {
  std::size_t p = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (base != 0 && p > cap / base) throw CapExceeded(what + " exceeds cap " + std::to_string(cap));
    p *= base;
  }
  return p;
}

/**
 * Count-space lattice for pushing agents one at a time into destination
 * states. Level j holds the compositions of j into d parts; succ_[j] maps
 * (composition at level j, destination y) to its index at level j + 1.
 */
class CountLattice {
 public:
  CountLattice(int n, int d, std::size_t cap) : n_(n), d_(d), top_(n, d, cap) {
    if (empirical_count(n, d + 1) > cap) {
      throw CapExceeded("mean-field lattice for n=" + std::to_string(n) + " exceeds cap " + std::to_string(cap));
    }
    succ_.resize(static_cast<std::size_t>(n));
    CompositionIndex level(0, d, cap);
    for (int j = 0; j < n; ++j) {
      CompositionIndex next(j + 1, d, cap);
      auto& table = succ_[static_cast<std::size_t>(j)];
      table.resize(level.size() * static_cast<std::size_t>(d));
      std::vector<int> c(static_cast<std::size_t>(d));
      for (std::size_t i = 0; i < level.size(); ++i) {
        const auto src = level.counts(i);
        for (int y = 0; y < d; ++y) {
          std::copy(src.begin(), src.end(), c.begin());
          ++c[static_cast<std::size_t>(y)];
          table[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(y)] = next.rank(c);
        }
      }
      level = std::move(next);
    }
  }

  [[nodiscard]] const CompositionIndex& top() const { return top_; }

  /// Law of the destination counts when group k has group_sizes[k] agents,
  /// each moving independently with pmf rows[k]. Negative round-off in a
  /// row is treated as zero.
  [[nodiscard]] std::vector<double> push(std::span<const int> group_sizes,
                                         std::span<const std::vector<double>> rows) const {
    std::vector<double> law{1.0};
    std::vector<double> next;
    int level = 0;
    for (std::size_t k = 0; k < group_sizes.size(); ++k) {
      const auto& row = rows[k];
      for (int a = 0; a < group_sizes[k]; ++a) {
        const auto& table = succ_[static_cast<std::size_t>(level)];
        next.assign(static_cast<std::size_t>(empirical_count(level + 1, d_)), 0.0);
        for (std::size_t i = 0; i < law.size(); ++i) {
          const double p = law[i];
          if (p == 0.0) continue;
          for (int y = 0; y < d_; ++y) {
            const double q = row[static_cast<std::size_t>(y)];
            if (q <= 0.0) continue;
            next[table[i * static_cast<std::size_t>(d_) + static_cast<std::size_t>(y)]] += p * q;
          }
        }
        law.swap(next);
        ++level;
      }
    }
    if (level != n_) throw InvalidArgument("CountLattice::push: group sizes do not sum to n");
    return law;
  }

 private:
  int n_;
  int d_;
  CompositionIndex top_;
  std::vector<std::vector<std::size_t>> succ_;
};

std::vector<int> counts_of(std::span<const double> m, int n) {
  std::vector<int> counts(m.size());
  int total = 0;
  for (std::size_t x = 0; x < m.size(); ++x) {
    const double scaled = m[x] * n;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > kDistTolerance * n || rounded < 0) {
      throw InvalidArgument("mean-field is not an empirical distribution for population " + std::to_string(n));
    }
    counts[x] = static_cast<int>(rounded);
    total += counts[x];
  }
  if (total != n) throw InvalidArgument("mean-field counts do not sum to " + std::to_string(n));
  return counts;
}

std::vector<double> transition_law(const ModelSpec& model, const CountLattice& lattice, std::span<const int> counts,
                                   std::span<const double> m, Stage t, const LocalPolicy& gamma) {
  const int nx = model.num_states();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(nx));
  for (State x = 0; x < nx; ++x) {
    if (counts[static_cast<std::size_t>(x)] > 0) rows[static_cast<std::size_t>(x)] = kernel_eval(model, t, x, gamma(x), m);
  }
  return lattice.push(counts, rows);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_population(int n) {
  if (n < 1) throw InvalidArgument("population size must be positive");
}

}  // namespace

std::vector<double> next_meanfield_distribution(const ModelSpec& model, int n, std::span<const double> m, Stage t,
                                                const LocalPolicy& gamma, const SolverOptions& options) {
  check_population(n);
  if (m.size() != static_cast<std::size_t>(model.num_states())) throw std::out_of_range("mean-field dimension mismatch");
  const auto counts = counts_of(m, n);
  const CountLattice lattice(n, model.num_states(), options.enumeration_cap);
  return transition_law(model, lattice, counts, m, t, gamma);
}

std::vector<double> initial_meanfield_distribution(const ModelSpec& model, int n, const SolverOptions& options) {
  check_population(n);
  const CountLattice lattice(n, model.num_states(), options.enumeration_cap);
  const std::vector<int> sizes{n};
  const std::vector<std::vector<double>> rows{{model.initial_dist().begin(), model.initial_dist().end()}};
  return lattice.push(sizes, rows);
}

// ---------------------------------------------------------------------------

SharingSolution solve_sharing(const ModelSpec& model, int n, const SolverOptions& options) {
  check_population(n);
  const int nx = model.num_states();
  const auto T = static_cast<std::size_t>(model.horizon());
  const CountLattice lattice(n, nx, options.enumeration_cap);
  const auto& index = lattice.top();
  const auto policies = enumerate_policies(nx, model.num_actions(), options.policy_cap);
  const std::size_t K = index.size();
  checked_product({K, policies.size(), T}, options.work_cap, "sharing DP work |M_n| |G| T");

  SharingSolution sol;
  sol.n = n;
  sol.points.reserve(K);
  for (std::size_t r = 0; r < K; ++r) sol.points.push_back(index.point(r));
  sol.value.assign(T + 1, std::vector<double>(K, 0.0));
  sol.policy.assign(T, std::vector<std::size_t>(K, 0));

  for (std::size_t ts = T; ts-- > 0;) {
    const auto t = static_cast<Stage>(ts);
    const auto& next_value = sol.value[ts + 1];
    auto& value = sol.value[ts];
    auto& policy = sol.policy[ts];
    parallel_for(K, options.workers, [&](std::size_t r) {
      const auto counts = index.counts(r);
      const auto& m = sol.points[r].values;
      double best = kInf;
      std::size_t best_index = 0;
      for (const auto& gamma : policies) {
        double v = lift_cost(model, t, m, gamma);
        if (ts + 1 < T) v += dot(transition_law(model, lattice, counts, m, t, gamma), next_value);
        if (v < best) {
          best = v;
          best_index = gamma.index();
        }
      }
      value[r] = best;
      policy[r] = best_index;
    });
  }

  const std::vector<int> sizes{n};
  const std::vector<std::vector<double>> rows{{model.initial_dist().begin(), model.initial_dist().end()}};
  sol.j_star = dot(lattice.push(sizes, rows), sol.value[0]);
  return sol;
}

double brute_force_sharing_value(const ModelSpec& model, int n, const SolverOptions& options) {
  check_population(n);
  const int nx = model.num_states();
  const auto T = static_cast<std::size_t>(model.horizon());
  const CountLattice lattice(n, nx, options.enumeration_cap);
  const auto& index = lattice.top();
  const auto policies = enumerate_policies(nx, model.num_actions(), options.policy_cap);
  const std::size_t K = index.size();
  const std::size_t G = policies.size();
  const std::size_t strategies = checked_power(G, K * T, options.brute_force_cap, "brute-force strategy count");

  // cost[t][r][g] and law[t][r][g] for every decision slot.
  std::vector<double> cost(T * K * G);
  std::vector<std::vector<double>> law(T * K * G);
  for (std::size_t ts = 0; ts < T; ++ts) {
    for (std::size_t r = 0; r < K; ++r) {
      const auto m = index.point(r);
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t slot = (ts * K + r) * G + g;
        cost[slot] = lift_cost(model, static_cast<Stage>(ts), m.values, policies[g]);
        law[slot] = transition_law(model, lattice, index.counts(r), m.values, static_cast<Stage>(ts), policies[g]);
      }
    }
  }
  const std::vector<int> sizes{n};
  const std::vector<std::vector<double>> rows{{model.initial_dist().begin(), model.initial_dist().end()}};
  const auto initial = lattice.push(sizes, rows);

  double best = kInf;
  std::vector<std::size_t> choice(T * K);
  std::vector<double> pmf(K), next(K);
  for (std::size_t s = 0; s < strategies; ++s) {
    std::size_t code = s;
    for (auto& c : choice) {
      c = code % G;
      code /= G;
    }
    pmf = initial;
    double total = 0.0;
    for (std::size_t ts = 0; ts < T; ++ts) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t r = 0; r < K; ++r) {
        if (pmf[r] == 0.0) continue;
        const std::size_t slot = (ts * K + r) * G + choice[ts * K + r];
        total += pmf[r] * cost[slot];
        const auto& l = law[slot];
        for (std::size_t q = 0; q < K; ++q) next[q] += pmf[r] * l[q];
      }
      pmf.swap(next);
    }
    best = std::min(best, total);
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

struct TreeBest {
  double value = kInf;
  std::vector<std::size_t> sequence;
};

TreeBest tree_search(const ModelSpec& model, const std::vector<LocalPolicy>& policies, Stage t,
                     std::span<const double> z) {
  if (t == model.horizon()) return {0.0, {}};
  TreeBest best;
  for (const auto& gamma : policies) {
    const double c = lift_cost(model, t, z, gamma);
    const auto next = lift_dynamics(model, t, z, gamma);
    TreeBest rest = tree_search(model, policies, t + 1, next);
    const double v = c + rest.value;
    if (v < best.value) {
      best.value = v;
      best.sequence.clear();
      best.sequence.push_back(gamma.index());
      best.sequence.insert(best.sequence.end(), rest.sequence.begin(), rest.sequence.end());
    }
  }
  return best;
}

}  // namespace

DecentralizedSolution solve_decentralized_tree(const ModelSpec& model, const SolverOptions& options) {
  return solve_decentralized_tree(model, 0, model.initial_dist(), options);
}

DecentralizedSolution solve_decentralized_tree(const ModelSpec& model, Stage start, std::span<const double> z,
                                               const SolverOptions& options) {
  if (start < 0 || start > model.horizon()) throw std::out_of_range("tree search: start stage out of range");
  if (z.size() != static_cast<std::size_t>(model.num_states())) throw std::out_of_range("tree search: dimension mismatch");
  const auto policies = enumerate_policies(model.num_states(), model.num_actions(), options.policy_cap);
  checked_power(policies.size(), static_cast<std::size_t>(model.horizon() - start), options.tree_cap,
                "policy sequence count |G|^T");

  const TreeBest best = tree_search(model, policies, start, z);
  DecentralizedSolution sol;
  sol.mode = SolveMode::exact_tree;
  sol.value = best.value;
  sol.trajectory.emplace_back(z.begin(), z.end());
  Stage t = start;
  for (std::size_t idx : best.sequence) {
    const auto& gamma = policies[idx];
    sol.policies.push_back(gamma);
    sol.trajectory.push_back(lift_dynamics(model, t, sol.trajectory.back(), gamma));
    ++t;
  }
  return sol;
}

DecentralizedSolution solve_decentralized_grid(const ModelSpec& model, int nu, const SolverOptions& options) {
  const int nx = model.num_states();
  const auto T = static_cast<std::size_t>(model.horizon());
  const GridIndex grid(nu, nx, options.enumeration_cap);
  const auto policies = enumerate_policies(nx, model.num_actions(), options.policy_cap);
  const std::size_t size = grid.size();
  checked_product({size, policies.size(), T}, options.work_cap, "grid DP work |Q_nu| |G| T");

  DecentralizedSolution sol;
  sol.mode = SolveMode::grid;
  sol.nu = nu;
  sol.value_tables.assign(T + 1, std::vector<double>(size, 0.0));
  sol.policy_tables.assign(T, std::vector<std::size_t>(size, 0));

  for (std::size_t ts = T; ts-- > 0;) {
    const auto t = static_cast<Stage>(ts);
    const auto& next_value = sol.value_tables[ts + 1];
    auto& value = sol.value_tables[ts];
    auto& policy = sol.policy_tables[ts];
    parallel_for(size, options.workers, [&](std::size_t i) {
      const auto z = grid.point(i);
      double best = kInf;
      std::size_t best_index = 0;
      for (const auto& gamma : policies) {
        double v = lift_cost(model, t, z.values, gamma);
        if (ts + 1 < T) v += next_value[grid.rank(quantize_coords(lift_dynamics(model, t, z.values, gamma), nu))];
        if (v < best) {
          best = v;
          best_index = gamma.index();
        }
      }
      value[i] = best;
      policy[i] = best_index;
    });
  }

  auto coords = quantize_coords(model.initial_dist(), nu);
  std::size_t at = grid.rank(coords);
  sol.value = sol.value_tables[0][at];
  sol.trajectory.push_back(grid.point(at).values);
  for (std::size_t ts = 0; ts < T; ++ts) {
    const auto gamma = LocalPolicy::from_index(sol.policy_tables[ts][at], nx, model.num_actions());
    coords = quantize_coords(lift_dynamics(model, static_cast<Stage>(ts), sol.trajectory.back(), gamma), nu);
    at = grid.rank(coords);
    sol.policies.push_back(gamma);
    sol.trajectory.push_back(grid.point(at).values);
  }
  return sol;
}

// ---------------------------------------------------------------------------

double evaluate_strategy_exact(const ModelSpec& model, int n, const Strategy& strategy, const SolverOptions& options) {
  check_population(n);
  const int nx = model.num_states();
  const auto T = static_cast<std::size_t>(model.horizon());
  const CountLattice lattice(n, nx, options.enumeration_cap);
  const auto& index = lattice.top();
  const std::size_t K = index.size();

  auto policy_at = [&](std::size_t ts, std::size_t r) -> LocalPolicy {
    if (const auto* seq = std::get_if<PolicySequence>(&strategy)) return (*seq)[ts];
    const auto& table = std::get<FeedbackTable>(strategy);
    return LocalPolicy::from_index(table.policy[ts][r], nx, model.num_actions());
  };
  if (const auto* seq = std::get_if<PolicySequence>(&strategy)) {
    if (seq->size() != T) throw InvalidArgument("policy sequence length differs from the horizon");
    for (const auto& g : *seq) {
      if (g.num_states() != nx) throw InvalidArgument("policy sequence has the wrong number of states");
    }
  } else {
    const auto& table = std::get<FeedbackTable>(strategy);
    if (table.n != n || table.policy.size() != T ||
        std::any_of(table.policy.begin(), table.policy.end(), [&](const auto& p) { return p.size() != K; })) {
      throw InvalidArgument("feedback table shape does not match population and horizon");
    }
  }

  const std::vector<int> sizes{n};
  const std::vector<std::vector<double>> rows{{model.initial_dist().begin(), model.initial_dist().end()}};
  std::vector<double> pmf = lattice.push(sizes, rows);

  // Laws are materialized per block of source points to bound memory.
  constexpr std::size_t kBlock = 512;
  std::vector<double> stage_costs(T, 0.0);
  std::vector<double> per_point(K);
  std::vector<std::vector<double>> laws(std::min(K, kBlock));
  for (std::size_t ts = 0; ts < T; ++ts) {
    const bool last = ts + 1 == T;
    std::vector<double> next(last ? 0 : K, 0.0);
    for (std::size_t begin = 0; begin < K; begin += kBlock) {
      const std::size_t count = std::min(kBlock, K - begin);
      parallel_for(count, options.workers, [&](std::size_t j) {
        const std::size_t r = begin + j;
        per_point[r] = 0.0;
        laws[j].clear();
        if (pmf[r] == 0.0) return;
        const auto m = index.point(r);
        const auto gamma = policy_at(ts, r);
        per_point[r] = pmf[r] * lift_cost(model, static_cast<Stage>(ts), m.values, gamma);
        if (!last) laws[j] = transition_law(model, lattice, index.counts(r), m.values, static_cast<Stage>(ts), gamma);
      });
      if (last) continue;
      for (std::size_t j = 0; j < count; ++j) {
        const auto& law = laws[j];
        if (law.empty()) continue;
        const double w = pmf[begin + j];
        for (std::size_t q = 0; q < K; ++q) next[q] += w * law[q];
      }
    }
    stage_costs[ts] = pairwise_sum(per_point);
    if (!last) pmf.swap(next);
  }
  return pairwise_sum(stage_costs);
}

GapRecord optimality_gap(const ModelSpec& model, int n, int nu, const SolverOptions& options) {
  const auto grid = solve_decentralized_grid(model, nu, options);
  GapRecord g;
  g.j_g = evaluate_strategy_exact(model, n, grid.policies, options);
  g.j_star = solve_sharing(model, n, options).j_star;
  g.gap = g.j_g - g.j_star;
  return g;
}

}  // namespace mfteam
