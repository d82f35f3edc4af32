#include "mfteam/sim.hpp"

#include <cmath>
#include <optional>
#include <ostream>

#include "json.hpp"

#include "mfteam/errors.hpp"
#include "mfteam/parallel.hpp"

namespace mfteam {

namespace {

// Counter layout: a = agent, b = draw slot. Slot 0 is the initial state;
// slot t + 1 is the transition out of stage t.
constexpr std::uint64_t initial_slot() { return 0; }
constexpr std::uint64_t transition_slot(Stage t) { return static_cast<std::uint64_t>(t) + 1; }

class PolicyLookup {
 public:
  PolicyLookup(const Strategy& strategy, int n, int num_states, int num_actions, int horizon)
      : strategy_(strategy), nx_(num_states), nu_(num_actions) {
    if (const auto* seq = std::get_if<PolicySequence>(&strategy)) {
      if (seq->size() != static_cast<std::size_t>(horizon)) throw InvalidArgument("policy sequence length differs from the horizon");
      for (const auto& g : *seq) {
        if (g.num_states() != num_states) throw InvalidArgument("policy sequence has the wrong number of states");
      }
    } else {
      const auto& table = std::get<FeedbackTable>(strategy);
      index_.emplace(n, num_states);
      if (table.n != n || table.policy.size() != static_cast<std::size_t>(horizon)) {
        throw InvalidArgument("feedback table shape does not match population and horizon");
      }
      for (const auto& stage : table.policy) {
        if (stage.size() != index_->size()) throw InvalidArgument("feedback table has the wrong number of mean-fields");
      }
    }
  }

  [[nodiscard]] LocalPolicy at(Stage t, std::span<const int> counts) const {
    if (const auto* seq = std::get_if<PolicySequence>(&strategy_)) return (*seq)[static_cast<std::size_t>(t)];
    const auto& table = std::get<FeedbackTable>(strategy_);
    return LocalPolicy::from_index(table.policy[static_cast<std::size_t>(t)][index_->rank(counts)], nx_, nu_);
  }

 private:
  const Strategy& strategy_;
  int nx_;
  int nu_;
  std::optional<CompositionIndex> index_;
};

std::vector<int> count_states(std::span<const State> states, int nx) {
  std::vector<int> counts(static_cast<std::size_t>(nx), 0);
  for (State s : states) ++counts[static_cast<std::size_t>(s)];
  return counts;
}

// Agents sorted by state: the first counts[0] agents are in state 0, and so on.
std::vector<State> states_from_counts(std::span<const int> counts) {
  std::vector<State> states;
  for (std::size_t x = 0; x < counts.size(); ++x) states.insert(states.end(), static_cast<std::size_t>(counts[x]), static_cast<State>(x));
  return states;
}

std::vector<int> counts_from_mean_field(std::span<const double> m, int n) {
  std::vector<int> counts(m.size());
  int total = 0;
  for (std::size_t x = 0; x < m.size(); ++x) {
    const double scaled = m[x] * n;
    counts[x] = static_cast<int>(std::lround(scaled));
    if (std::abs(scaled - counts[x]) > kDistTolerance * n || counts[x] < 0) {
      throw InvalidArgument("mean-field is not an empirical distribution for population " + std::to_string(n));
    }
    total += counts[x];
  }
  if (total != n) throw InvalidArgument("mean-field counts do not sum to the population");
  return counts;
}

// Model-specific pieces used by the shared simulation loop.
struct KernelStepper {
  const ModelSpec& model;

  [[nodiscard]] int num_states() const { return model.num_states(); }
  [[nodiscard]] int num_actions() const { return model.num_actions(); }
  [[nodiscard]] int horizon() const { return model.horizon(); }
  [[nodiscard]] std::span<const double> initial() const { return model.initial_dist(); }
  [[nodiscard]] double cost(Stage t, State x, Action u, std::span<const double> m) const {
    return cost_eval(model, t, x, u, m);
  }

  // Moves every agent; rows are shared by all agents in the same state.
  void step(Stage t, const LocalPolicy& gamma, std::span<const double> m, std::span<const State> states,
            std::span<State> next, const CounterRng& rng) const {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(model.num_states()));
    for (std::size_t i = 0; i < states.size(); ++i) {
      const State x = states[i];
      auto& row = rows[static_cast<std::size_t>(x)];
      if (row.empty()) row = kernel_eval(model, t, x, gamma(x), m);
      next[i] = sample_index(row, rng.uniform(i, transition_slot(t)));
    }
  }
};

struct FunctionalStepper {
  const FunctionalModel& model;

  [[nodiscard]] int num_states() const { return model.num_states; }
  [[nodiscard]] int num_actions() const { return model.num_actions; }
  [[nodiscard]] int horizon() const { return model.horizon; }
  [[nodiscard]] std::span<const double> initial() const { return model.initial_dist; }
  [[nodiscard]] double cost(Stage t, State x, Action u, std::span<const double> m) const {
    return model.cost(t, x, u, m);
  }

  void step(Stage t, const LocalPolicy& gamma, std::span<const double> m, std::span<const State> states,
            std::span<State> next, const CounterRng& rng) const {
    for (std::size_t i = 0; i < states.size(); ++i) {
      const State x = states[i];
      const int w = sample_index(model.noise_pmf, rng.uniform(i, transition_slot(t)));
      const State y = model.dynamics(t, x, gamma(x), w, m);
      if (y < 0 || y >= model.num_states) throw std::out_of_range("functional dynamics returned an invalid state");
      next[i] = y;
    }
  }
};

template <class Stepper>
SimRun run_once(const Stepper& stepper, const PolicyLookup& lookup, int n, std::uint64_t seed, std::size_t rep,
                bool keep_records) {
  const CounterRng rng = CounterRng(seed).split(stream::kPopulation).split(rep);
  const int nx = stepper.num_states();
  SimRun run;
  run.seed = seed;
  run.rep = rep;
  run.n = n;

  std::vector<State> states(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = sample_index(stepper.initial(), rng.uniform(i, initial_slot()));
  std::vector<State> next(states.size());
  std::vector<double> stage_costs;

  for (Stage t = 0; t < stepper.horizon(); ++t) {
    const auto counts = count_states(states, nx);
    const DistVector m = empirical_from_counts(counts);
    const LocalPolicy gamma = lookup.at(t, counts);
    double cost = 0.0;
    std::vector<Action> actions(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      actions[i] = gamma(states[i]);
      cost += stepper.cost(t, states[i], actions[i], m.values);
    }
    cost /= n;
    stage_costs.push_back(cost);
    stepper.step(t, gamma, m.values, states, next, rng);
    if (keep_records) run.stages.push_back({states, m, std::move(actions), cost});
    states.swap(next);
  }
  run.final_states = std::move(states);
  run.total_cost = pairwise_sum(stage_costs);
  return run;
}

template <class Stepper>
std::vector<SimRun> simulate(const Stepper& stepper, int n, const Strategy& strategy, std::uint64_t seed,
                             std::size_t reps, unsigned workers) {
  if (n < 1) throw InvalidArgument("population size must be positive");
  if (reps < 1) throw InvalidArgument("need at least one replication");
  const PolicyLookup lookup(strategy, n, stepper.num_states(), stepper.num_actions(), stepper.horizon());
  std::vector<SimRun> runs(reps);
  parallel_for(reps, workers, [&](std::size_t r) { runs[r] = run_once(stepper, lookup, n, seed, r, true); });
  return runs;
}

template <class Stepper>
SimStats deviation(const Stepper& stepper, int n, std::span<const double> m, Stage t, const LocalPolicy& gamma,
                   std::uint64_t seed, std::size_t reps, unsigned workers, const std::vector<double>& target) {
  if (n < 1) throw InvalidArgument("population size must be positive");
  if (reps < 1) throw InvalidArgument("need at least one replication");
  if (t < 0 || t >= stepper.horizon()) throw std::out_of_range("stage index out of range");
  const auto counts = counts_from_mean_field(m, n);
  const auto states = states_from_counts(counts);
  const CounterRng base = CounterRng(seed).split(stream::kOneStep);
  std::vector<double> samples(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    std::vector<State> next(states.size());
    stepper.step(t, gamma, m, states, next, base.split(r));
    const auto realized = empirical_from_counts(count_states(next, stepper.num_states()));
    samples[r] = linf(realized.values, target);
  });
  return summarize(samples);
}

}  // namespace

SimStats summarize(std::span<const double> samples) {
  SimStats s;
  s.reps = samples.size();
  if (samples.empty()) return s;
  s.mean = pairwise_sum(samples) / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - s.mean) * (samples[i] - s.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(samples.size() - 1);
    s.std_error = std::sqrt(var / static_cast<double>(samples.size()));
  }
  return s;
}

int sample_index(std::span<const double> pmf, double u) {
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t y = 0; y < pmf.size(); ++y) {
    if (pmf[y] <= 0.0) continue;
    last_positive = static_cast<int>(y);
    cum += pmf[y];
    if (u < cum) return static_cast<int>(y);
  }
  if (last_positive < 0) throw InvalidArgument("sample_index: pmf has no positive mass");
  return last_positive;
}

std::vector<SimRun> simulate_population(const ModelSpec& model, int n, const Strategy& strategy, std::uint64_t seed,
                                        std::size_t reps, unsigned workers) {
  return simulate(KernelStepper{model}, n, strategy, seed, reps, workers);
}

std::vector<SimRun> simulate_population(const FunctionalModel& model, int n, const Strategy& strategy,
                                        std::uint64_t seed, std::size_t reps, unsigned workers) {
  model.validate();
  return simulate(FunctionalStepper{model}, n, strategy, seed, reps, workers);
}

SimStats estimate_cost(const ModelSpec& model, int n, const Strategy& strategy, std::uint64_t seed, std::size_t reps,
                       unsigned workers) {
  if (n < 1) throw InvalidArgument("population size must be positive");
  if (reps < 1) throw InvalidArgument("need at least one replication");
  const KernelStepper stepper{model};
  const PolicyLookup lookup(strategy, n, model.num_states(), model.num_actions(), model.horizon());
  std::vector<double> samples(reps);
  parallel_for(reps, workers,
               [&](std::size_t r) { samples[r] = run_once(stepper, lookup, n, seed, r, false).total_cost; });
  return summarize(samples);
}

SimStats one_step_deviation(const ModelSpec& model, int n, std::span<const double> m, Stage t,
                            const LocalPolicy& gamma, std::uint64_t seed, std::size_t reps, unsigned workers) {
  return deviation(KernelStepper{model}, n, m, t, gamma, seed, reps, workers, lift_dynamics(model, t, m, gamma));
}

SimStats one_step_deviation(const FunctionalModel& model, int n, std::span<const double> m, Stage t,
                            const LocalPolicy& gamma, std::uint64_t seed, std::size_t reps, unsigned workers) {
  model.validate();
  return deviation(FunctionalStepper{model}, n, m, t, gamma, seed, reps, workers, lift_dynamics(model, t, m, gamma));
}

std::vector<SimStats> iid_deviation(std::span<const double> p, int n, std::uint64_t seed, std::size_t reps,
                                    unsigned workers) {
  if (!is_probability_vector(p)) throw InvalidArgument("iid_deviation: p is not a pmf");
  if (n < 1) throw InvalidArgument("iid_deviation: n must be positive");
  if (reps < 1) throw InvalidArgument("iid_deviation: need at least one replication");
  const std::size_t k = p.size();
  const CounterRng base = CounterRng(seed).split(stream::kIid);
  // samples[w * reps + r]
  std::vector<double> samples(k * reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    const CounterRng rng = base.split(r);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_index(p, rng.uniform(static_cast<std::uint64_t>(i))))];
    for (std::size_t w = 0; w < k; ++w) samples[w * reps + r] = std::abs(static_cast<double>(counts[w]) / n - p[w]);
  });
  std::vector<SimStats> out;
  out.reserve(k);
  for (std::size_t w = 0; w < k; ++w) out.push_back(summarize(std::span<const double>(samples).subspan(w * reps, reps)));
  return out;
}

double exact_binomial_deviation(double p, int n) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("exact_binomial_deviation: p must lie in [0, 1]");
  if (n < 1 || n > 1000) throw InvalidArgument("exact_binomial_deviation: n must lie in [1, 1000]");
  if (p == 0.0 || p == 1.0) return 0.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_nfact = std::lgamma(n + 1.0);
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double log_term = log_nfact - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * log_p + (n - k) * log_q;
    sum += std::exp(log_term) * std::abs(static_cast<double>(k) / n - p);
  }
  return sum;
}

void write_trajectory_jsonl(std::ostream& os, std::span<const SimRun> runs) {
  for (const auto& run : runs) {
    for (std::size_t t = 0; t < run.stages.size(); ++t) {
      nlohmann::json line = {{"rep", run.rep},
                             {"stage", t + 1},
                             {"mean_field", run.stages[t].mean_field.values},
                             {"cost", run.stages[t].cost}};
      os << line.dump() << '\n';
    }
  }
}

}  // namespace mfteam
