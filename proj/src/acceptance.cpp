#include "mfteam/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <sstream>

#include "mfteam/convergence.hpp"
#include "mfteam/dp.hpp"
#include "mfteam/errors.hpp"
#include "mfteam/lift.hpp"
#include "mfteam/rng.hpp"
#include "mfteam/sim.hpp"

namespace mfteam {

namespace fixtures {

ModelSpec small_random() { return random_admissible_model(12, 2, 2, 2); }

ModelSpec benchmark_two_state() {
  constexpr int kHorizon = 3;
  ModelSpec m(2, 2, kHorizon, {0.6, 0.4});
  for (Stage t = 0; t < kHorizon; ++t) {
    for (State x = 0; x < 2; ++x) {
      const State other = 1 - x;
      m.kernel_base(t, x, 0, x) = 0.9;
      m.kernel_base(t, x, 0, other) = 0.1;
      m.kernel_coeff(t, x, 0, x, x) = -0.2;
      m.kernel_coeff(t, x, 0, x, other) = 0.2;
      m.kernel_base(t, x, 1, x) = 0.4;
      m.kernel_base(t, x, 1, other) = 0.6;
      for (Action u = 0; u < 2; ++u) {
        m.cost_base(t, x, u) = 0.02 * u;
        m.cost_coeff(t, x, u, x) = 2.0;
      }
    }
  }
  return m;
}

ModelSpec identity(int num_states, int horizon) {
  ModelSpec m(num_states, num_states, horizon, std::vector<double>(static_cast<std::size_t>(num_states), 1.0 / num_states));
  for (Stage t = 0; t < horizon; ++t)
    for (State x = 0; x < num_states; ++x)
      for (Action u = 0; u < num_states; ++u) {
        m.kernel_base(t, x, u, x) = 1.0;
        m.cost_base(t, x, u) = u == x ? 0.0 : 1.0;
      }
  return m;
}

}  // namespace fixtures

namespace {

using Clock = std::chrono::steady_clock;

std::string printf_string(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Relative slack for comparing a computed difference against a bound.
bool within(double lhs, double rhs) { return lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)); }

struct Sampler {
  CounterRng rng;
  std::uint64_t next = 0;

  double uniform() {
    const double u = rng.uniform(next / 4, next % 4);
    ++next;
    return u;
  }

  int below(int k) { return std::min(k - 1, static_cast<int>(uniform() * k)); }

  std::vector<double> box(int dim) {
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (auto& v : z) v = uniform();
    return z;
  }

  std::vector<double> simplex(int dim) {
    std::vector<double> z(static_cast<std::size_t>(dim));
    double total = 0.0;
    for (auto& v : z) total += (v = -std::log1p(-uniform()));
    for (auto& v : z) v /= total;
    return z;
  }

  std::vector<int> counts(int n, int dim) {
    std::vector<int> c(static_cast<std::size_t>(dim), 0);
    for (int i = 0; i < n; ++i) ++c[static_cast<std::size_t>(below(dim))];
    return c;
  }
};

Sampler sampler(std::uint64_t seed, std::uint64_t tag) { return {CounterRng(seed).split(tag)}; }

struct Tally {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // largest observed |difference| / bound

  void add(double difference, double bound) {
    ++checks;
    if (!within(difference, bound)) ++violations;
    if (bound > 0.0) worst_ratio = std::max(worst_ratio, difference / bound);
  }

  [[nodiscard]] std::string summary(const char* label) const {
    return printf_string("%s %zu/%zu violations, worst ratio %.3g", label, violations, checks, worst_ratio);
  }
};

// Kernel, cost, flow, and lifted-cost bounds on random pairs in the unit box.
std::vector<Tally> box_lipschitz(const ModelSpec& m, const LipschitzConstants& k, std::size_t pairs, Sampler& s) {
  const auto policies = enumerate_policies(m.num_states(), m.num_actions());
  std::vector<Tally> tallies(4);
  for (std::size_t i = 0; i < pairs; ++i) {
    const Stage t = s.below(m.horizon());
    const auto ts = static_cast<std::size_t>(t);
    const auto z1 = s.box(m.num_states());
    const auto z2 = s.box(m.num_states());
    const double dist = linf(z1, z2);
    for (State x = 0; x < m.num_states(); ++x)
      for (Action u = 0; u < m.num_actions(); ++u) {
        tallies[0].add(linf(kernel_eval(m, t, x, u, z1), kernel_eval(m, t, x, u, z2)), k.kernel[ts] * dist);
        tallies[1].add(std::abs(cost_eval(m, t, x, u, z1) - cost_eval(m, t, x, u, z2)), k.cost[ts] * dist);
      }
    for (const auto& gamma : policies) {
      tallies[2].add(linf(lift_dynamics(m, t, z1, gamma), lift_dynamics(m, t, z2, gamma)), k.flow[ts] * dist);
      tallies[3].add(std::abs(lift_cost(m, t, z1, gamma) - lift_cost(m, t, z2, gamma)), k.lifted_cost[ts] * dist);
    }
  }
  return tallies;
}

double lifted_value(const ModelSpec& m, Stage t, std::span<const double> z, const SolverOptions& opts) {
  return solve_decentralized_tree(m, t, z, opts).value;
}

// Value-function bound on random pairs drawn from the 1/256 empirical grid.
Tally value_lipschitz(const ModelSpec& m, const LipschitzConstants& k, std::size_t pairs, Sampler& s,
                      const SolverOptions& opts) {
  constexpr int kFine = 256;
  Tally tally;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Stage t = s.below(m.horizon());
    const auto z1 = empirical_from_counts(s.counts(kFine, m.num_states()));
    const auto z2 = empirical_from_counts(s.counts(kFine, m.num_states()));
    tally.add(std::abs(lifted_value(m, t, z1.values, opts) - lifted_value(m, t, z2.values, opts)),
              k.value[static_cast<std::size_t>(t)] * linf(z1.values, z2.values));
  }
  return tally;
}

double first_moment_error(const ModelSpec& m, int n, std::span<const double> point, Stage t, const LocalPolicy& gamma,
                          const SolverOptions& opts) {
  const auto law = next_meanfield_distribution(m, n, point, t, gamma, opts);
  const CompositionIndex index(n, m.num_states(), opts.enumeration_cap);
  std::vector<double> mean(static_cast<std::size_t>(m.num_states()), 0.0);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto p = index.point(r);
    for (std::size_t y = 0; y < mean.size(); ++y) mean[y] += law[r] * p[y];
  }
  return linf(mean, lift_dynamics(m, t, point, gamma));
}

CriterionResult timed(int id, std::string name, const std::function<bool(std::string&)>& body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  const auto start = Clock::now();
  try {
    r.passed = body(r.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::string csv_of(const ConvergenceTable& table) {
  std::ostringstream os;
  write_csv(os, table);
  return os.str();
}

SolverOptions solver_options(const AcceptanceOptions& o) {
  SolverOptions s;
  s.workers = o.workers;
  return s;
}

bool sharing_oracle(const AcceptanceOptions& o, std::string& detail) {
  const ModelSpec m = fixtures::small_random();
  const auto opts = solver_options(o);
  const double dp = solve_sharing(m, 3, opts).j_star;
  const double brute = brute_force_sharing_value(m, 3, opts);
  detail = printf_string("J* = %.15g, brute force = %.15g, |diff| = %.3g", dp, brute, std::abs(dp - brute));
  return std::abs(dp - brute) <= 1e-12;
}

bool grid_convergence(const AcceptanceOptions& o, std::string& detail) {
  const ModelSpec m = fixtures::small_random();
  const auto opts = solver_options(o);
  const auto k = lipschitz_constants(m);
  double kv_sum = 0.0;
  for (double v : k.value) kv_sum += v;
  const double tree = solve_decentralized_tree(m, opts).value;

  bool ok = true;
  std::vector<double> deltas;
  for (int nu : {8, 16, 32, 64}) {
    const double delta = std::abs(solve_decentralized_grid(m, nu, opts).value - tree);
    const double bound = kv_sum / (2.0 * nu);
    if (!deltas.empty() && delta > deltas.back()) ok = false;
    if (delta > bound) ok = false;
    deltas.push_back(delta);
    detail += printf_string("|d(%d)| = %.4g (bound %.3g); ", nu, delta, bound);
  }
  if (deltas.back() > deltas.front() / 4.0) ok = false;
  detail += printf_string("|d(64)|/|d(8)| = %.3g", deltas.back() / deltas.front());
  return ok;
}

bool gap_rate(const AcceptanceOptions& o, std::string& detail) {
  const ModelSpec m = fixtures::benchmark_two_state();
  ConvergenceOptions co;
  co.seed = o.seed;
  co.solver = solver_options(o);
  const std::vector<int> ns = {4, 8, 16, 32, 64, 128, 256};
  const auto table = run_convergence(m, ns, co);

  bool ok = true;
  double worst = 0.0;
  for (const auto& row : table.rows) {
    if (row.method != GapMethod::exact || !(row.gap >= -1e-10)) ok = false;
    worst = std::max(worst, row.gap_sqrt_n);
  }
  const double first = table.rows.front().gap_sqrt_n;
  if (!(worst <= 1.25 * first)) ok = false;
  const auto fit = fit_rate(table);
  if (!fit.vacuous && fit.slope > -0.4) ok = false;
  detail = printf_string("gap(4) = %.4g, gap(256) = %.4g, max gap*sqrt(n) / (2 gap(4)) = %.3g, ", table.rows.front().gap,
                         table.rows.back().gap, first > 0.0 ? worst / first : 0.0);
  detail += fit.vacuous ? std::string("all gaps zero") : printf_string("slope %.3f (r2 %.3f)", fit.slope, fit.r2);
  return ok;
}

bool iid_rate(const AcceptanceOptions& o, std::string& detail) {
  const std::vector<double> p = {0.5, 0.5};
  const double exact = exact_binomial_deviation(0.5, 4);
  const auto at4 = iid_deviation(p, 4, derive_seed(o.seed, seed_tag::kDeviation, 4), 1'000'000, o.workers)[0];
  bool ok = std::abs(at4.mean - exact) <= 4.0 * at4.std_error;
  detail = printf_string("n=4: %.5f vs %.5f (%.2f se); sqrt(n) dev:", at4.mean, exact,
                         std::abs(at4.mean - exact) / at4.std_error);

  double prev = 0.0;
  for (int n : {4, 16, 64, 256, 1024}) {
    const auto s = iid_deviation(p, n, derive_seed(o.seed, seed_tag::kDeviation, static_cast<std::uint64_t>(n)),
                                 100'000, o.workers)[0];
    const double scaled = std::sqrt(static_cast<double>(n)) * s.mean;
    if (prev > 0.0 && scaled > 1.25 * prev) ok = false;
    prev = scaled;
    detail += printf_string(" %.4f", scaled);
  }
  return ok;
}

bool one_step_rate(const AcceptanceOptions& o, std::string& detail) {
  const ModelSpec m = fixtures::small_random();
  const std::vector<double> point = {0.5, 0.5};
  const auto gamma = LocalPolicy::from_index(1, 2, 2);
  auto dev = [&](int n) {
    return one_step_deviation(m, n, point, 0, gamma,
                              derive_seed(o.seed, seed_tag::kDeviation, static_cast<std::uint64_t>(n)), 10'000,
                              o.workers)
        .mean;
  };
  bool ok = true;
  detail = "ratios:";
  for (int n : {16, 64, 256}) {
    const double ratio = dev(n) / dev(4 * n);
    if (!(ratio >= 1.5 && ratio <= 2.5)) ok = false;
    detail += printf_string(" %d->%d %.3f", n, 4 * n, ratio);
  }
  return ok;
}

bool first_moment(const AcceptanceOptions& o, std::string& detail) {
  Sampler s = sampler(o.seed, 6);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int nx = 2 + s.below(2);
    const int nu = 2 + s.below(2);
    const int horizon = 1 + s.below(2);
    const ModelSpec m = random_admissible_model(o.seed + static_cast<std::uint64_t>(i), nx, nu, horizon);
    const int n = 1 + s.below(8);
    const auto point = empirical_from_counts(s.counts(n, nx));
    const auto gamma = LocalPolicy::from_index(static_cast<std::size_t>(s.below(static_cast<int>(policy_count(nx, nu)))), nx, nu);
    worst = std::max(worst, first_moment_error(m, n, point.values, s.below(horizon), gamma, solver_options(o)));
  }
  detail = printf_string("100 instances, max error %.3g", worst);
  return worst <= 1e-10;
}

bool lipschitz(const AcceptanceOptions& o, std::string& detail) {
  constexpr std::size_t kPairs = 10'000;
  const ModelSpec m = fixtures::small_random();
  const auto k = lipschitz_constants(m);
  const auto opts = solver_options(o);
  Sampler s = sampler(o.seed, 7);

  const auto box = box_lipschitz(m, k, kPairs, s);
  const Tally value = value_lipschitz(m, k, kPairs, s, opts);

  // |V_t(m) - V^_t(z)| <= K5_t |m - z| + C / sqrt(n), C fitted at the smallest n.
  Tally gap;
  double c = 0.0;
  for (int n : {4, 16, 64}) {
    const auto sharing = solve_sharing(m, n, opts);
    const double root_n = std::sqrt(static_cast<double>(n));
    std::vector<std::pair<double, double>> samples;  // (|V - V^|, K5 |m - z|)
    for (std::size_t i = 0; i < kPairs; ++i) {
      const Stage t = s.below(m.horizon());
      const auto r = static_cast<std::size_t>(s.below(static_cast<int>(sharing.points.size())));
      const auto z = s.simplex(m.num_states());
      samples.emplace_back(std::abs(sharing.value[static_cast<std::size_t>(t)][r] - lifted_value(m, t, z, opts)),
                           k.value_gap[static_cast<std::size_t>(t)] * linf(sharing.points[r].values, z));
    }
    if (n == 4) {
      for (const auto& [diff, lin] : samples) c = std::max(c, (diff - lin) * root_n);
    }
    for (const auto& [diff, lin] : samples) gap.add(diff, lin + c / root_n);
  }

  bool ok = value.violations == 0 && gap.violations == 0;
  for (const auto& t : box) ok = ok && t.violations == 0;
  detail = box[0].summary("K1") + "; " + box[1].summary("K2") + "; " + box[2].summary("K3") + "; " +
           box[3].summary("K4") + "; " + value.summary("Kv") + "; " + gap.summary("K5") +
           printf_string(" (C = %.3g)", c);
  return ok;
}

bool determinism(const AcceptanceOptions& o, std::string& detail) {
  const ModelSpec m = fixtures::benchmark_two_state();
  const std::vector<int> ns = {4, 8, 16};
  ConvergenceOptions co;
  co.seed = o.seed;
  co.solver = solver_options(o);
  const std::string exact_a = csv_of(run_convergence(m, ns, co));
  const std::string exact_b = csv_of(run_convergence(m, ns, co));

  co.exact_cap = 0;
  co.mc_reps = 2'000;
  co.solver.workers = 1;
  const std::string mc_one = csv_of(run_convergence(m, ns, co));
  co.solver.workers = 4;
  const std::string mc_four = csv_of(run_convergence(m, ns, co));

  const std::vector<double> p = {0.2, 0.3, 0.5};
  const auto iid_one = iid_deviation(p, 32, o.seed, 5'000, 1);
  const auto iid_four = iid_deviation(p, 32, o.seed, 5'000, 4);
  bool iid_same = true;
  for (std::size_t w = 0; w < p.size(); ++w) {
    iid_same = iid_same && iid_one[w].mean == iid_four[w].mean && iid_one[w].std_error == iid_four[w].std_error;
  }

  detail = printf_string("exact csv identical: %s; mc csv 1 vs 4 workers: %s; iid 1 vs 4 workers: %s",
                         exact_a == exact_b ? "yes" : "no", mc_one == mc_four ? "yes" : "no", iid_same ? "yes" : "no");
  return exact_a == exact_b && mc_one == mc_four && iid_same;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
  using Body = bool (*)(const AcceptanceOptions&, std::string&);
  static const std::pair<const char*, Body> table[] = {
      {"sharing DP matches brute force", sharing_oracle},
      {"quantized DP converges to the lifted value", grid_convergence},
      {"optimality gap decays like 1/sqrt(n)", gap_rate},
      {"i.i.d. empirical deviation", iid_rate},
      {"one-step mean-field deviation rate", one_step_rate},
      {"first-moment identity", first_moment},
      {"Lipschitz certificates", lipschitz},
      {"determinism", determinism},
  };
  if (id < 1 || id > 8) throw InvalidArgument("run_criterion: id must lie in 1..8");
  const auto& [name, body] = table[id - 1];
  return timed(id, name, [&](std::string& detail) { return body(options, detail); });
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 8; ++id) out.push_back(run_criterion(id, options));
  return out;
}

std::vector<CriterionResult> run_model_checks(const ModelSpec& model, const AcceptanceOptions& options) {
  constexpr std::size_t kPairs = 1'000;
  const auto opts = solver_options(options);
  const auto k = lipschitz_constants(model);
  std::vector<CriterionResult> out;

  out.push_back(timed(101, "model: Lipschitz bounds on the unit box", [&](std::string& detail) {
    Sampler s = sampler(options.seed, 101);
    const auto box = box_lipschitz(model, k, kPairs, s);
    detail = box[0].summary("K1") + "; " + box[1].summary("K2") + "; " + box[2].summary("K3") + "; " +
             box[3].summary("K4");
    return std::all_of(box.begin(), box.end(), [](const Tally& t) { return t.violations == 0; });
  }));

  out.push_back(timed(102, "model: value-function Lipschitz bound", [&](std::string& detail) {
    try {
      Sampler s = sampler(options.seed, 102);
      const Tally t = value_lipschitz(model, k, 200, s, opts);
      detail = t.summary("Kv");
      return t.violations == 0;
    } catch (const CapExceeded& e) {
      detail = std::string("skipped: ") + e.what();
      return true;
    }
  }));

  out.push_back(timed(103, "model: first-moment identity", [&](std::string& detail) {
    Sampler s = sampler(options.seed, 103);
    const std::size_t policies = policy_count(model.num_states(), model.num_actions(), opts.policy_cap);
    double worst = 0.0;
    int done = 0;
    for (int i = 0; i < 20; ++i) {
      const int n = 1 + s.below(8);
      if (empirical_count(n, model.num_states()) > 20'000) continue;
      const auto point = empirical_from_counts(s.counts(n, model.num_states()));
      const auto gamma = LocalPolicy::from_index(static_cast<std::size_t>(s.below(static_cast<int>(policies))),
                                                 model.num_states(), model.num_actions());
      worst = std::max(worst, first_moment_error(model, n, point.values, s.below(model.horizon()), gamma, opts));
      ++done;
    }
    detail = printf_string("%d instances, max error %.3g", done, worst);
    return worst <= 1e-10;
  }));

  out.push_back(timed(104, "model: J(g) >= J*", [&](std::string& detail) {
    bool ok = true;
    for (int n : {2, 4, 8}) {
      try {
        const auto g = optimality_gap(model, n, n, opts);
        if (!(g.gap >= -1e-10)) ok = false;
        detail += printf_string("gap(%d) = %.4g; ", n, g.gap);
      } catch (const CapExceeded& e) {
        detail += printf_string("n=%d skipped (%s); ", n, e.what());
      }
    }
    return ok;
  }));
  return out;
}

std::string format_result(const CriterionResult& r) {
  return printf_string("%s [%d] %s (%.2f s): ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) + r.detail;
}

}  // namespace mfteam
