#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "mfteam/dp.hpp"
#include "mfteam/errors.hpp"
#include "mfteam/lift.hpp"
#include "mfteam/sim.hpp"

using namespace mfteam;

namespace {

FunctionalModel noisy_walk() {
  FunctionalModel fm;
  fm.num_states = 3;
  fm.num_actions = 2;
  fm.horizon = 1;
  fm.initial_dist = {0.4, 0.4, 0.2};
  fm.noise_pmf = {0.5, 0.3, 0.2};
  fm.dynamics = [](Stage, State x, Action u, int w, std::span<const double> z) {
    return z[static_cast<std::size_t>(x)] > 0.5 ? (x + 1) % 3 : (x + u * w) % 3;
  };
  fm.cost = [](Stage, State x, Action, std::span<const double> z) { return z[static_cast<std::size_t>(x)]; };
  return fm;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("summarize") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto s = summarize(v);
    CHECK(s.mean == 2.5);
    CHECK(s.reps == 4);
    CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(summarize(std::vector<double>{7.0}).std_error == 0.0);
  }

  TEST_CASE("sample_index") {
    const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
    CHECK(sample_index(p, 0.0) == 0);
    CHECK(sample_index(p, 0.19) == 0);
    CHECK(sample_index(p, 0.2) == 2);
    CHECK(sample_index(p, 0.69) == 2);
    CHECK(sample_index(p, 0.7) == 3);
    const std::vector<double> short_mass{0.5, 0.5 - 1e-15, 0.0};
    CHECK(sample_index(short_mass, 1.0 - 1e-16) == 1);
  }

  TEST_CASE("deterministic kernel follows the lifted flow") {
    const auto m = testing::move_to_action_model(3, 3, {0.3, 0.3, 0.4});
    PolicySequence g{LocalPolicy::from_actions({1, 2, 0}, 3), LocalPolicy::from_actions({0, 0, 2}, 3),
                     LocalPolicy::from_actions({2, 1, 1}, 3)};
    for (const auto& run : simulate_population(m, 10, g, 3, 20)) {
      for (std::size_t t = 0; t + 1 < run.stages.size(); ++t) {
        CHECK(linf(run.stages[t + 1].mean_field.values,
                   lift_dynamics(m, static_cast<Stage>(t), run.stages[t].mean_field.values, g[t])) <= 1e-15);
      }
    }
  }

  TEST_CASE("one agent under the identity kernel stays put") {
    const auto m = testing::identity_model(4, 5);
    PolicySequence g(5, LocalPolicy::from_index(7, 4, 4));
    for (const auto& run : simulate_population(m, 1, g, 11, 50)) {
      for (const auto& st : run.stages) CHECK(st.states == run.stages.front().states);
      CHECK(run.final_states == run.stages.front().states);
    }
  }

  TEST_CASE("records are consistent with the model") {
    const auto m = random_admissible_model(51, 3, 2, 3);
    const auto sharing = solve_sharing(m, 6);
    const Strategy strategies[] = {PolicySequence(3, LocalPolicy::from_index(5, 3, 2)), sharing.strategy()};
    for (const auto& strategy : strategies) {
      for (const auto& run : simulate_population(m, 6, strategy, 5, 30)) {
        REQUIRE(run.stages.size() == 3);
        double total = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
          const auto& st = run.stages[t];
          CHECK(st.mean_field == mean_field_of(st.states, 3));
          std::vector<int> counts(3, 0);
          for (State x : st.states) ++counts[static_cast<std::size_t>(x)];
          const LocalPolicy gamma =
              std::holds_alternative<PolicySequence>(strategy)
                  ? std::get<PolicySequence>(strategy)[t]
                  : LocalPolicy::from_index(sharing.policy[t][CompositionIndex(6, 3).rank(counts)], 3, 2);
          for (std::size_t i = 0; i < st.states.size(); ++i) CHECK(st.actions[i] == gamma(st.states[i]));
          CHECK(st.cost == doctest::Approx(lift_cost(m, static_cast<Stage>(t), st.mean_field.values, gamma)).epsilon(1e-13));
          total += st.cost;
        }
        CHECK(run.total_cost == doctest::Approx(total).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("runs are reproducible and independent of worker count") {
    const auto m = random_admissible_model(52, 3, 2, 2);
    const PolicySequence g(2, LocalPolicy::from_index(3, 3, 2));
    const auto a = simulate_population(m, 17, g, 99, 64, 1);
    const auto b = simulate_population(m, 17, g, 99, 64, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      CHECK(a[r].total_cost == b[r].total_cost);
      CHECK(a[r].final_states == b[r].final_states);
      for (std::size_t t = 0; t < 2; ++t) CHECK(a[r].stages[t].states == b[r].stages[t].states);
    }
    const auto c = simulate_population(m, 17, g, 100, 64, 1);
    CHECK(c[0].total_cost != a[0].total_cost);
    const auto e1 = estimate_cost(m, 17, g, 5, 3000, 1);
    const auto e4 = estimate_cost(m, 17, g, 5, 3000, 3);
    CHECK(e1.mean == e4.mean);
    CHECK(e1.std_error == e4.std_error);
  }

  TEST_CASE("simulated cost agrees with exact evaluation") {
    const auto m = random_admissible_model(53, 2, 2, 3);
    const auto grid = solve_decentralized_grid(m, 8);
    const double exact = evaluate_strategy_exact(m, 8, grid.policies);
    const auto stats = estimate_cost(m, 8, grid.policies, 2718, 100'000);
    CHECK(std::abs(stats.mean - exact) <= 4 * stats.std_error);

    const auto sharing = solve_sharing(m, 8);
    const auto fb = estimate_cost(m, 8, sharing.strategy(), 2719, 100'000);
    CHECK(std::abs(fb.mean - sharing.j_star) <= 4 * fb.std_error);
  }

  TEST_CASE("invalid strategy shapes are rejected") {
    const auto m = random_admissible_model(54, 2, 2, 2);
    CHECK_THROWS((void)simulate_population(m, 3, PolicySequence{LocalPolicy::from_index(0, 2, 2)}, 1, 1));
    CHECK_THROWS((void)simulate_population(m, 3, FeedbackTable{4, {}}, 1, 1));
    CHECK_THROWS((void)simulate_population(m, 3, PolicySequence(2, LocalPolicy::from_index(0, 2, 2)), 1, 0));
  }

  TEST_CASE("trajectory dump") {
    const auto m = random_admissible_model(55, 2, 2, 3);
    const auto runs = simulate_population(m, 4, PolicySequence(3, LocalPolicy::from_index(1, 2, 2)), 1, 2);
    std::ostringstream os;
    write_trajectory_jsonl(os, runs);
    std::istringstream in(os.str());
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("mean_field").size() == 2);
      CHECK(j.at("cost").get<double>() == runs[static_cast<std::size_t>(count / 3)].stages[static_cast<std::size_t>(count % 3)].cost);
      ++count;
    }
    CHECK(count == 6);
  }

  TEST_CASE("one-step deviation") {
    const auto det = testing::move_to_action_model(2, 1, {0.5, 0.5});
    const std::vector<double> half{0.5, 0.5};
    const auto zero = one_step_deviation(det, 10, half, 0, LocalPolicy::from_index(1, 2, 2), 1, 100);
    CHECK(zero.mean == 0.0);
    CHECK(zero.std_error == 0.0);

    const auto m = random_admissible_model(56, 2, 2, 1);
    const auto g = LocalPolicy::from_index(2, 2, 2);
    const double d32 = one_step_deviation(m, 32, half, 0, g, 8, 10'000).mean;
    const double d128 = one_step_deviation(m, 128, half, 0, g, 8, 10'000).mean;
    CHECK(d32 / d128 == doctest::Approx(2.0).epsilon(0.25));

    CHECK_THROWS_AS((void)one_step_deviation(m, 3, half, 0, g, 1, 10), InvalidArgument);
  }

  TEST_CASE("one-step deviation scales like 1/sqrt(n)") {
    const auto m = random_admissible_model(57, 2, 2, 1);
    const auto g = LocalPolicy::from_index(1, 2, 2);
    double prev = INFINITY;
    for (int n = 4; n <= 4096; n *= 2) {
      const std::vector<double> point{0.5, 0.5};
      const double scaled = std::sqrt(n) * one_step_deviation(m, n, point, 0, g, 77, 2'000).mean;
      CHECK(scaled <= 1.25 * prev);
      prev = scaled;
    }
  }

  TEST_CASE("functional one-step updates agree with the factorized update in expectation") {
    const auto fm = noisy_walk();
    const std::vector<double> m{0.4, 0.4, 0.2};
    const int n = 10;
    const auto g = LocalPolicy::from_actions({1, 1, 0}, 2);

    // Agent-wise updates from runs whose initial mean-field happens to be m.
    constexpr int kReps = 20'000;
    std::vector<std::vector<double>> agent(3), fact(3);
    const auto runs = simulate_population(fm, n, PolicySequence{g}, 1234, kReps);
    std::mt19937_64 gen(4321);
    std::discrete_distribution<int> noise(fm.noise_pmf.begin(), fm.noise_pmf.end());
    std::size_t used = 0;
    for (const auto& run : runs) {
      if (run.stages[0].mean_field.values != m) continue;
      ++used;
      const auto next = mean_field_of(run.final_states, 3);
      for (std::size_t y = 0; y < 3; ++y) agent[y].push_back(next[y]);
    }
    REQUIRE(used > 1000);
    // Factorized updates driven by the empirical pmf of n noise draws.
    for (int r = 0; r < kReps; ++r) {
      std::vector<double> emp(3, 0.0);
      for (int i = 0; i < n; ++i) emp[static_cast<std::size_t>(noise(gen))] += 1.0 / n;
      const auto f = factorized_update(fm, 0, m, g, emp);
      for (std::size_t y = 0; y < 3; ++y) fact[y].push_back(f[y]);
    }
    const auto lifted = lift_dynamics(fm, 0, m, g);
    for (std::size_t y = 0; y < 3; ++y) {
      const auto a = summarize(agent[y]);
      const auto f = summarize(fact[y]);
      CHECK(std::abs(a.mean - f.mean) <= 4 * std::hypot(a.std_error, f.std_error));
      CHECK(std::abs(f.mean - lifted[y]) <= 4 * f.std_error + 1e-15);
    }
  }

  TEST_CASE("exact binomial deviation") {
    CHECK(exact_binomial_deviation(0.0, 7) == 0.0);
    CHECK(exact_binomial_deviation(1.0, 7) == 0.0);
    CHECK(exact_binomial_deviation(0.5, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(exact_binomial_deviation(0.5, 4) == doctest::Approx(0.1875).epsilon(1e-14));
    // integer-binomial oracle
    for (int n : {3, 10, 25}) {
      for (double p : {0.1, 0.37, 0.5}) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
          s += static_cast<double>(binomial(n, k)) * std::pow(p, k) * std::pow(1 - p, n - k) *
               std::abs(static_cast<double>(k) / n - p);
        }
        CHECK(exact_binomial_deviation(p, n) == doctest::Approx(s).epsilon(1e-12));
      }
    }
    CHECK_THROWS_AS((void)exact_binomial_deviation(1.5, 4), InvalidArgument);
    CHECK_THROWS_AS((void)exact_binomial_deviation(0.5, 1001), InvalidArgument);
  }

  TEST_CASE("i.i.d. deviation") {
    const auto point_mass = iid_deviation(std::vector<double>{0.0, 1.0, 0.0}, 20, 1, 500);
    for (const auto& s : point_mass) CHECK(s.mean == 0.0);

    const auto one = iid_deviation(std::vector<double>{0.5, 0.5}, 1, 1, 500);
    CHECK(one[0].mean == 0.5);
    CHECK(one[1].mean == 0.5);

    const auto four = iid_deviation(std::vector<double>{0.5, 0.5}, 4, 31, 200'000);
    CHECK(std::abs(four[0].mean - 0.1875) <= 4 * four[0].std_error);
    CHECK(four[0].mean == four[1].mean);

    for (double p : {0.2, 0.7}) {
      const auto s = iid_deviation(std::vector<double>{p, 1 - p}, 9, 32, 100'000);
      CHECK(std::abs(s[0].mean - exact_binomial_deviation(p, 9)) <= 4 * s[0].std_error);
    }
    CHECK_THROWS_AS((void)iid_deviation(std::vector<double>{0.5, 0.6}, 4, 1, 10), InvalidArgument);
  }

  TEST_CASE("i.i.d. deviation scales like 1/sqrt(n)") {
    const std::vector<double> p{0.3, 0.7};
    double prev = INFINITY;
    for (int n = 4; n <= 16384; n *= 2) {
      const double scaled = std::sqrt(n) * iid_deviation(p, n, 78, 2'000)[0].mean;
      CHECK(scaled <= 1.25 * prev);
      prev = scaled;
    }
  }

  TEST_CASE("i.i.d. deviation is independent of worker count") {
    const std::vector<double> p{0.1, 0.6, 0.3};
    const auto a = iid_deviation(p, 50, 6, 4'000, 1);
    const auto b = iid_deviation(p, 50, 6, 4'000, 5);
    for (std::size_t w = 0; w < 3; ++w) {
      CHECK(a[w].mean == b[w].mean);
      CHECK(a[w].std_error == b[w].std_error);
    }
  }
}
