#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mfteam/dp.hpp"
#include "mfteam/errors.hpp"
#include "mfteam/lift.hpp"

using namespace mfteam;

namespace {

ModelSpec zero_cost(ModelSpec m) {
  for (Stage t = 0; t < m.horizon(); ++t)
    for (State x = 0; x < m.num_states(); ++x)
      for (Action u = 0; u < m.num_actions(); ++u) {
        m.cost_base(t, x, u) = 0.0;
        for (State xp = 0; xp < m.num_states(); ++xp) m.cost_coeff(t, x, u, xp) = 0.0;
      }
  return m;
}

// Independent search over every policy sequence along the lifted flow.
double sequence_search(const ModelSpec& m, Stage t, std::vector<double> z) {
  if (t == m.horizon()) return 0.0;
  double best = INFINITY;
  for (const auto& g : enumerate_policies(m.num_states(), m.num_actions())) {
    best = std::min(best, lift_cost(m, t, z, g) + sequence_search(m, t + 1, lift_dynamics(m, t, z, g)));
  }
  return best;
}

// Single-agent chain: the mean-field of one agent is the indicator of its state.
double single_agent_cost(const ModelSpec& m, const PolicySequence& policies) {
  const auto nx = static_cast<std::size_t>(m.num_states());
  std::vector<double> p(m.initial_dist().begin(), m.initial_dist().end());
  double total = 0.0;
  for (Stage t = 0; t < m.horizon(); ++t) {
    std::vector<double> next(nx, 0.0);
    for (State x = 0; x < m.num_states(); ++x) {
      std::vector<double> e(nx, 0.0);
      e[static_cast<std::size_t>(x)] = 1.0;
      const Action u = policies[static_cast<std::size_t>(t)](x);
      total += p[static_cast<std::size_t>(x)] * cost_eval(m, t, x, u, e);
      const auto row = kernel_eval(m, t, x, u, e);
      for (std::size_t y = 0; y < nx; ++y) next[y] += p[static_cast<std::size_t>(x)] * row[y];
    }
    p = next;
  }
  return total;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("dp") {
  TEST_CASE("deterministic kernel gives a point mass on the image") {
    const auto m = testing::move_to_action_model(3, 1, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const std::vector<double> point{0.5, 0.25, 0.25};
    const auto g = LocalPolicy::from_actions({2, 0, 2}, 3);
    const auto law = next_meanfield_distribution(m, 4, point, 0, g);
    const CompositionIndex idx(4, 3);
    const std::vector<int> image{1, 0, 3};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      CHECK(law[r] == (r == idx.rank(image) ? 1.0 : 0.0));
    }
  }

  TEST_CASE("two agents leaving state 0 with probability p") {
    const double p = 0.3;
    ModelSpec m(2, 1, 1, {1.0, 0.0});
    m.kernel_base(0, 0, 0, 0) = 1 - p;
    m.kernel_base(0, 0, 0, 1) = p;
    m.kernel_base(0, 1, 0, 1) = 1.0;
    const auto law = next_meanfield_distribution(m, 2, std::vector<double>{1.0, 0.0}, 0, LocalPolicy::from_index(0, 2, 1));
    // M_2 order: (0,1), (1/2,1/2), (1,0)
    CHECK(law[0] == doctest::Approx(p * p));
    CHECK(law[1] == doctest::Approx(2 * p * (1 - p)));
    CHECK(law[2] == doctest::Approx((1 - p) * (1 - p)));
  }

  TEST_CASE("one-step law matches Monte Carlo frequencies") {
    const auto m = random_admissible_model(2024, 3, 2, 1);
    const int n = 3;
    const std::vector<int> counts{2, 0, 1};
    const std::vector<double> point{2.0 / 3, 0.0, 1.0 / 3};
    const auto g = LocalPolicy::from_actions({1, 0, 0}, 2);
    const auto law = next_meanfield_distribution(m, n, point, 0, g);
    const CompositionIndex idx(n, 3);

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    for (State x = 0; x < 3; ++x) rows.push_back(kernel_eval(m, 0, x, g(x), point));
    constexpr int kSamples = 1'000'000;
    std::vector<double> freq(idx.size(), 0.0);
    for (int s = 0; s < kSamples; ++s) {
      std::vector<int> next(3, 0);
      for (State x = 0; x < 3; ++x)
        for (int a = 0; a < counts[static_cast<std::size_t>(x)]; ++a) {
          const double u = unif(gen);
          double c = 0.0;
          State y = 2;
          for (State k = 0; k < 3; ++k) {
            c += rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(k)];
            if (u < c) {
              y = k;
              break;
            }
          }
          ++next[static_cast<std::size_t>(y)];
        }
      freq[idx.rank(next)] += 1.0 / kSamples;
    }
    double total = 0.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double sigma = std::sqrt(law[r] * (1 - law[r]) / kSamples);
      CHECK(std::abs(freq[r] - law[r]) <= 4 * sigma + 1e-12);
      total += law[r];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("first-moment identity on random instances") {
    testing::Draws d(99);
    for (int i = 0; i < 100; ++i) {
      const int nx = 2 + d.below(3);
      const int nu = 1 + d.below(3);
      const auto m = random_admissible_model(500 + static_cast<std::uint64_t>(i), nx, nu, 2);
      const int n = 1 + d.below(8);
      std::vector<int> c(static_cast<std::size_t>(nx), 0);
      for (int a = 0; a < n; ++a) ++c[static_cast<std::size_t>(d.below(nx))];
      const auto point = empirical_from_counts(c);
      const auto g = LocalPolicy::from_index(static_cast<std::size_t>(d.below(static_cast<int>(policy_count(nx, nu)))), nx, nu);
      const Stage t = d.below(2);
      const auto law = next_meanfield_distribution(m, n, point.values, t, g);
      const auto pts = enumerate_empirical(n, nx);
      std::vector<double> mean(static_cast<std::size_t>(nx), 0.0);
      for (std::size_t r = 0; r < pts.size(); ++r)
        for (std::size_t y = 0; y < mean.size(); ++y) mean[y] += law[r] * pts[r][y];
      REQUIRE(linf(mean, lift_dynamics(m, t, point.values, g)) <= 1e-10);
    }
  }

  TEST_CASE("next law rejects a point off M_n") {
    const auto m = random_admissible_model(1, 2, 2, 1);
    const auto g = LocalPolicy::from_index(0, 2, 2);
    CHECK_THROWS_AS((void)next_meanfield_distribution(m, 3, std::vector<double>{0.5, 0.5}, 0, g), InvalidArgument);
  }

  TEST_CASE("initial law is multinomial") {
    const auto m = random_admissible_model(8, 3, 1, 1);
    const auto law = initial_meanfield_distribution(m, 4);
    const CompositionIndex idx(4, 3);
    const auto z = m.initial_dist();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto c = idx.counts(r);
      const double expect = 24.0 / (std::tgamma(c[0] + 1.0) * std::tgamma(c[1] + 1.0) * std::tgamma(c[2] + 1.0)) *
                            std::pow(z[0], c[0]) * std::pow(z[1], c[1]) * std::pow(z[2], c[2]);
      CHECK(law[r] == doctest::Approx(expect).epsilon(1e-13));
    }
  }

  TEST_CASE("sharing DP with one stage minimizes the lifted cost") {
    const auto m = random_admissible_model(15, 3, 2, 1);
    const auto sol = solve_sharing(m, 4);
    const auto policies = enumerate_policies(3, 2);
    REQUIRE(sol.value.size() == 2);
    for (std::size_t r = 0; r < sol.points.size(); ++r) {
      double best = INFINITY;
      std::size_t arg = 0;
      for (const auto& g : policies) {
        const double c = lift_cost(m, 0, sol.points[r].values, g);
        if (c < best) {
          best = c;
          arg = g.index();
        }
      }
      CHECK(sol.value[0][r] == doctest::Approx(best).epsilon(1e-14));
      CHECK(sol.policy[0][r] == arg);
      CHECK(sol.value[1][r] == 0.0);
    }
    CHECK(brute_force_sharing_value(m, 2) == doctest::Approx(solve_sharing(m, 2).j_star).epsilon(1e-13));
  }

  TEST_CASE("zero cost gives zero values") {
    const auto m = zero_cost(random_admissible_model(16, 2, 2, 3));
    const auto sol = solve_sharing(m, 5);
    CHECK(sol.j_star == 0.0);
    for (const auto& table : sol.value)
      for (double v : table) CHECK(v == 0.0);
    CHECK(brute_force_sharing_value(m, 2) == 0.0);
    CHECK(solve_decentralized_grid(m, 7).value == 0.0);
    CHECK(solve_decentralized_tree(m).value == 0.0);
    CHECK(evaluate_strategy_exact(m, 5, sol.strategy()) == 0.0);
  }

  TEST_CASE("sharing DP equals brute force on small instances") {
    for (std::uint64_t seed : {12u, 3u, 4u}) {
      const auto m = random_admissible_model(seed, 2, 2, 2);
      CHECK(std::abs(solve_sharing(m, 3).j_star - brute_force_sharing_value(m, 3)) <= 1e-12);
    }
    const auto m3 = random_admissible_model(9, 3, 2, 1);
    CHECK(std::abs(solve_sharing(m3, 2).j_star - brute_force_sharing_value(m3, 2)) <= 1e-12);
  }

  TEST_CASE("sharing values are nonnegative and bounded by the vertex costs") {
    const auto m = random_admissible_model(17, 3, 2, 3);
    const auto k = lipschitz_constants(m);
    const auto sol = solve_sharing(m, 6);
    for (std::size_t t = 0; t < 3; ++t) {
      double bound = 0.0;
      for (std::size_t s = t; s < 3; ++s) bound += k.vertex_cost_max[s];
      for (double v : sol.value[t]) {
        CHECK(v >= 0.0);
        CHECK(v <= bound + 1e-12);
      }
    }
  }

  TEST_CASE("sharing policy is the evaluated optimum") {
    const auto m = random_admissible_model(18, 2, 3, 3);
    const auto sol = solve_sharing(m, 7);
    CHECK(evaluate_strategy_exact(m, 7, sol.strategy()) == doctest::Approx(sol.j_star).epsilon(1e-12));
  }

  TEST_CASE("sharing DP respects caps") {
    const auto m = random_admissible_model(1, 3, 2, 1);
    SolverOptions o;
    o.enumeration_cap = 10;
    CHECK_THROWS_AS((void)solve_sharing(m, 5, o), CapExceeded);
    CHECK_THROWS_AS((void)brute_force_sharing_value(m, 3), CapExceeded);
    CHECK_THROWS_AS((void)solve_sharing(m, 0), InvalidArgument);
  }

  TEST_CASE("tree search") {
    const auto one = random_admissible_model(19, 3, 2, 1);
    double best = INFINITY;
    for (const auto& g : enumerate_policies(3, 2)) best = std::min(best, lift_cost(one, 0, one.initial_dist(), g));
    CHECK(solve_decentralized_tree(one).value == doctest::Approx(best).epsilon(1e-14));

    const auto id = testing::identity_model(3, 2, {0.2, 0.3, 0.5});
    const auto sol = solve_decentralized_tree(id);
    CHECK(sol.value == 0.0);
    for (const auto& g : sol.policies) CHECK(g == LocalPolicy::from_actions({0, 1, 2}, 3));

    for (std::uint64_t seed : {20u, 21u, 22u}) {
      const auto m = random_admissible_model(seed, 2, 3, 3);
      std::vector<double> z1(m.initial_dist().begin(), m.initial_dist().end());
      CHECK(solve_decentralized_tree(m).value == doctest::Approx(sequence_search(m, 0, z1)).epsilon(1e-13));
      const std::vector<double> z{0.3, 0.7};
      CHECK(solve_decentralized_tree(m, 1, z).value == doctest::Approx(sequence_search(m, 1, z)).epsilon(1e-13));
      CHECK(solve_decentralized_tree(m, 3, z).value == 0.0);
    }
  }

  TEST_CASE("tree trajectory follows the flow and the value is its cost") {
    const auto m = random_admissible_model(23, 3, 2, 3);
    const auto sol = solve_decentralized_tree(m);
    REQUIRE(sol.trajectory.size() == 4);
    REQUIRE(sol.policies.size() == 3);
    double total = 0.0;
    for (Stage t = 0; t < 3; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      total += lift_cost(m, t, sol.trajectory[ts], sol.policies[ts]);
      CHECK(linf(sol.trajectory[ts + 1], lift_dynamics(m, t, sol.trajectory[ts], sol.policies[ts])) == 0.0);
    }
    CHECK(sol.value == doctest::Approx(total).epsilon(1e-14));
  }

  TEST_CASE("tree values are nonnegative and bounded on the simplex") {
    const auto m = random_admissible_model(24, 2, 2, 3);
    const auto k = lipschitz_constants(m);
    testing::Draws d(5);
    for (int i = 0; i < 200; ++i) {
      const Stage t = d.below(3);
      double bound = 0.0;
      for (int s = t; s < 3; ++s) bound += k.vertex_cost_max[static_cast<std::size_t>(s)];
      const double v = solve_decentralized_tree(m, t, d.simplex(2)).value;
      CHECK(v >= 0.0);
      CHECK(v <= bound + 1e-12);
    }
  }

  TEST_CASE("tree cap") {
    SolverOptions o;
    o.tree_cap = 100;
    CHECK_THROWS_AS((void)solve_decentralized_tree(random_admissible_model(1, 2, 2, 4), o), CapExceeded);
  }

  TEST_CASE("grid DP: identity model") {
    const auto id = testing::identity_model(2, 3, {0.3, 0.7});
    const auto sol = solve_decentralized_grid(id, 10);
    CHECK(sol.mode == SolveMode::grid);
    CHECK(sol.nu == 10);
    CHECK(sol.value == 0.0);
    for (const auto& g : sol.policies) CHECK(g == LocalPolicy::from_actions({0, 1}, 2));
    const auto start = quantize(id.initial_dist(), 10);
    for (const auto& z : sol.trajectory) CHECK(z == start.values);
  }

  TEST_CASE("grid trajectory is the quantized flow and the value is its cost") {
    const auto m = random_admissible_model(25, 3, 2, 3);
    const int nu = 12;
    const auto sol = solve_decentralized_grid(m, nu);
    REQUIRE(sol.trajectory.size() == 4);
    CHECK(sol.trajectory[0] == quantize(m.initial_dist(), nu).values);
    double total = 0.0;
    for (Stage t = 0; t < 3; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      total += lift_cost(m, t, sol.trajectory[ts], sol.policies[ts]);
      CHECK(sol.trajectory[ts + 1] == quantize(lift_dynamics(m, t, sol.trajectory[ts], sol.policies[ts]), nu).values);
    }
    CHECK(sol.value == doctest::Approx(total).epsilon(1e-13));
  }

  TEST_CASE("grid values are bounded by the box cost maxima") {
    const auto m = random_admissible_model(26, 2, 2, 3);
    const auto k = lipschitz_constants(m);
    const auto sol = solve_decentralized_grid(m, 16);
    for (std::size_t t = 0; t < 3; ++t) {
      double bound = 0.0;
      for (std::size_t s = t; s < 3; ++s) bound += 2 * k.cost_box_max[s];
      for (double v : sol.value_tables[t]) CHECK(std::abs(v) <= bound + 1e-12);
    }
    for (double v : sol.value_tables[3]) CHECK(v == 0.0);
  }

  TEST_CASE("grid value approaches the tree value") {
    const auto m = random_admissible_model(12, 2, 2, 2);
    const double tree = solve_decentralized_tree(m).value;
    const auto k = lipschitz_constants(m);
    const double kv = k.value[0] + k.value[1];
    for (int nu : {8, 16, 32, 64, 128}) {
      CHECK(std::abs(solve_decentralized_grid(m, nu).value - tree) <= kv / (2.0 * nu));
    }
  }

  TEST_CASE("results do not depend on the worker count") {
    const auto m = random_admissible_model(27, 3, 2, 3);
    SolverOptions one, many;
    one.workers = 1;
    many.workers = 4;
    const auto a = solve_decentralized_grid(m, 9, one);
    const auto b = solve_decentralized_grid(m, 9, many);
    CHECK(a.value_tables == b.value_tables);
    CHECK(a.policy_tables == b.policy_tables);
    const auto s1 = solve_sharing(m, 9, one);
    const auto s2 = solve_sharing(m, 9, many);
    CHECK(s1.value == s2.value);
    CHECK(s1.policy == s2.policy);
    CHECK(s1.j_star == s2.j_star);
    CHECK(evaluate_strategy_exact(m, 40, a.policies, one) == evaluate_strategy_exact(m, 40, a.policies, many));
  }

  TEST_CASE("exact evaluation with one agent is the single-agent chain") {
    for (std::uint64_t seed : {30u, 31u, 32u}) {
      const auto m = random_admissible_model(seed, 3, 2, 3);
      PolicySequence g;
      for (Stage t = 0; t < 3; ++t) g.push_back(LocalPolicy::from_index(static_cast<std::size_t>(seed + t) % 8, 3, 2));
      CHECK(evaluate_strategy_exact(m, 1, g) == doctest::Approx(single_agent_cost(m, g)).epsilon(1e-13));
    }
  }

  TEST_CASE("exact evaluation of an open-loop sequence matches a dense chain") {
    const auto m = random_admissible_model(33, 2, 2, 3);
    const int n = 5;
    PolicySequence g{LocalPolicy::from_index(1, 2, 2), LocalPolicy::from_index(2, 2, 2), LocalPolicy::from_index(3, 2, 2)};
    auto pmf = initial_meanfield_distribution(m, n);
    const auto pts = enumerate_empirical(n, 2);
    double total = 0.0;
    for (Stage t = 0; t < 3; ++t) {
      std::vector<double> next(pts.size(), 0.0);
      for (std::size_t r = 0; r < pts.size(); ++r) {
        total += pmf[r] * lift_cost(m, t, pts[r].values, g[static_cast<std::size_t>(t)]);
        const auto law = next_meanfield_distribution(m, n, pts[r].values, t, g[static_cast<std::size_t>(t)]);
        for (std::size_t q = 0; q < pts.size(); ++q) next[q] += pmf[r] * law[q];
      }
      pmf = next;
    }
    CHECK(evaluate_strategy_exact(m, n, g) == doctest::Approx(total).epsilon(1e-13));
  }

  TEST_CASE("exact evaluation rejects strategies of the wrong shape") {
    const auto m = random_admissible_model(34, 2, 2, 2);
    CHECK_THROWS((void)evaluate_strategy_exact(m, 3, PolicySequence{LocalPolicy::from_index(0, 2, 2)}));
    FeedbackTable bad{4, {}};
    CHECK_THROWS((void)evaluate_strategy_exact(m, 3, bad));
  }

  TEST_CASE("optimality gap") {
    const auto id = testing::identity_model(2, 2, {0.5, 0.5});
    const auto g0 = optimality_gap(id, 6, 6);
    CHECK(g0.gap == 0.0);
    CHECK(g0.j_star == 0.0);

    for (std::uint64_t seed : {40u, 41u, 42u, 43u}) {
      const auto m = random_admissible_model(seed, 2, 2, 3);
      const auto one = optimality_gap(m, 1, 200);
      CHECK(one.gap >= -1e-10);
      for (int n : {2, 5, 9}) {
        const auto r = optimality_gap(m, n, n);
        CHECK(r.gap >= -1e-10);
        CHECK(r.gap == doctest::Approx(r.j_g - r.j_star));
        CHECK(r.j_star == doctest::Approx(solve_sharing(m, n).j_star).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("one agent: the gap is the open-loop versus closed-loop difference") {
    const auto m = random_admissible_model(44, 2, 2, 2);
    const auto r = optimality_gap(m, 1, 400);
    // Closed loop over a single agent is plain value iteration on its state.
    std::vector<double> v(2, 0.0);
    for (Stage t = 1; t >= 0; --t) {
      std::vector<double> next(2);
      for (State x = 0; x < 2; ++x) {
        std::vector<double> e(2, 0.0);
        e[static_cast<std::size_t>(x)] = 1.0;
        double best = INFINITY;
        for (Action u = 0; u < 2; ++u) best = std::min(best, cost_eval(m, t, x, u, e) + dot(kernel_eval(m, t, x, u, e), v));
        next[static_cast<std::size_t>(x)] = best;
      }
      v = next;
    }
    const double closed = dot({m.initial_dist().begin(), m.initial_dist().end()}, v);
    CHECK(r.j_star == doctest::Approx(closed).epsilon(1e-13));
    CHECK(r.gap >= -1e-12);
  }
}
