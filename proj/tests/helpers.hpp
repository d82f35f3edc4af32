#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mfteam/model.hpp"
#include "mfteam/rng.hpp"

namespace testing {

// Identity kernel with cost 1(u != x) on |X| = |U| states.
inline mfteam::ModelSpec identity_model(int nx, int horizon, std::vector<double> initial = {}) {
  if (initial.empty()) initial.assign(static_cast<std::size_t>(nx), 1.0 / nx);
  mfteam::ModelSpec m(nx, nx, horizon, initial);
  for (int t = 0; t < horizon; ++t)
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nx; ++u) {
        m.kernel_base(t, x, u, x) = 1.0;
        m.cost_base(t, x, u) = u == x ? 0.0 : 1.0;
      }
  return m;
}

// Every row P(y | x, u, z) = 1(y = u); cost zero.
inline mfteam::ModelSpec move_to_action_model(int nx, int horizon, std::vector<double> initial) {
  mfteam::ModelSpec m(nx, nx, horizon, std::move(initial));
  for (int t = 0; t < horizon; ++t)
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nx; ++u) m.kernel_base(t, x, u, u) = 1.0;
  return m;
}

// Uniform draws addressed by a running counter.
struct Draws {
  mfteam::CounterRng rng;
  std::uint64_t i = 0;

  explicit Draws(std::uint64_t seed) : rng(seed) {}
  double operator()() { return rng.uniform(i++); }
  int below(int k) { return static_cast<int>((*this)() * k); }

  std::vector<double> simplex(int dim) {
    std::vector<double> z(static_cast<std::size_t>(dim));
    double s = 0.0;
    for (auto& v : z) s += (v = -std::log1p(-(*this)()));
    for (auto& v : z) v /= s;
    return z;
  }
  std::vector<double> box(int dim) {
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (auto& v : z) v = (*this)();
    return z;
  }
};

}  // namespace testing
