#include "mfteam/lift.hpp"

#include <string>

#include "mfteam/errors.hpp"

namespace mfteam {

LocalPolicy LocalPolicy::from_index(std::size_t index, int num_states, int num_actions) {
  if (num_states < 1 || num_actions < 1) throw InvalidArgument("LocalPolicy: sizes must be positive");
  LocalPolicy p;
  p.index_ = index;
  p.actions_.assign(static_cast<std::size_t>(num_states), 0);
  const auto base = static_cast<std::size_t>(num_actions);
  for (int x = num_states - 1; x >= 0; --x) {
    p.actions_[static_cast<std::size_t>(x)] = static_cast<Action>(index % base);
    index /= base;
  }
  if (index != 0) throw std::out_of_range("LocalPolicy: index exceeds |U|^|X|");
  return p;
}

LocalPolicy LocalPolicy::from_actions(std::vector<Action> actions, int num_actions) {
  LocalPolicy p;
  std::size_t index = 0;
  for (Action a : actions) {
    if (a < 0 || a >= num_actions) throw std::out_of_range("LocalPolicy: action out of range");
    index = index * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a);
  }
  p.actions_ = std::move(actions);
  p.index_ = index;
  return p;
}

std::size_t policy_count(int num_states, int num_actions, std::size_t cap) {
  if (num_states < 1 || num_actions < 1) throw InvalidArgument("policy_count: sizes must be positive");
  std::size_t count = 1;
  for (int x = 0; x < num_states; ++x) {
    if (count > cap / static_cast<std::size_t>(num_actions)) {
      throw CapExceeded("policy count |U|^|X| exceeds cap " + std::to_string(cap));
    }
    count *= static_cast<std::size_t>(num_actions);
  }
  if (count > cap) throw CapExceeded("policy count |U|^|X| exceeds cap " + std::to_string(cap));
  return count;
}

std::vector<LocalPolicy> enumerate_policies(int num_states, int num_actions, std::size_t cap) {
  const std::size_t count = policy_count(num_states, num_actions, cap);
  std::vector<LocalPolicy> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(LocalPolicy::from_index(i, num_states, num_actions));
  return out;
}

namespace {

void check_policy(int num_states, std::span<const double> z, const LocalPolicy& gamma) {
  if (gamma.num_states() != num_states || z.size() != static_cast<std::size_t>(num_states)) {
    throw std::out_of_range("lifted map: dimension mismatch");
  }
}

}  // namespace

std::vector<double> lift_dynamics(const ModelSpec& model, Stage t, std::span<const double> z, const LocalPolicy& gamma) {
  const int nx = model.num_states();
  check_policy(nx, z, gamma);
  std::vector<double> out(static_cast<std::size_t>(nx), 0.0);
  for (State x = 0; x < nx; ++x) {
    const double weight = z[static_cast<std::size_t>(x)];
    if (weight == 0.0) continue;
    const auto row = kernel_eval(model, t, x, gamma(x), z);
    for (State y = 0; y < nx; ++y) out[static_cast<std::size_t>(y)] += weight * row[static_cast<std::size_t>(y)];
  }
  return out;
}

double lift_cost(const ModelSpec& model, Stage t, std::span<const double> z, const LocalPolicy& gamma) {
  const int nx = model.num_states();
  check_policy(nx, z, gamma);
  double c = 0.0;
  for (State x = 0; x < nx; ++x) {
    const double weight = z[static_cast<std::size_t>(x)];
    if (weight == 0.0) continue;
    c += weight * cost_eval(model, t, x, gamma(x), z);
  }
  return c;
}

std::vector<double> lift_dynamics(const FunctionalModel& fm, Stage t, std::span<const double> z,
                                  const LocalPolicy& gamma) {
  check_policy(fm.num_states, z, gamma);
  std::vector<double> out(static_cast<std::size_t>(fm.num_states), 0.0);
  for (State x = 0; x < fm.num_states; ++x) {
    const double weight = z[static_cast<std::size_t>(x)];
    if (weight == 0.0) continue;
    const auto row = kernel_from_functional(fm, t, x, gamma(x), z);
    for (std::size_t y = 0; y < out.size(); ++y) out[y] += weight * row[y];
  }
  return out;
}

std::vector<double> factorized_update(const FunctionalModel& fm, Stage t, std::span<const double> m,
                                      const LocalPolicy& gamma, std::span<const double> noise_emp) {
  check_policy(fm.num_states, m, gamma);
  if (noise_emp.size() != fm.noise_pmf.size() || !is_probability_vector(noise_emp)) {
    throw InvalidArgument("factorized_update: noise_emp is not a pmf over the noise alphabet");
  }
  std::vector<double> out(static_cast<std::size_t>(fm.num_states), 0.0);
  for (State x = 0; x < fm.num_states; ++x) {
    const double mx = m[static_cast<std::size_t>(x)];
    for (std::size_t w = 0; w < noise_emp.size(); ++w) {
      const State y = fm.dynamics(t, x, gamma(x), static_cast<int>(w), m);
      if (y < 0 || y >= fm.num_states) throw std::out_of_range("functional dynamics returned an invalid state");
      out[static_cast<std::size_t>(y)] += mx * noise_emp[w];
    }
  }
  return out;
}

}  // namespace mfteam
