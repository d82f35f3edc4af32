#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfteam/model.hpp"

namespace mfteam {

/// Default cap on |U|^|X|.
inline constexpr std::size_t kDefaultPolicyCap = 1'000'000;

/**
 * Deterministic local map gamma: X -> U shared by all agents at one stage.
 *
 * The index encodes the action vector in base |U| with state 0 as the most
 * significant digit. That index order is the tie-break order for every
 * argmin in the solvers.
 */
class LocalPolicy {
 public:
  LocalPolicy() = default;

  static LocalPolicy from_index(std::size_t index, int num_states, int num_actions);
  static LocalPolicy from_actions(std::vector<Action> actions, int num_actions);

  [[nodiscard]] std::size_t index() const { return index_; }
  [[nodiscard]] std::span<const Action> actions() const { return actions_; }
  [[nodiscard]] Action operator()(State x) const { return actions_[static_cast<std::size_t>(x)]; }
  [[nodiscard]] int num_states() const { return static_cast<int>(actions_.size()); }

  friend bool operator==(const LocalPolicy&, const LocalPolicy&) = default;

 private:
  std::vector<Action> actions_;
  std::size_t index_ = 0;
};

/// |U|^|X|; throws CapExceeded above `cap`.
[[nodiscard]] std::size_t policy_count(int num_states, int num_actions, std::size_t cap = kDefaultPolicyCap);

/// All |U|^|X| local policies in increasing index order.
[[nodiscard]] std::vector<LocalPolicy> enumerate_policies(int num_states, int num_actions,
                                                          std::size_t cap = kDefaultPolicyCap);

/// f_t(z, gamma)(y) = sum_x z(x) P_t(y | x, gamma(x), z), defined on the unit box.
[[nodiscard]] std::vector<double> lift_dynamics(const ModelSpec& model, Stage t, std::span<const double> z,
                                                const LocalPolicy& gamma);

/// c_t(z, gamma) = sum_x z(x) l_t(x, gamma(x), z).
[[nodiscard]] double lift_cost(const ModelSpec& model, Stage t, std::span<const double> z, const LocalPolicy& gamma);

/// Lifted flow of a functional model, through kernel_from_functional.
[[nodiscard]] std::vector<double> lift_dynamics(const FunctionalModel& fm, Stage t, std::span<const double> z,
                                                const LocalPolicy& gamma);

/**
 * One-step mean-field update written through the empirical pmf of the
 * realized noises:
 *
 *   out(y) = sum_x sum_w 1(f_t(x, gamma(x), w, m) = y) m(x) noise_emp(w)
 *
 * Substituting the true noise pmf recovers lift_dynamics. The pointwise
 * agent-wise update generally differs; the two agree in expectation.
 */
[[nodiscard]] std::vector<double> factorized_update(const FunctionalModel& fm, Stage t, std::span<const double> m,
                                                    const LocalPolicy& gamma, std::span<const double> noise_emp);

}  // namespace mfteam
