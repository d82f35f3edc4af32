#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfteam/simplex.hpp"

namespace mfteam {

/// Zero-based stage index, 0 <= t < horizon.
using Stage = int;

/**
 * Finite-state, finite-action mean-field-coupled Markov chain whose kernel
 * and per-step cost are affine in the mean-field z:
 *
 *   P_t(y | x, u, z) = A0[t][x][u][y] + sum_x' z(x') B[t][x][u][x'][y]
 *   l_t(x, u, z)     = c0[t][x][u]    + sum_x' z(x') c1[t][x][u][x']
 *
 * Storage is always per stage; time-invariant inputs are broadcast by the
 * loader. Populate through the mutable accessors, then treat as immutable.
 */
class ModelSpec {
 public:
  ModelSpec(int num_states, int num_actions, int horizon, std::vector<double> initial_dist);

  [[nodiscard]] int num_states() const { return nx_; }
  [[nodiscard]] int num_actions() const { return nu_; }
  [[nodiscard]] int horizon() const { return horizon_; }
  [[nodiscard]] std::span<const double> initial_dist() const { return initial_; }

  double& kernel_base(Stage t, State x, Action u, State y) { return a0_[a0_at(t, x, u, y)]; }
  double& kernel_coeff(Stage t, State x, Action u, State xp, State y) { return b_[b_at(t, x, u, xp, y)]; }
  double& cost_base(Stage t, State x, Action u) { return c0_[c0_at(t, x, u)]; }
  double& cost_coeff(Stage t, State x, Action u, State xp) { return c1_[c1_at(t, x, u, xp)]; }

  [[nodiscard]] double kernel_base(Stage t, State x, Action u, State y) const { return a0_[a0_at(t, x, u, y)]; }
  [[nodiscard]] double kernel_coeff(Stage t, State x, Action u, State xp, State y) const {
    return b_[b_at(t, x, u, xp, y)];
  }
  [[nodiscard]] double cost_base(Stage t, State x, Action u) const { return c0_[c0_at(t, x, u)]; }
  [[nodiscard]] double cost_coeff(Stage t, State x, Action u, State xp) const { return c1_[c1_at(t, x, u, xp)]; }

  /// Throws std::out_of_range unless all indices are valid.
  void check_indices(Stage t, State x, Action u) const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  std::size_t a0_at(Stage t, State x, Action u, State y) const {
    return ((static_cast<std::size_t>(t) * nx_ + x) * nu_ + u) * nx_ + y;
  }
  std::size_t b_at(Stage t, State x, Action u, State xp, State y) const {
    return (((static_cast<std::size_t>(t) * nx_ + x) * nu_ + u) * nx_ + xp) * nx_ + y;
  }
  std::size_t c0_at(Stage t, State x, Action u) const { return (static_cast<std::size_t>(t) * nx_ + x) * nu_ + u; }
  std::size_t c1_at(Stage t, State x, Action u, State xp) const {
    return ((static_cast<std::size_t>(t) * nx_ + x) * nu_ + u) * nx_ + xp;
  }

  int nx_;
  int nu_;
  int horizon_;
  std::vector<double> initial_;
  std::vector<double> a0_;
  std::vector<double> b_;
  std::vector<double> c0_;
  std::vector<double> c1_;
};

/// Mean-field dynamics in noise form, x' = f_t(x, u, w, z), with finite noise alphabet.
struct FunctionalModel {
  using Dynamics = std::function<State(Stage, State, Action, int, std::span<const double>)>;
  using Cost = std::function<double(Stage, State, Action, std::span<const double>)>;

  int num_states = 1;
  int num_actions = 1;
  int horizon = 1;
  std::vector<double> initial_dist;
  std::vector<double> noise_pmf;
  Dynamics dynamics;
  Cost cost;

  /// Throws InvalidArgument when sizes or the pmfs are inconsistent.
  void validate() const;
};

struct Violation {
  std::string kind;
  std::string where;
  double value = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }
  [[nodiscard]] bool has(std::string_view kind) const;
  [[nodiscard]] std::string to_string() const;
};

namespace violation {
inline constexpr const char* kInitialDist = "initial distribution not a pmf";
inline constexpr const char* kKernelBaseRowSum = "kernel base row-sum not one";
inline constexpr const char* kKernelCoeffRowSum = "kernel coefficient row-sum nonzero";
inline constexpr const char* kNegativeKernel = "negative kernel at simplex vertex";
inline constexpr const char* kNegativeCost = "negative cost at simplex vertex";
inline constexpr const char* kNonFinite = "non-finite parameter";
}  // namespace violation

/// Lists every violated admissibility condition; an empty report means admissible.
[[nodiscard]] ValidationReport validate_model(const ModelSpec& model, double tol = kDistTolerance);

/// P_t(. | x, u, z) for any z in the unit box.
[[nodiscard]] std::vector<double> kernel_eval(const ModelSpec& model, Stage t, State x, Action u,
                                              std::span<const double> z);

/// l_t(x, u, z) for any z in the unit box.
[[nodiscard]] double cost_eval(const ModelSpec& model, Stage t, State x, Action u, std::span<const double> z);

/// Pushforward of the noise pmf through f_t: P(y) = sum_w 1(f_t(x,u,w,z) = y) p_W(w).
[[nodiscard]] std::vector<double> kernel_from_functional(const FunctionalModel& fm, Stage t, State x, Action u,
                                                         std::span<const double> z);

/**
 * Per-stage Lipschitz ledger, all entries valid on the unit box I(X).
 *
 *   kernel        K1_t = max_{x,u,y} sum_x' |B[t][x][u][x'][y]|
 *   cost          K2_t = max_{x,u} sum_x' |c1[t][x][u][x']|
 *   flow          K3_t = |X| (kernel_box_max_t + K1_t)
 *   lifted_cost   K4_t = |X| (cost_box_max_t + K2_t)
 *   value_gap     K5_T = K4_T,  K5_t = K4_t + K5_{t+1} K3_t
 *   value         same recursion as value_gap
 *
 * vertex_cost_max_t is the largest cost over simplex vertices; the two box
 * maxima bound |P| and |l| over the whole box.
 */
struct LipschitzConstants {
  std::vector<double> kernel;
  std::vector<double> cost;
  std::vector<double> flow;
  std::vector<double> lifted_cost;
  std::vector<double> value_gap;
  std::vector<double> value;
  std::vector<double> vertex_cost_max;
  std::vector<double> kernel_box_max;
  std::vector<double> cost_box_max;
};

[[nodiscard]] LipschitzConstants lipschitz_constants(const ModelSpec& model);

/// Knobs for random_admissible_model.
struct RandomModelOptions {
  double coupling = 0.8;      ///< scale of B relative to the admissible maximum, in [0, 1]
  double cost_coupling = 1.0;  ///< scale of c1
  bool time_invariant = false;
};

/**
 * Random admissible affine model. Rows of A0 and of A0 + B(x') are random
 * probability vectors; costs satisfy c0 + c1(x') >= 0 at every vertex.
 * Deterministic in `seed` on every platform.
 */
[[nodiscard]] ModelSpec random_admissible_model(std::uint64_t seed, int num_states, int num_actions, int horizon,
                                                const RandomModelOptions& options = {});

}  // namespace mfteam
