#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>

#include "json.hpp"

#include "mfteam/dp.hpp"
#include "mfteam/errors.hpp"
#include "mfteam/model.hpp"

namespace mfteam {

/// File missing, unreadable, or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/**
 * Model file layout:
 *
 *   { "num_states": 2, "num_actions": 2, "horizon": 3,
 *     "initial_dist": [0.5, 0.5], "time_invariant": true,
 *     "stages": [ { "kernel_base":  [x][u][y],
 *                   "kernel_coeff": [x][u][x'][y],
 *                   "cost_base":    [x][u],
 *                   "cost_coeff":   [x][u][x'] } ] }
 *
 * `stages` has one block when time_invariant is true (broadcast to every
 * stage) and `horizon` blocks otherwise. Loading checks shapes only;
 * admissibility is validate_model's job.
 */
[[nodiscard]] ModelSpec parse_model(const nlohmann::json& doc);
[[nodiscard]] ModelSpec parse_model_text(std::string_view text);
[[nodiscard]] ModelSpec load_model(const std::filesystem::path& path);

/// Writes a single stage block when every stage is identical.
[[nodiscard]] nlohmann::json model_to_json(const ModelSpec& model);
void save_model(const std::filesystem::path& path, const ModelSpec& model);

/// {mode, nu, value, trajectory, policies}
[[nodiscard]] nlohmann::json solution_to_json(const DecentralizedSolution& solution);

/// {n, J_star, tables_elided[, points, value, policy]}; tables are dropped
/// when |M_n| (T + 1) exceeds `table_threshold`.
[[nodiscard]] nlohmann::json solution_to_json(const SharingSolution& solution, std::size_t table_threshold = 100'000);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace mfteam
