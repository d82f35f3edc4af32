#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfteam {

using State = int;
using Action = int;

/// Default cap on the number of points any enumeration may produce.
inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// Tolerance used by every membership test on distribution vectors.
inline constexpr double kDistTolerance = 1e-12;

/// Which of the four spaces a DistVector claims to live in.
enum class Flavor {
  simplex,    ///< probability vector
  empirical,  ///< probability vector whose entries are multiples of 1/n
  grid,       ///< entries are multiples of 1/nu, sum unconstrained
  box,        ///< entries in [0, 1]
};

/**
 * A length-|X| vector over the states together with the space it belongs to.
 * `resolution` is n for empirical points and nu for grid points, 0 otherwise.
 */
struct DistVector {
  std::vector<double> values;
  Flavor flavor = Flavor::box;
  int resolution = 0;

  DistVector() = default;
  DistVector(std::vector<double> v, Flavor f = Flavor::box, int res = 0)
      : values(std::move(v)), flavor(f), resolution(res) {}

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  operator std::span<const double>() const { return values; }

  friend bool operator==(const DistVector&, const DistVector&) = default;
};

/// True when `v` satisfies the invariant of its declared flavor.
[[nodiscard]] bool satisfies_flavor(const DistVector& v);

/// True when `z` is a probability vector within kDistTolerance.
[[nodiscard]] bool is_probability_vector(std::span<const double> z, double tol = kDistTolerance);

/// Empirical distribution of `states` over `dim` states.
[[nodiscard]] DistVector mean_field_of(std::span<const State> states, int dim);

/// Empirical distribution for an integer count vector summing to n.
[[nodiscard]] DistVector empirical_from_counts(std::span<const int> counts);

/// Binomial coefficient as an exact integer; saturates at UINT64_MAX.
[[nodiscard]] std::uint64_t binomial(int n, int k);

/// |M_n| = C(n + dim - 1, dim - 1), saturating.
[[nodiscard]] std::uint64_t empirical_count(int n, int dim);

/// (nu + 1)^dim, saturating.
[[nodiscard]] std::uint64_t grid_count(int nu, int dim);

/**
 * Ordered indexer for the integer compositions of `total` into `dim` parts,
 * i.e. the count vectors behind M_n. Order is lexicographic on the count
 * vector, so index 0 is (0, ..., 0, total).
 */
class CompositionIndex {
 public:
  CompositionIndex(int total, int dim, std::size_t cap = kDefaultEnumerationCap);

  [[nodiscard]] int total() const { return total_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return counts_.size() / static_cast<std::size_t>(dim_); }

  [[nodiscard]] std::span<const int> counts(std::size_t index) const {
    return {counts_.data() + index * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  /// Position of a count vector in the ordering; O(dim).
  [[nodiscard]] std::size_t rank(std::span<const int> counts) const;

  [[nodiscard]] DistVector point(std::size_t index) const;

 private:
  int total_;
  int dim_;
  std::vector<int> counts_;
  // binom_[a][b] = C(a, b) for the ranges rank() needs.
  std::vector<std::vector<double>> binom_;
};

/// Row-major indexer for the product grid {0, 1/nu, ..., 1}^dim.
class GridIndex {
 public:
  GridIndex(int nu, int dim, std::size_t cap = kDefaultEnumerationCap);

  [[nodiscard]] int resolution() const { return nu_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return size_; }

  [[nodiscard]] std::size_t rank(std::span<const int> coords) const;
  [[nodiscard]] std::vector<int> coords(std::size_t index) const;
  [[nodiscard]] DistVector point(std::size_t index) const;

 private:
  int nu_;
  int dim_;
  std::size_t size_;
};

/// Every point of M_n for `dim` states, in CompositionIndex order.
[[nodiscard]] std::vector<DistVector> enumerate_empirical(int n, int dim,
                                                          std::size_t cap = kDefaultEnumerationCap);

/// Every point of Q_nu for `dim` states, row-major in the integer coordinates.
[[nodiscard]] std::vector<DistVector> enumerate_grid(int nu, int dim,
                                                     std::size_t cap = kDefaultEnumerationCap);

/**
 * Integer coordinates of the nearest grid point: each coordinate is clamped
 * to [0, 1] and rounded to the nearest multiple of 1/nu, ties rounded up.
 */
[[nodiscard]] std::vector<int> quantize_coords(std::span<const double> z, int nu);

/// Nearest point of Q_nu to `z` in the infinity norm (see quantize_coords).
[[nodiscard]] DistVector quantize(std::span<const double> z, int nu);

/// Infinity-norm distance.
[[nodiscard]] double linf(std::span<const double> a, std::span<const double> b);

}  // namespace mfteam
