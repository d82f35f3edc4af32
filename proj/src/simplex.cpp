#include "mfteam/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mfteam/errors.hpp"

namespace mfteam {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

void check_cap(std::uint64_t count, std::size_t cap, const char* what) {
  if (count > cap) {
    throw CapExceeded(std::string(what) + ": " +
                      (count == kSaturated ? std::string("overflow") : std::to_string(count)) +
                      " points exceeds cap " + std::to_string(cap));
  }
}

bool is_multiple_of(double v, int denom) {
  const double scaled = v * denom;
  return std::abs(scaled - std::round(scaled)) <= kDistTolerance * denom;
}

}  // namespace

bool is_probability_vector(std::span<const double> z, double tol) {
  double sum = 0.0;
  for (double v : z) {
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

bool satisfies_flavor(const DistVector& v) {
  switch (v.flavor) {
    case Flavor::simplex:
      return is_probability_vector(v.values);
    case Flavor::empirical:
      return v.resolution >= 1 && is_probability_vector(v.values) &&
             std::all_of(v.values.begin(), v.values.end(),
                         [&](double x) { return is_multiple_of(x, v.resolution); });
    case Flavor::grid:
      return v.resolution >= 1 && std::all_of(v.values.begin(), v.values.end(), [&](double x) {
               return x >= -kDistTolerance && x <= 1.0 + kDistTolerance && is_multiple_of(x, v.resolution);
             });
    case Flavor::box:
      return std::all_of(v.values.begin(), v.values.end(),
                         [](double x) { return x >= 0.0 && x <= 1.0; });
  }
  return false;
}

DistVector mean_field_of(std::span<const State> states, int dim) {
  if (states.empty()) throw InvalidArgument("mean_field_of: empty population");
  if (dim < 1) throw InvalidArgument("mean_field_of: dimension must be positive");
  std::vector<int> counts(static_cast<std::size_t>(dim), 0);
  for (State s : states) {
    if (s < 0 || s >= dim) throw std::out_of_range("mean_field_of: state out of range");
    ++counts[static_cast<std::size_t>(s)];
  }
  return empirical_from_counts(counts);
}

DistVector empirical_from_counts(std::span<const int> counts) {
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  if (n <= 0) throw InvalidArgument("empirical_from_counts: empty population");
  std::vector<double> values(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) values[i] = static_cast<double>(counts[i]) / n;
  return {std::move(values), Flavor::empirical, n};
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    const std::uint64_t g = std::gcd(result, static_cast<std::uint64_t>(i));
    const std::uint64_t r = result / g;
    const std::uint64_t d = static_cast<std::uint64_t>(i) / g;
    result = saturating_mul(r, num / d);
    if (result == kSaturated) return kSaturated;
  }
  return result;
}

std::uint64_t empirical_count(int n, int dim) { return binomial(n + dim - 1, dim - 1); }

std::uint64_t grid_count(int nu, int dim) {
  std::uint64_t result = 1;
  for (int i = 0; i < dim; ++i) result = saturating_mul(result, static_cast<std::uint64_t>(nu) + 1);
  return result;
}

// ---------------------------------------------------------------------------
// CompositionIndex

CompositionIndex::CompositionIndex(int total, int dim, std::size_t cap) : total_(total), dim_(dim) {
  if (total < 0 || dim < 1) throw InvalidArgument("CompositionIndex: need total >= 0 and dim >= 1");
  const std::uint64_t count = empirical_count(total, dim);
  check_cap(count, cap, "empirical enumeration");

  counts_.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(dim));
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  // Odometer over the first dim-1 parts in lexicographic order; the last
  // part absorbs the remainder.
  auto emit = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == dim - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      counts_.insert(counts_.end(), current.begin(), current.end());
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      current[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  emit(emit, 0, total);

  binom_.assign(static_cast<std::size_t>(total + dim + 1), std::vector<double>(static_cast<std::size_t>(dim + 1), 0.0));
  for (int a = 0; a <= total + dim; ++a) {
    for (int b = 0; b <= dim; ++b) {
      binom_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = static_cast<double>(binomial(a, b));
    }
  }
}

std::size_t CompositionIndex::rank(std::span<const int> counts) const {
  if (counts.size() != static_cast<std::size_t>(dim_)) throw InvalidArgument("CompositionIndex::rank: wrong dimension");
  std::size_t r = 0;
  int remaining = total_;
  for (int i = 0; i + 1 < dim_; ++i) {
    const int c = counts[static_cast<std::size_t>(i)];
    if (c < 0 || c > remaining) throw InvalidArgument("CompositionIndex::rank: counts do not sum to total");
    const int parts = dim_ - i;
    // Number of compositions whose i-th part is smaller than c (hockey stick).
    const double below = binom_[static_cast<std::size_t>(remaining + parts - 1)][static_cast<std::size_t>(parts - 1)] -
                         binom_[static_cast<std::size_t>(remaining - c + parts - 1)][static_cast<std::size_t>(parts - 1)];
    r += static_cast<std::size_t>(below);
    remaining -= c;
  }
  if (counts[static_cast<std::size_t>(dim_ - 1)] != remaining) {
    throw InvalidArgument("CompositionIndex::rank: counts do not sum to total");
  }
  return r;
}

DistVector CompositionIndex::point(std::size_t index) const {
  if (total_ == 0) throw InvalidArgument("CompositionIndex::point: empty population");
  return empirical_from_counts(counts(index));
}

// ---------------------------------------------------------------------------
// GridIndex

GridIndex::GridIndex(int nu, int dim, std::size_t cap) : nu_(nu), dim_(dim) {
  if (nu < 1 || dim < 1) throw InvalidArgument("GridIndex: need nu >= 1 and dim >= 1");
  const std::uint64_t count = grid_count(nu, dim);
  check_cap(count, cap, "grid enumeration");
  size_ = static_cast<std::size_t>(count);
}

std::size_t GridIndex::rank(std::span<const int> coords) const {
  std::size_t r = 0;
  for (int c : coords) {
    if (c < 0 || c > nu_) throw std::out_of_range("GridIndex::rank: coordinate out of range");
    r = r * static_cast<std::size_t>(nu_ + 1) + static_cast<std::size_t>(c);
  }
  return r;
}

std::vector<int> GridIndex::coords(std::size_t index) const {
  std::vector<int> c(static_cast<std::size_t>(dim_));
  for (int i = dim_ - 1; i >= 0; --i) {
    c[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(nu_ + 1));
    index /= static_cast<std::size_t>(nu_ + 1);
  }
  return c;
}

DistVector GridIndex::point(std::size_t index) const {
  const auto c = coords(index);
  std::vector<double> values(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) values[i] = static_cast<double>(c[i]) / nu_;
  return {std::move(values), Flavor::grid, nu_};
}

std::vector<DistVector> enumerate_empirical(int n, int dim, std::size_t cap) {
  if (n < 1) throw InvalidArgument("enumerate_empirical: n must be positive");
  const CompositionIndex index(n, dim, cap);
  std::vector<DistVector> out;
  out.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out.push_back(index.point(i));
  return out;
}

std::vector<DistVector> enumerate_grid(int nu, int dim, std::size_t cap) {
  const GridIndex index(nu, dim, cap);
  std::vector<DistVector> out;
  out.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out.push_back(index.point(i));
  return out;
}

std::vector<int> quantize_coords(std::span<const double> z, int nu) {
  if (nu < 1) throw InvalidArgument("quantize: resolution must be positive");
  std::vector<int> c(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double clamped = std::clamp(z[i], 0.0, 1.0);
    c[i] = std::min(nu, static_cast<int>(std::floor(clamped * nu + 0.5)));
  }
  return c;
}

DistVector quantize(std::span<const double> z, int nu) {
  const auto c = quantize_coords(z, nu);
  std::vector<double> values(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) values[i] = static_cast<double>(c[i]) / nu;
  return {std::move(values), Flavor::grid, nu};
}

double linf(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("linf: dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace mfteam
