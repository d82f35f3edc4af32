#include "mfteam/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mfteam/errors.hpp"
#include "mfteam/rng.hpp"

namespace mfteam {

ModelSpec::ModelSpec(int num_states, int num_actions, int horizon, std::vector<double> initial_dist)
    : nx_(num_states), nu_(num_actions), horizon_(horizon), initial_(std::move(initial_dist)) {
  if (nx_ < 1 || nu_ < 1 || horizon_ < 1) {
    throw ShapeError("model sizes must be positive (states, actions, horizon)");
  }
  if (initial_.size() != static_cast<std::size_t>(nx_)) {
    throw ShapeError("initial_dist has length " + std::to_string(initial_.size()) + ", expected " +
                     std::to_string(nx_));
  }
  const std::size_t tx = static_cast<std::size_t>(horizon_) * nx_;
  a0_.assign(tx * nu_ * nx_, 0.0);
  b_.assign(tx * nu_ * nx_ * nx_, 0.0);
  c0_.assign(tx * nu_, 0.0);
  c1_.assign(tx * nu_ * nx_, 0.0);
}

void ModelSpec::check_indices(Stage t, State x, Action u) const {
  if (t < 0 || t >= horizon_) throw std::out_of_range("stage index out of range");
  if (x < 0 || x >= nx_) throw std::out_of_range("state index out of range");
  if (u < 0 || u >= nu_) throw std::out_of_range("action index out of range");
}

void FunctionalModel::validate() const {
  if (num_states < 1 || num_actions < 1 || horizon < 1) throw InvalidArgument("functional model sizes must be positive");
  if (initial_dist.size() != static_cast<std::size_t>(num_states) || !is_probability_vector(initial_dist)) {
    throw InvalidArgument("functional model initial_dist is not a pmf over the states");
  }
  if (noise_pmf.empty() || !is_probability_vector(noise_pmf)) {
    throw InvalidArgument("functional model noise_pmf is not a pmf");
  }
  if (!dynamics || !cost) throw InvalidArgument("functional model callbacks are not set");
}

// ---------------------------------------------------------------------------

bool ValidationReport::has(std::string_view kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::to_string() const {
  if (ok()) return "OK\n";
  std::ostringstream os;
  for (const auto& v : violations) os << v.kind << " at " << v.where << " (value " << v.value << ")\n";
  return os.str();
}

ValidationReport validate_model(const ModelSpec& m, double tol) {
  ValidationReport report;
  const int nx = m.num_states();
  auto add = [&](const char* kind, std::string where, double value) {
    report.violations.push_back({kind, std::move(where), value});
  };
  auto idx = [](std::initializer_list<int> ids) {
    std::ostringstream os;
    os << '[';
    bool first = true;
    for (int i : ids) {
      if (!first) os << ',';
      os << i;
      first = false;
    }
    os << ']';
    return os.str();
  };

  {
    double sum = 0.0;
    bool bad = false;
    for (int x = 0; x < nx; ++x) {
      const double v = m.initial_dist()[static_cast<std::size_t>(x)];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) bad = true;
      sum += v;
    }
    if (bad || std::abs(sum - 1.0) > tol) add(violation::kInitialDist, "initial_dist", sum);
  }

  for (Stage t = 0; t < m.horizon(); ++t) {
    for (State x = 0; x < nx; ++x) {
      for (Action u = 0; u < m.num_actions(); ++u) {
        double base_sum = 0.0;
        for (State y = 0; y < nx; ++y) {
          const double a = m.kernel_base(t, x, u, y);
          if (!std::isfinite(a)) add(violation::kNonFinite, "kernel_base" + idx({t, x, u, y}), a);
          base_sum += a;
        }
        if (std::abs(base_sum - 1.0) > tol) add(violation::kKernelBaseRowSum, idx({t, x, u}), base_sum);

        for (State xp = 0; xp < nx; ++xp) {
          double coeff_sum = 0.0;
          for (State y = 0; y < nx; ++y) {
            const double b = m.kernel_coeff(t, x, u, xp, y);
            if (!std::isfinite(b)) add(violation::kNonFinite, "kernel_coeff" + idx({t, x, u, xp, y}), b);
            coeff_sum += b;
            const double vertex = m.kernel_base(t, x, u, y) + b;
            if (vertex < -tol) add(violation::kNegativeKernel, idx({t, x, u, xp, y}), vertex);
          }
          if (std::abs(coeff_sum) > tol) add(violation::kKernelCoeffRowSum, idx({t, x, u, xp}), coeff_sum);

          const double c1 = m.cost_coeff(t, x, u, xp);
          if (!std::isfinite(c1)) add(violation::kNonFinite, "cost_coeff" + idx({t, x, u, xp}), c1);
          const double vertex_cost = m.cost_base(t, x, u) + c1;
          if (vertex_cost < -tol) add(violation::kNegativeCost, idx({t, x, u, xp}), vertex_cost);
        }
        const double c0 = m.cost_base(t, x, u);
        if (!std::isfinite(c0)) add(violation::kNonFinite, "cost_base" + idx({t, x, u}), c0);
      }
    }
  }
  return report;
}

std::vector<double> kernel_eval(const ModelSpec& m, Stage t, State x, Action u, std::span<const double> z) {
  m.check_indices(t, x, u);
  const int nx = m.num_states();
  if (z.size() != static_cast<std::size_t>(nx)) throw std::out_of_range("kernel_eval: mean-field dimension mismatch");
  std::vector<double> row(static_cast<std::size_t>(nx));
  for (State y = 0; y < nx; ++y) {
    double p = m.kernel_base(t, x, u, y);
    for (State xp = 0; xp < nx; ++xp) p += z[static_cast<std::size_t>(xp)] * m.kernel_coeff(t, x, u, xp, y);
    row[static_cast<std::size_t>(y)] = p;
  }
  return row;
}

double cost_eval(const ModelSpec& m, Stage t, State x, Action u, std::span<const double> z) {
  m.check_indices(t, x, u);
  const int nx = m.num_states();
  if (z.size() != static_cast<std::size_t>(nx)) throw std::out_of_range("cost_eval: mean-field dimension mismatch");
  double c = m.cost_base(t, x, u);
  for (State xp = 0; xp < nx; ++xp) c += z[static_cast<std::size_t>(xp)] * m.cost_coeff(t, x, u, xp);
  return c;
}

std::vector<double> kernel_from_functional(const FunctionalModel& fm, Stage t, State x, Action u,
                                           std::span<const double> z) {
  if (t < 0 || t >= fm.horizon || x < 0 || x >= fm.num_states || u < 0 || u >= fm.num_actions) {
    throw std::out_of_range("kernel_from_functional: index out of range");
  }
  std::vector<double> row(static_cast<std::size_t>(fm.num_states), 0.0);
  for (std::size_t w = 0; w < fm.noise_pmf.size(); ++w) {
    const State y = fm.dynamics(t, x, u, static_cast<int>(w), z);
    if (y < 0 || y >= fm.num_states) throw std::out_of_range("functional dynamics returned an invalid state");
    row[static_cast<std::size_t>(y)] += fm.noise_pmf[w];
  }
  return row;
}

// ---------------------------------------------------------------------------

LipschitzConstants lipschitz_constants(const ModelSpec& m) {
  const int nx = m.num_states();
  const int nu = m.num_actions();
  const auto T = static_cast<std::size_t>(m.horizon());
  LipschitzConstants k;
  for (auto* v : {&k.kernel, &k.cost, &k.flow, &k.lifted_cost, &k.value_gap, &k.value, &k.vertex_cost_max,
                  &k.kernel_box_max, &k.cost_box_max}) {
    v->assign(T, 0.0);
  }

  for (Stage t = 0; t < m.horizon(); ++t) {
    const auto ts = static_cast<std::size_t>(t);
    for (State x = 0; x < nx; ++x) {
      for (Action u = 0; u < nu; ++u) {
        for (State y = 0; y < nx; ++y) {
          double abs_sum = 0.0, pos = 0.0, neg = 0.0;
          for (State xp = 0; xp < nx; ++xp) {
            const double b = m.kernel_coeff(t, x, u, xp, y);
            abs_sum += std::abs(b);
            (b > 0 ? pos : neg) += b;
          }
          const double a = m.kernel_base(t, x, u, y);
          k.kernel[ts] = std::max(k.kernel[ts], abs_sum);
          k.kernel_box_max[ts] = std::max({k.kernel_box_max[ts], std::abs(a + pos), std::abs(a + neg)});
        }
        double abs_sum = 0.0, pos = 0.0, neg = 0.0;
        const double c0 = m.cost_base(t, x, u);
        for (State xp = 0; xp < nx; ++xp) {
          const double c1 = m.cost_coeff(t, x, u, xp);
          abs_sum += std::abs(c1);
          (c1 > 0 ? pos : neg) += c1;
          k.vertex_cost_max[ts] = std::max(k.vertex_cost_max[ts], c0 + c1);
        }
        k.cost[ts] = std::max(k.cost[ts], abs_sum);
        k.cost_box_max[ts] = std::max({k.cost_box_max[ts], std::abs(c0 + pos), std::abs(c0 + neg)});
      }
    }
    k.flow[ts] = nx * (k.kernel_box_max[ts] + k.kernel[ts]);
    k.lifted_cost[ts] = nx * (k.cost_box_max[ts] + k.cost[ts]);
  }

  k.value_gap[T - 1] = k.lifted_cost[T - 1];
  for (std::size_t t = T - 1; t-- > 0;) {
    k.value_gap[t] = k.lifted_cost[t] + k.value_gap[t + 1] * k.flow[t];
  }
  k.value = k.value_gap;
  return k;
}

// ---------------------------------------------------------------------------

namespace {

// Uniform-on-simplex row from exponential spacings.
std::vector<double> random_row(const CounterRng& rng, std::uint64_t tag, int dim) {
  std::vector<double> row(static_cast<std::size_t>(dim));
  double sum = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double u = rng.uniform(tag, static_cast<std::uint64_t>(i));
    row[static_cast<std::size_t>(i)] = -std::log1p(-u);
    sum += row[static_cast<std::size_t>(i)];
  }
  for (double& v : row) v /= sum;
  return row;
}

}  // namespace

ModelSpec random_admissible_model(std::uint64_t seed, int nx, int nu, int horizon, const RandomModelOptions& opt) {
  const CounterRng root(seed);
  ModelSpec m(nx, nu, horizon, random_row(root.split(0), 0, nx));
  std::uint64_t tag = 1;
  for (Stage t = 0; t < horizon; ++t) {
    if (opt.time_invariant && t > 0) {
      for (State x = 0; x < nx; ++x)
        for (Action u = 0; u < nu; ++u) {
          m.cost_base(t, x, u) = m.cost_base(0, x, u);
          for (State y = 0; y < nx; ++y) {
            m.kernel_base(t, x, u, y) = m.kernel_base(0, x, u, y);
            m.cost_coeff(t, x, u, y) = m.cost_coeff(0, x, u, y);
            for (State xp = 0; xp < nx; ++xp) m.kernel_coeff(t, x, u, xp, y) = m.kernel_coeff(0, x, u, xp, y);
          }
        }
      continue;
    }
    const CounterRng stage_rng = root.split(static_cast<std::uint64_t>(t) + 1);
    for (State x = 0; x < nx; ++x) {
      for (Action u = 0; u < nu; ++u) {
        const auto base = random_row(stage_rng, tag++, nx);
        for (State y = 0; y < nx; ++y) m.kernel_base(t, x, u, y) = base[static_cast<std::size_t>(y)];
        // A0 + B(x') = (1 - s) A0 + s D is a probability vector for s in [0, 1].
        for (State xp = 0; xp < nx; ++xp) {
          const auto target = random_row(stage_rng, tag++, nx);
          for (State y = 0; y < nx; ++y) {
            const auto ys = static_cast<std::size_t>(y);
            m.kernel_coeff(t, x, u, xp, y) = opt.coupling * (target[ys] - base[ys]);
          }
        }
        const double c0 = stage_rng.uniform(tag++, 0);
        m.cost_base(t, x, u) = c0;
        for (State xp = 0; xp < nx; ++xp) {
          const double r = stage_rng.uniform(tag, static_cast<std::uint64_t>(xp));
          m.cost_coeff(t, x, u, xp) = opt.cost_coupling * (-c0 + r * (1.0 + c0));
        }
        ++tag;
      }
    }
  }
  return m;
}

}  // namespace mfteam
