#ifndef GMEEFP_STATE_SPACE_HPP
#define GMEEFP_STATE_SPACE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gmeefp/numerics.hpp"

namespace gmeefp {

using Rng = std::mt19937_64;

// x_k = f(x_{k-1}) + q_{k-1},  y_k = h(x_k) + r_k
struct StateSpaceModel {
  int n = 0;
  int m = 0;
  std::function<Vector(const Vector&)> f;
  std::function<Vector(const Vector&)> h;
  Matrix Q;
  Matrix R;
  // Measurement coordinates that are angles; their residuals get wrapped.
  std::vector<int> angle_components;
};

struct NoiseComponent {
  double weight = 1.0;
  double variance = 1.0;
};

struct NoiseSpec {
  enum class Kind { gaussian, mixture };

  Kind kind = Kind::gaussian;
  std::vector<NoiseComponent> components{{1.0, 1.0}};
  int dimension = 1;

  static NoiseSpec gaussian(int dim, double variance) {
    return NoiseSpec{Kind::gaussian, {{1.0, variance}}, dim};
  }

  static NoiseSpec mixture(int dim, std::vector<NoiseComponent> comps) {
    return NoiseSpec{Kind::mixture, std::move(comps), dim};
  }

  void validate() const {
    if (dimension < 1) throw DomainError("NoiseSpec: dimension must be >= 1");
    if (components.empty()) throw DomainError("NoiseSpec: no components");
    if (kind == Kind::gaussian && components.size() != 1) {
      throw DomainError("NoiseSpec: gaussian noise takes exactly one component");
    }
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0) || !(c.variance >= 0.0) || !std::isfinite(c.variance)) {
        throw DomainError("NoiseSpec: weights and variances must be non-negative");
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw DomainError("NoiseSpec: weights must sum to 1");
    }
  }
};

struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> measurements;
  std::uint64_t seed = 0;
};

/// Independent stream for (master seed, run, substream).
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t run,
                       std::uint64_t substream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(run),
                    static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return Rng(seq);
}

/// Range and four-quadrant bearing of the position part of x.
inline Vector range_bearing(const Vector& x) {
  if (x.size() < 2) throw DomainError("range_bearing: state too short");
  const double p1 = x(0);
  const double p2 = x(1);
  if (p1 == 0.0 && p2 == 0.0) {
    throw DomainError("range_bearing: bearing undefined at the origin");
  }
  double bearing = std::atan2(p2, p1);
  if (bearing <= -std::numbers::pi) bearing = std::numbers::pi;
  Vector z(2);
  z << std::hypot(p1, p2), bearing;
  return z;
}

/// Constant-velocity vehicle model in the plane with a range/bearing sensor.
/// State is [p1, p2, v1, v2].
inline StateSpaceModel make_cv_model(double dt, double q_var, double r_nominal) {
  if (!(dt > 0.0) || !(q_var > 0.0) || !(r_nominal > 0.0)) {
    throw DomainError("make_cv_model: dt and variances must be positive");
  }
  Matrix F = Matrix::Identity(4, 4);
  F(0, 2) = dt;
  F(1, 3) = dt;

  StateSpaceModel model;
  model.n = 4;
  model.m = 2;
  model.f = [F](const Vector& x) -> Vector { return F * x; };
  model.h = [](const Vector& x) -> Vector { return range_bearing(x); };
  model.Q = q_var * Matrix::Identity(4, 4);
  model.R = r_nominal * Matrix::Identity(2, 2);
  model.angle_components = {1};
  return model;
}

/// Draws one noise vector. Each coordinate independently picks a mixture
/// component by weight, then a zero-mean Gaussian of that variance.
inline Vector sample_noise(const NoiseSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(spec.dimension);
  for (int i = 0; i < spec.dimension; ++i) {
    const double u = pick(rng);
    double acc = 0.0;
    std::size_t c = spec.components.size() - 1;
    for (std::size_t j = 0; j < spec.components.size(); ++j) {
      acc += spec.components[j].weight;
      if (u < acc) {
        c = j;
        break;
      }
    }
    out(i) = std::sqrt(spec.components[c].variance) * normal(rng);
  }
  return out;
}

inline Trajectory simulate(const StateSpaceModel& model, const NoiseSpec& process,
                           const NoiseSpec& measurement, const Vector& x0, int steps,
                           Rng& rng) {
  if (steps < 1) throw DomainError("simulate: steps must be >= 1");
  if (x0.size() != model.n || process.dimension != model.n ||
      measurement.dimension != model.m) {
    throw DomainError("simulate: dimension mismatch");
  }
  process.validate();
  measurement.validate();

  Trajectory traj;
  traj.states.reserve(steps);
  traj.measurements.reserve(steps);
  Vector x = x0;
  for (int k = 0; k < steps; ++k) {
    x = model.f(x) + sample_noise(process, rng);
    Vector y = model.h(x) + sample_noise(measurement, rng);
    traj.states.push_back(x);
    traj.measurements.push_back(std::move(y));
  }
  return traj;
}

inline Trajectory simulate(const StateSpaceModel& model, const NoiseSpec& process,
                           const NoiseSpec& measurement, const Vector& x0, int steps,
                           std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, 0);
  Trajectory traj = simulate(model, process, measurement, x0, steps, rng);
  traj.seed = seed;
  return traj;
}

/// CSV with header k,x1..xn,y1..ym; 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.states.empty()) return;
  const auto n = traj.states.front().size();
  const auto m = traj.measurements.front().size();
  os << "k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",y" << i;
  os << '\n';
  const auto old_prec = os.precision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    os << (k + 1);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.states[k](i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << traj.measurements[k](i);
    os << '\n';
  }
  os.precision(old_prec);
}

}  // namespace gmeefp

#endif  // GMEEFP_STATE_SPACE_HPP
