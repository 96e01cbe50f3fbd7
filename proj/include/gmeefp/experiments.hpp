#ifndef GMEEFP_EXPERIMENTS_HPP
#define GMEEFP_EXPERIMENTS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gmeefp/ckf.hpp"
#include "gmeefp/gmeefp_ckf.hpp"
#include "gmeefp/state_space.hpp"

namespace gmeefp {

enum class Aggregate {
  sq_then_db,    // average ‖x − x̂‖² over runs, then 10·log10
  db_then_mean,  // 10·log10 per run, then average
};

struct FilterSpec {
  std::string name;
  GmeefpParams params;
  // Run the classical CKF recursion instead of the robust update.
  bool plain_ckf = false;
};

inline FilterSpec make_filter(std::string name, std::string_view preset_name) {
  FilterSpec f;
  f.name = std::move(name);
  f.params = preset(preset_name);
  f.plain_ckf = preset_name == "ckf";
  return f;
}

struct ExperimentConfig {
  double dt = 0.5;
  double q_var = 0.1;
  double r_nominal = 1.0;
  NoiseSpec process = NoiseSpec::gaussian(4, 0.1);
  NoiseSpec measurement = NoiseSpec::mixture(2, {{0.96, 1.0}, {0.04, 100.0}});
  Vector x0 = (Vector(4) << 1.0, 1.0, 10.0, 20.0).finished();
  // x̂0 ~ N(x0, init_var·I) and P0 = init_var·I.
  double init_var = 1.0;
  int steps = 200;
  int runs = 200;
  std::uint64_t master_seed = 1;
  std::vector<FilterSpec> filters;
  int steady_window = 50;
  Aggregate aggregate = Aggregate::sq_then_db;

  void validate() const {
    if (steps < 1 || runs < 1) throw DomainError("config: steps and runs must be >= 1");
    if (steady_window < 1 || steady_window > steps) {
      throw DomainError("config: steady_window must lie in [1, steps]");
    }
    if (!(init_var > 0.0)) throw DomainError("config: init_var must be positive");
    if (x0.size() != 4) throw DomainError("config: x0 must have 4 entries");
    if (process.dimension != 4 || measurement.dimension != 2) {
      throw DomainError("config: noise dimensions must be 4 (process) and 2 (measurement)");
    }
    process.validate();
    measurement.validate();
    for (const auto& f : filters) f.params.validate();
  }

  StateSpaceModel model() const { return make_cv_model(dt, q_var, r_nominal); }
};

/// The vehicle-tracking scenario under mixed-Gaussian measurement noise,
/// with the four compared filters.
inline ExperimentConfig tracking_scenario() {
  ExperimentConfig cfg;
  cfg.filters = {make_filter("CKF", "ckf"), make_filter("MCCKF", "mcc"),
                 make_filter("MEEF-CKF", "meef"), make_filter("GMEEFP-CKF", "gmeefp")};
  return cfg;
}

/// Per-step squared error of one filter on one run.
struct RunOutcome {
  std::vector<double> sq_err;
  int fallbacks = 0;
  int nonconverged = 0;
  int fpi_steps = 0;
  bool finite = true;
};

struct MsdCurve {
  std::string filter;
  std::vector<double> msd_db;
  int runs_used = 0;
  int failed_runs = 0;
  long fallbacks = 0;
  long fpi_steps = 0;
  long fpi_converged = 0;
  long steps_total = 0;

  double fallback_rate() const {
    return steps_total ? static_cast<double>(fallbacks) / static_cast<double>(steps_total) : 0.0;
  }
  double convergence_rate() const {
    return fpi_steps ? static_cast<double>(fpi_converged) / static_cast<double>(fpi_steps) : 1.0;
  }
};

/// 10·log10‖x_true − x_est‖², the squared norm floored at 1e-300.
inline double msd(const Vector& x_true, const Vector& x_est) {
  if (x_true.size() != x_est.size()) throw DomainError("msd: dimension mismatch");
  return 10.0 * std::log10(std::max((x_true - x_est).squaredNorm(), 1e-300));
}

inline double steady_msd(const MsdCurve& curve, int window) {
  if (window < 1 || static_cast<std::size_t>(window) > curve.msd_db.size()) {
    throw DomainError("steady_msd: window exceeds curve length");
  }
  double sum = 0.0;
  for (auto it = curve.msd_db.end() - window; it != curve.msd_db.end(); ++it) sum += *it;
  return sum / window;
}

/// A run is counted as failed when it produced a non-finite estimate, used
/// the CKF fallback, or missed FPI convergence on more than 10% of its steps.
inline bool run_failed(const RunOutcome& r) {
  if (!r.finite || r.fallbacks > 0) return true;
  return r.fpi_steps > 0 && 10 * r.nonconverged > r.fpi_steps;
}

namespace detail {

inline RunOutcome run_filter(const FilterSpec& filter, const StateSpaceModel& model,
                             const Trajectory& traj, const GaussianBelief& init) {
  RunOutcome out;
  out.sq_err.assign(traj.states.size(), std::numeric_limits<double>::quiet_NaN());
  GaussianBelief b = init;
  try {
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      if (filter.plain_ckf) {
        b = ckf_step(b, model, traj.measurements[k]);
      } else {
        StepResult s = gmeefp_step(b, model, traj.measurements[k], filter.params);
        if (s.fallback) {
          ++out.fallbacks;
        } else {
          ++out.fpi_steps;
          if (!s.fpi.converged) ++out.nonconverged;
        }
        b = std::move(s.belief);
      }
      if (!b.mean.allFinite() || !b.cov.allFinite()) {
        out.finite = false;
        return out;
      }
      out.sq_err[k] = (traj.states[k] - b.mean).squaredNorm();
    }
  } catch (const Error&) {
    out.finite = false;
  }
  return out;
}

template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Noise realization and initial estimate of one Monte Carlo run. Shared by
/// every filter, so comparisons use common random numbers.
struct RunInput {
  Trajectory traj;
  GaussianBelief init;
};

inline RunInput make_run_input(const ExperimentConfig& cfg, const StateSpaceModel& model,
                               int run) {
  RunInput in;
  Rng rng = make_stream(cfg.master_seed, static_cast<std::uint64_t>(run), 0);
  in.traj = simulate(model, cfg.process, cfg.measurement, cfg.x0, cfg.steps, rng);
  in.traj.seed = cfg.master_seed;

  Rng init_rng = make_stream(cfg.master_seed, static_cast<std::uint64_t>(run), 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(cfg.init_var);
  in.init.mean = cfg.x0;
  for (Eigen::Index i = 0; i < in.init.mean.size(); ++i) in.init.mean(i) += sd * normal(init_rng);
  in.init.cov = cfg.init_var * Matrix::Identity(cfg.x0.size(), cfg.x0.size());
  return in;
}

inline MsdCurve aggregate_runs(const std::string& name, const std::vector<RunOutcome>& runs,
                               int steps, Aggregate mode) {
  MsdCurve c;
  c.filter = name;
  c.msd_db.assign(steps, 0.0);
  std::vector<double> acc(steps, 0.0);
  for (const auto& r : runs) {
    c.fallbacks += r.fallbacks;
    c.fpi_steps += r.fpi_steps;
    c.fpi_converged += r.fpi_steps - r.nonconverged;
    c.steps_total += steps;
    if (run_failed(r)) ++c.failed_runs;
    if (!r.finite) continue;
    ++c.runs_used;
    for (int k = 0; k < steps; ++k) {
      acc[k] += mode == Aggregate::sq_then_db
                    ? r.sq_err[k]
                    : 10.0 * std::log10(std::max(r.sq_err[k], 1e-300));
    }
  }
  for (int k = 0; k < steps; ++k) {
    if (c.runs_used == 0) {
      c.msd_db[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double mean = acc[k] / c.runs_used;
    c.msd_db[k] = mode == Aggregate::sq_then_db ? 10.0 * std::log10(std::max(mean, 1e-300)) : mean;
  }
  return c;
}

/// Runs every filter of the config on `runs` independent trajectories.
/// Output is identical for any worker count.
inline std::vector<MsdCurve> run_monte_carlo(const ExperimentConfig& cfg, int workers = 1) {
  cfg.validate();
  const StateSpaceModel model = cfg.model();
  const auto nf = cfg.filters.size();
  std::vector<std::vector<RunOutcome>> outcomes(nf, std::vector<RunOutcome>(cfg.runs));

  detail::parallel_for(cfg.runs, workers, [&](int run) {
    const RunInput in = make_run_input(cfg, model, run);
    for (std::size_t f = 0; f < nf; ++f) {
      outcomes[f][run] = detail::run_filter(cfg.filters[f], model, in.traj, in.init);
    }
  });

  std::vector<MsdCurve> curves;
  curves.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    curves.push_back(aggregate_runs(cfg.filters[f].name, outcomes[f], cfg.steps, cfg.aggregate));
  }
  return curves;
}

struct SweepPoint {
  double alpha2 = 2.2;
  double beta2 = 6.0;
  double lambda = 0.5;
};

struct SweepGrid {
  GmeefpParams base;
  std::vector<SweepPoint> points;

  /// Cartesian product of the three axes, alpha2 outermost.
  static SweepGrid product(const GmeefpParams& base, const std::vector<double>& alpha2,
                           const std::vector<double>& beta2, const std::vector<double>& lambda) {
    SweepGrid g;
    g.base = base;
    for (double a : alpha2) {
      for (double b : beta2) {
        for (double l : lambda) g.points.push_back({a, b, l});
      }
    }
    return g;
  }
};

struct SweepCell {
  SweepPoint point;
  double steady_msd_db = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  double fallback_rate = 0.0;
  MsdCurve curve;
};

struct SweepTable {
  std::vector<SweepCell> cells;
};

/// One steady MSD per grid point. All cells see the same noise realizations.
/// A cell is failed when more than 10% of its runs failed.
inline SweepTable sweep(const ExperimentConfig& cfg, const SweepGrid& grid, int workers = 1) {
  if (grid.points.empty()) throw DomainError("sweep: empty grid");
  ExperimentConfig run_cfg = cfg;
  run_cfg.filters.clear();
  for (const auto& pt : grid.points) {
    FilterSpec f;
    f.params = grid.base;
    f.params.alpha2 = pt.alpha2;
    f.params.beta2 = pt.beta2;
    f.params.lambda = pt.lambda;
    std::ostringstream name;
    name << "alpha2=" << pt.alpha2 << ";beta2=" << pt.beta2 << ";lambda=" << pt.lambda;
    f.name = name.str();
    run_cfg.filters.push_back(std::move(f));
  }
  const std::vector<MsdCurve> curves = run_monte_carlo(run_cfg, workers);

  SweepTable table;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    SweepCell cell;
    cell.point = grid.points[i];
    cell.curve = curves[i];
    if (cell.curve.runs_used > 0) cell.steady_msd_db = steady_msd(cell.curve, cfg.steady_window);
    cell.failed = 10 * cell.curve.failed_runs > cfg.runs || !std::isfinite(cell.steady_msd_db);
    cell.fallback_rate = cell.curve.fallback_rate();
    table.cells.push_back(std::move(cell));
  }
  return table;
}

namespace detail {

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

inline void write_msd_csv(std::ostream& os, const std::vector<MsdCurve>& curves) {
  os << "filter,k,msd_db\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.msd_db.size(); ++k) {
      os << c.filter << ',' << (k + 1) << ',' << detail::fmt(c.msd_db[k]) << '\n';
    }
  }
}

inline void write_sweep_csv(std::ostream& os, const SweepTable& table) {
  os << "alpha2,beta2,lambda,steady_msd_db,failed,fallback_rate\n";
  for (const auto& c : table.cells) {
    os << detail::fmt(c.point.alpha2) << ',' << detail::fmt(c.point.beta2) << ','
       << detail::fmt(c.point.lambda) << ',' << detail::fmt(c.steady_msd_db) << ','
       << (c.failed ? 1 : 0) << ',' << detail::fmt(c.fallback_rate) << '\n';
  }
}

}  // namespace gmeefp

#endif  // GMEEFP_EXPERIMENTS_HPP
