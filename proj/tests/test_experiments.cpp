#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gmeefp/experiments.hpp"

using namespace gmeefp;

namespace {

ExperimentConfig small_config(int runs = 6, int steps = 40) {
  ExperimentConfig cfg = tracking_scenario();
  cfg.runs = runs;
  cfg.steps = steps;
  cfg.steady_window = 10;
  cfg.master_seed = 17;
  return cfg;
}

}  // namespace

TEST(Msd, ExactEstimateHitsFloor) {
  const Vector x = Vector::Ones(4);
  EXPECT_LE(msd(x, x), -2990.0);
}

TEST(Msd, KnownValues) {
  EXPECT_NEAR(msd(Vector::Zero(2), Eigen::Vector2d(1.0, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(msd(Vector::Zero(2), Eigen::Vector2d(6.0, 8.0)), 20.0, 1e-12);
  EXPECT_THROW(msd(Vector::Zero(2), Vector::Zero(3)), DomainError);
}

TEST(SteadyMsd, AveragesTail) {
  MsdCurve c;
  c.msd_db = {100.0, 1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(steady_msd(c, 3), 2.0);
  EXPECT_DOUBLE_EQ(steady_msd(c, 4), 26.5);
  EXPECT_THROW(steady_msd(c, 5), DomainError);
  EXPECT_THROW(steady_msd(c, 0), DomainError);
}

TEST(SteadyMsd, ConstantCurve) {
  MsdCurve c;
  c.msd_db.assign(200, 7.5);
  EXPECT_DOUBLE_EQ(steady_msd(c, 50), 7.5);
}

TEST(RunFailed, Definition) {
  RunOutcome r;
  r.fpi_steps = 100;
  EXPECT_FALSE(run_failed(r));
  r.nonconverged = 10;
  EXPECT_FALSE(run_failed(r));
  r.nonconverged = 11;
  EXPECT_TRUE(run_failed(r));
  r.nonconverged = 0;
  r.fallbacks = 1;
  EXPECT_TRUE(run_failed(r));
  r.fallbacks = 0;
  r.finite = false;
  EXPECT_TRUE(run_failed(r));
}

TEST(AggregateRuns, BothModes) {
  RunOutcome a, b;
  a.sq_err = {1.0, 100.0};
  b.sq_err = {100.0, 100.0};
  const auto sq = aggregate_runs("f", {a, b}, 2, Aggregate::sq_then_db);
  EXPECT_NEAR(sq.msd_db[0], 10.0 * std::log10(50.5), 1e-12);
  EXPECT_NEAR(sq.msd_db[1], 20.0, 1e-12);
  const auto db = aggregate_runs("f", {a, b}, 2, Aggregate::db_then_mean);
  EXPECT_NEAR(db.msd_db[0], 10.0, 1e-12);
  EXPECT_EQ(sq.runs_used, 2);
}

TEST(AggregateRuns, NonFiniteRunsExcluded) {
  RunOutcome good, bad;
  good.sq_err = {4.0};
  bad.sq_err = {std::nan("")};
  bad.finite = false;
  const auto c = aggregate_runs("f", {good, bad}, 1, Aggregate::sq_then_db);
  EXPECT_EQ(c.runs_used, 1);
  EXPECT_EQ(c.failed_runs, 1);
  EXPECT_NEAR(c.msd_db[0], 10.0 * std::log10(4.0), 1e-12);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.steady_window = cfg.steps + 1;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = small_config();
  cfg.runs = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = small_config();
  cfg.filters[0].params.lambda = 1.5;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(TrackingScenario, Defaults) {
  const ExperimentConfig cfg = tracking_scenario();
  EXPECT_EQ(cfg.steps, 200);
  EXPECT_EQ(cfg.dt, 0.5);
  ASSERT_EQ(cfg.filters.size(), 4u);
  EXPECT_TRUE(cfg.filters[0].plain_ckf);
  EXPECT_FALSE(cfg.filters[3].plain_ckf);
  EXPECT_EQ(cfg.filters[3].params.alpha2, 2.2);
  ASSERT_EQ(cfg.measurement.components.size(), 2u);
  EXPECT_EQ(cfg.measurement.components[1].variance, 100.0);
}

TEST(MakeRunInput, CommonRandomNumbers) {
  const ExperimentConfig cfg = small_config();
  const StateSpaceModel model = cfg.model();
  const RunInput a = make_run_input(cfg, model, 3);
  const RunInput b = make_run_input(cfg, model, 3);
  const RunInput c = make_run_input(cfg, model, 4);
  EXPECT_EQ(a.traj.measurements.back(), b.traj.measurements.back());
  EXPECT_EQ(a.init.mean, b.init.mean);
  EXPECT_NE(a.traj.measurements.back(), c.traj.measurements.back());
  EXPECT_NE(a.init.mean, cfg.x0);
}

TEST(RunMonteCarlo, IdenticalAcrossWorkerCounts) {
  const ExperimentConfig cfg = small_config(8, 30);
  const auto one = run_monte_carlo(cfg, 1);
  const auto many = run_monte_carlo(cfg, 8);
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t f = 0; f < one.size(); ++f) {
    EXPECT_EQ(one[f].filter, many[f].filter);
    EXPECT_EQ(one[f].msd_db, many[f].msd_db);
    EXPECT_EQ(one[f].fpi_converged, many[f].fpi_converged);
  }
}

TEST(RunMonteCarlo, CurvesAreFiniteAndCountsConsistent) {
  const ExperimentConfig cfg = small_config();
  const auto curves = run_monte_carlo(cfg, 2);
  ASSERT_EQ(curves.size(), 4u);
  for (const auto& c : curves) {
    EXPECT_EQ(c.msd_db.size(), static_cast<std::size_t>(cfg.steps));
    EXPECT_EQ(c.runs_used, cfg.runs) << c.filter;
    EXPECT_EQ(c.steps_total, static_cast<long>(cfg.runs) * cfg.steps);
    for (double v : c.msd_db) EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_EQ(curves[0].fpi_steps, 0);
}

TEST(RunMonteCarlo, OutlierNoiseRaisesError) {
  ExperimentConfig clean = small_config(10, 60);
  clean.filters = {make_filter("CKF", "ckf")};
  clean.measurement = NoiseSpec::gaussian(2, 1.0);
  ExperimentConfig dirty = clean;
  dirty.measurement = NoiseSpec::mixture(2, {{0.8, 1.0}, {0.2, 100.0}});
  const double a = steady_msd(run_monte_carlo(clean)[0], clean.steady_window);
  const double b = steady_msd(run_monte_carlo(dirty)[0], dirty.steady_window);
  EXPECT_GT(b, a);
}

TEST(Sweep, ShapeAndNames) {
  const ExperimentConfig cfg = small_config(3, 20);
  const SweepGrid grid = SweepGrid::product(preset("gmeefp"), {2.0, 2.2}, {4.0, 6.0, 8.0}, {0.5});
  ASSERT_EQ(grid.points.size(), 6u);
  EXPECT_EQ(grid.points[1].beta2, 6.0);
  EXPECT_EQ(grid.points[3].alpha2, 2.2);
  const SweepTable t = sweep(cfg, grid);
  ASSERT_EQ(t.cells.size(), 6u);
  EXPECT_EQ(t.cells[0].curve.filter, "alpha2=2;beta2=4;lambda=0.5");
}

TEST(Sweep, SingleCellMatchesDirectRun) {
  ExperimentConfig cfg = small_config(4, 30);
  GmeefpParams base = preset("gmeefp");
  const SweepTable t = sweep(cfg, SweepGrid::product(base, {2.4}, {4.0}, {0.3}));
  base.alpha2 = 2.4;
  base.beta2 = 4.0;
  base.lambda = 0.3;
  cfg.filters = {FilterSpec{"x", base, false}};
  const auto curves = run_monte_carlo(cfg);
  EXPECT_EQ(t.cells[0].curve.msd_db, curves[0].msd_db);
  EXPECT_DOUBLE_EQ(t.cells[0].steady_msd_db, steady_msd(curves[0], cfg.steady_window));
}

TEST(Sweep, EmptyGridThrows) {
  EXPECT_THROW(sweep(small_config(), SweepGrid{}), DomainError);
}

TEST(Csv, MsdCurves) {
  MsdCurve c;
  c.filter = "CKF";
  c.msd_db = {1.5, 2.5};
  std::ostringstream os;
  write_msd_csv(os, {c});
  EXPECT_EQ(os.str(), "filter,k,msd_db\nCKF,1,1.5\nCKF,2,2.5\n");
}

TEST(Csv, SweepTable) {
  SweepTable t;
  SweepCell cell;
  cell.point = {2.2, 6.0, 0.5};
  cell.steady_msd_db = 22.25;
  cell.failed = true;
  cell.fallback_rate = 0.25;
  t.cells.push_back(cell);
  std::ostringstream os;
  write_sweep_csv(os, t);
  EXPECT_EQ(os.str(),
            "alpha2,beta2,lambda,steady_msd_db,failed,fallback_rate\n"
            "2.2,6,0.5,22.25,1,0.25\n");
}
