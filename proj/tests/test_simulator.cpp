#include <gtest/gtest.h>

#include <sstream>

#include <liqstring/simulator.hpp>

#include "test_util.hpp"

using namespace liqstring;
using liqstring::testing::sample_mean;
using liqstring::testing::sample_stderr;
using liqstring::testing::toy_model;

TEST(StepState, ZeroIncrementsOnlyAdvanceTime) {
  const auto m = toy_model();
  const auto st = model_state::zero(m);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.n());
  const auto next = step_state(st, zero, &zero, m, 0);
  EXPECT_EQ(next.X0, 0.0);
  EXPECT_EQ(next.Xq.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(next.t, m.grid.dt);
}

TEST(StepState, ConstantLambdaShiftsMean) {
  const auto m = toy_model(10, 50);
  const double c = 2.0;
  const Eigen::VectorXd lam = Eigen::VectorXd::Constant(m.n(), c);
  std::vector<double> d;
  Eigen::VectorXd dB(m.n());
  for (int p = 0; p < 20000; ++p) {
    sample_sheet_column(m.grid, 9, p, 0, dB.data());
    d.push_back(step_state(model_state::zero(m), dB, &lam, m, 0).X0);
  }
  const double expect = -c * m.sigbar_Q0.sum() * m.grid.ds * m.grid.dt;
  EXPECT_NEAR(sample_mean(d), expect, 4.0 * sample_stderr(d));
}

TEST(SimulatePath, FrozenSurfaceKeepsPrice) {
  auto m = toy_model();
  m.sigbar_Q0.setZero();
  m.sigbar_q_head.setZero();
  m.sigbar_q.setZero();
  sim_config cfg;
  cfg.seed = 1;
  const auto p = run(m, cfg);
  for (double v : p[0].pi) EXPECT_EQ(v, p[0].pi.front());
  EXPECT_NEAR(p[0].pi.front(), 100.5, 1e-12);
}

TEST(Run, DeterministicAcrossThreads) {
  const auto m = toy_model(10, 20);
  sim_config cfg;
  cfg.n_paths = 12;
  cfg.seed = 77;
  cfg.meas = measure::risk_neutral;
  cfg.threads = 1;
  const auto a = run(m, cfg);
  cfg.threads = 4;
  const auto b = run(m, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].path_id, b[i].path_id);
    EXPECT_EQ(a[i].pi, b[i].pi);
  }
}

TEST(Run, FirstPathOffsetSelectsStreams) {
  const auto m = toy_model();
  sim_config cfg;
  cfg.n_paths = 5;
  cfg.seed = 3;
  const auto all = run(m, cfg);
  cfg.first_path = 3;
  cfg.n_paths = 2;
  const auto tail = run(m, cfg);
  EXPECT_EQ(tail[0].pi, all[3].pi);
  EXPECT_EQ(tail[1].path_id, 4);
}

TEST(Run, PhysicalDownwardSloping) {
  const auto m = toy_model(10, 40);
  sim_config cfg;
  cfg.n_paths = 50;
  cfg.seed = 8;
  cfg.record_surfaces = true;
  for (const auto& p : run(m, cfg)) {
    ASSERT_FALSE(p.failed);
    for (const auto& s : p.surfaces)
      for (int i = 0; i < m.n(); ++i) EXPECT_LT(s.Q[i + 1], s.Q[i]);
    for (double v : p.pi) {
      EXPECT_GE(v, m.eps_S());
      EXPECT_LE(v, m.S());
    }
  }
}

TEST(Run, RiskNeutralResidualAndClearing) {
  const auto m = toy_model(10, 40);
  sim_config cfg;
  cfg.n_paths = 40;
  cfg.seed = 4;
  cfg.meas = measure::risk_neutral;
  cfg.record_surfaces = true;
  cfg.positions = {m.x_min, m.x_max};
  const auto paths = run(m, cfg);
  const auto rep = summarize(paths, m);
  EXPECT_EQ(rep.failed, 0);
  EXPECT_LE(rep.max_residual, 1e-8);
  for (const auto& p : paths)
    for (std::size_t j = 0; j < p.surfaces.size(); ++j) {
      const auto& Q = p.surfaces[j].Q;
      const auto cp = clearing_price(Q, m.prices);
      const double interp = (1 - cp.weight) * Q[cp.cell] + cp.weight * Q[cp.cell + 1];
      EXPECT_NEAR(interp, 0.0, 1e-9 * Q.cwiseAbs().maxCoeff());
      EXPECT_EQ(cp.price, p.pi[j]);
    }
}

TEST(Run, MeasureCouplingIsTheLambdaShift) {
  // same draws: the two state paths differ by the accumulated -lambda ds dt loadings
  const auto m = toy_model(6, 10);
  sim_config cfg;
  cfg.seed = 12;
  cfg.meas = measure::risk_neutral;
  cfg.record_lambda = true;
  cfg.record_surfaces = true;
  const auto rn = run(m, cfg)[0];
  ASSERT_TRUE(rn.lambda.has_value());
  model_state phys = model_state::zero(m), shifted = model_state::zero(m);
  Eigen::VectorXd dB(m.n());
  for (int j = 0; j < m.grid.n_steps; ++j) {
    sample_sheet_column(m.grid, cfg.seed, 0, j, dB.data());
    phys = step_state(phys, dB, nullptr, m, j);
    const Eigen::VectorXd lam = rn.lambda->values.col(j);
    shifted = step_state(shifted, dB, &lam, m, j);
  }
  const auto s = surface_from_state(shifted, m);
  EXPECT_NEAR((s.Q - rn.surfaces.back().Q).cwiseAbs().maxCoeff(), 0.0, 1e-9);
  // the difference of the states is linear in the recorded lambda
  model_state diff = model_state::zero(m);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.n());
  for (int j = 0; j < m.grid.n_steps; ++j) {
    const Eigen::VectorXd lam = rn.lambda->values.col(j);
    diff = step_state(diff, zero, &lam, m, j);
  }
  EXPECT_NEAR(shifted.X0 - phys.X0, diff.X0, 1e-12);
  EXPECT_LE((shifted.Xq - phys.Xq - diff.Xq).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Run, ClearingFailureIsCounted) {
  auto m = toy_model(10, 5);
  m.Q00 = -2000.0;  // no root on the window
  sim_config cfg;
  cfg.n_paths = 3;
  const auto rep = summarize(run(m, cfg), m);
  EXPECT_EQ(rep.failed, 3);
  EXPECT_FALSE(rep.failures.empty());
}

TEST(Run, StrictBoundsRefusesInfeasible) {
  auto m = toy_model();
  m.x_max = 1e6;
  sim_config cfg;
  cfg.strict_bounds = true;
  EXPECT_THROW(run(m, cfg), config_error);
  cfg.n_paths = 0;
  EXPECT_THROW(run(toy_model(), cfg), config_error);
}

TEST(PathsCsv, RoundTrip) {
  const auto m = toy_model();
  sim_config cfg;
  cfg.n_paths = 3;
  cfg.seed = 5;
  const auto paths = run(m, cfg);
  std::stringstream ss;
  write_paths(ss, paths);
  const auto rows = read_paths(ss);
  ASSERT_EQ(rows.size(), 3u * (m.grid.n_steps + 1));
  const auto term = terminal_from_rows(rows);
  EXPECT_EQ(term, terminal_values(paths));
  std::stringstream bad("path,t,pi\n");
  EXPECT_THROW(read_paths(bad), parse_error);
}

TEST(ToSurface, LayoutMatchesIngest) {
  const auto m = toy_model(10, 4);
  sim_config cfg;
  cfg.record_surfaces = true;
  const auto s = to_surface(run(m, cfg)[0], m);
  EXPECT_EQ(s.n_prices(), m.n() + 1);
  EXPECT_EQ(s.n_times(), m.grid.n_steps + 1);
  EXPECT_EQ(s.q(0, 0), 0.0);
  EXPECT_TRUE(check_surface(s, 1e-9).ok());
  path_result empty;
  EXPECT_THROW(to_surface(empty, m), config_error);
}
