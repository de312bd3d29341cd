// Acceptance run: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <Eigen/SVD>

#include <liqstring/arbitrage.hpp>
#include <liqstring/calibration.hpp>
#include <liqstring/demand_surface.hpp>
#include <liqstring/order_book.hpp>
#include <liqstring/pricing.hpp>
#include <liqstring/simulator.hpp>
#include <liqstring/string_field.hpp>

#include "oracle_models.hpp"
#include "test_util.hpp"

#ifndef LIQSTRING_CLI
#define LIQSTRING_CLI "liqstring"
#endif

using namespace liqstring;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// the calibrated synthetic model used by criteria 3, 4 and 6
const model_params& synthetic_model() {
  static const model_params m = [] {
    generator_config g;
    const auto ev = synthesize_events(g, stage_seed(kSeed, "synth"));
    const auto s = build_surface(ev, price_axis::spanning(g.p_lo, g.p_hi, g.n_cells), time_axis{});
    calibration_config cc;
    cc.smooth_cells = 3.0;
    return calibrate(s, cc);
  }();
  return m;
}

struct rn_run {
  std::vector<path_result> paths;
  run_report report;
  sim_config cfg;
};

const rn_run& risk_neutral_run() {
  static const rn_run r = [] {
    rn_run out;
    const auto& m = synthetic_model();
    out.cfg.n_paths = 10000;
    out.cfg.seed = stage_seed(kSeed, "simulate");
    out.cfg.meas = measure::risk_neutral;
    out.cfg.positions = {m.x_min, m.x_max};
    out.paths = run(m, out.cfg);
    out.report = summarize(out.paths, m);
    return out;
  }();
  return r;
}

outcome criterion1() {
  book_state b;
  b.seed_resting(1, side::buy, 100, 10);
  b.seed_resting(2, side::sell, 120, 10);
  b.seed_resting(3, side::sell, 130, 10);
  order_event in{4, 1000, 125, 15, side::buy, action::add};
  auto [book, trades, cp] = match_order(b, in);
  using levels = std::vector<std::pair<double, std::int64_t>>;
  const bool ok = trades.size() == 1 && trades[0].price == 120.0 && trades[0].quantity == 10 && cp && *cp == 120.0 &&
                  book.bid_levels() == levels{{125.0, 5}, {100.0, 10}} && book.ask_levels() == levels{{130.0, 10}};
  return {ok, "trade (120, 10), clearing 120, bids {125:5, 100:10}, asks {130:10}"};
}

outcome criterion2() {
  const grid_spec g(20, 20, 1.0);
  const int N = 10000;
  splitmix_engine pick(7);
  struct pair_ {
    int k1, j1, k2, j2;
  };
  std::vector<pair_> pairs;
  for (int i = 0; i < 10; ++i)
    pairs.push_back({1 + static_cast<int>(pick.uniform() * 20), 1 + static_cast<int>(pick.uniform() * 20),
                     1 + static_cast<int>(pick.uniform() * 20), 1 + static_cast<int>(pick.uniform() * 20)});
  std::vector<double> s1(pairs.size()), s2(pairs.size()), sp(pairs.size()), spp(pairs.size());
  for (int p = 0; p < N; ++p) {
    const auto B = reconstruct_sheet(sample_sheet(g, stage_seed(kSeed, "sheet"), p));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double a = B(pairs[i].k1, pairs[i].j1), b = B(pairs[i].k2, pairs[i].j2);
      s1[i] += a;
      s2[i] += b;
      sp[i] += a * b;
      spp[i] += a * a * b * b;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double m1 = s1[i] / N, m2 = s2[i] / N, mp = sp[i] / N;
    const double cov = mp - m1 * m2;
    const double se = std::sqrt((spp[i] / N - mp * mp) / N);
    const double exact = std::min(g.s(pairs[i].k1), g.s(pairs[i].k2)) * std::min(g.t(pairs[i].j1), g.t(pairs[i].j2));
    worst = std::max(worst, std::abs(cov - exact) / se);
  }
  return {worst <= 3.0, "10 node pairs, worst |cov - min(s,r)min(t,u)| = " + num(worst) + " stderr (limit 3)"};
}

outcome criterion3() {
  double worst_rel = 0.0, worst_cond = 0.0;
  for (int n : {10, 50, 100}) {
    auto m = liqstring::testing::toy_model(n, 10);
    splitmix_engine r(1000 + n);
    row_matrix K(n - 1, n - 1);
    for (int i = 0; i < n - 1; ++i)
      for (int j = 0; j < n - 1; ++j) K(i, j) = (i == j ? 2.0 : 0.0) + 0.5 * r.normal() / std::sqrt(n);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
    worst_cond = std::max(worst_cond, svd.singularValues()(0) / svd.singularValues()(n - 2));
    m.sigbar_q = K;
    model_state st = model_state::zero(m);
    st.X0 = 0.1 * r.normal();
    for (int c = 0; c < n; ++c) st.Xq[c] = 0.1 * r.normal();
    const auto nc = drift_diffusion(st, m);
    Eigen::VectorXd truth(n);
    for (auto& v : truth) v = r.normal();
    auto in = mpr_inputs::from(nc, m);
    in.A = nc.sigtilde * truth * m.grid.ds;
    const Eigen::VectorXd got = mpr_solver(K).solve(in);
    worst_rel = std::max(worst_rel, (got - truth).norm() / truth.norm());
  }
  // residual on every (path, step) of a 100-path risk-neutral run of the synthetic model
  const auto& rn = risk_neutral_run();
  double res = 0.0;
  int failed = 0;
  for (int p = 0; p < 100; ++p) {
    res = std::max(res, rn.paths[p].max_residual);
    failed += rn.paths[p].failed;
  }
  const bool ok = worst_cond <= 1e4 && worst_rel <= 1e-10 && res <= 1e-8 && failed == 0;
  return {ok, "n in {10,50,100}: max rel error " + num(worst_rel) + " (cond <= " + num(worst_cond) +
                  "); 100-path residual/(1+|A|) " + num(res)};
}

outcome criterion4() {
  const auto& rn = risk_neutral_run();
  const auto& m = synthetic_model();
  std::string detail;
  bool ok = rn.report.failed == 0;
  auto check = [&](const std::vector<double>& v, double start, const std::string& name) {
    const double mean = liqstring::testing::sample_mean(v), se = liqstring::testing::sample_stderr(v);
    const double z = std::abs(mean - start) / se;
    ok = ok && z <= 3.0;
    detail += name + " |mean-start| = " + num(std::abs(mean - start)) + " (" + num(z) + " se); ";
  };
  check(terminal_values(rn.paths), rn.paths[0].pi[0], "pi");
  check(terminal_values(rn.paths, 0), rn.paths[0].P[0][0], "P(x_min)");
  check(terminal_values(rn.paths, 1), rn.paths[0].P[1][0], "P(x_max)");
  detail += std::to_string(rn.report.paths) + " paths, I_n=" + std::to_string(m.n()) + ", J_n=" + std::to_string(m.grid.n_steps) +
            ", failed " + std::to_string(rn.report.failed);
  return {ok, detail};
}

outcome criterion5() {
  using namespace liqstring::testing;
  auto ladder = [](const std::vector<int>& ns, const std::function<double(int)>& f, double& last, bool& halving) {
    double prev = INFINITY;
    halving = true;
    for (int n : ns) {
      const double e = f(n);
      halving = halving && e <= 0.5 * prev;
      prev = e;
    }
    last = prev;
  };
  double e_lin, e_sep, e_log;
  bool h_lin, h_sep, h_log;
  ladder({128, 256, 512, 1024}, [](int n) { return linear_oracle{}.run(n).continuum_residual; }, e_lin, h_lin);
  ladder({40, 80, 160, 320}, [](int n) { return separated_oracle{}.run(n).residual; }, e_sep, h_sep);
  ladder({40, 80, 160}, [](int n) { return lognormal_oracle_residual(n); }, e_log, h_log);
  const bool ok = h_lin && h_sep && h_log && e_lin < 1e-6 && e_sep < 1e-6 && e_log < 1e-6;
  return {ok, "linear " + num(e_lin) + ", separated " + num(e_sep) + ", lognormal " + num(e_log) +
                  " at the finest grid; halving " + (h_lin && h_sep && h_log ? "yes" : "no")};
}

outcome criterion6() {
  const auto& rn = risk_neutral_run();
  const auto& v = rn.report.violations;
  const bool ok = rn.report.feasible && v.total() == 0 && rn.report.failed == 0;
  return {ok, "feasible " + std::string(rn.report.feasible ? "yes" : "no") + ", " + std::to_string(rn.report.steps_checked) +
                  " steps: monotone " + std::to_string(v.monotone) + ", density floor " + std::to_string(v.density_floor) +
                  ", Bound_hold " + std::to_string(v.bound_hold) + ", MC_hold " + std::to_string(v.mc_hold)};
}

outcome criterion7() {
  const auto pi = sample_lognormal(350.0, 0.0, 0.25, 30.0 / 365.0, 10000, stage_seed(kSeed, "pricing"));
  const double mean = liqstring::testing::sample_mean(pi);
  double parity = 0.0;
  for (double K = 330; K <= 370; K += 1) {
    const double c = mc_option_price(pi, {K, 30.0 / 365.0, 0.002537, option_kind::call}).price;
    const double p = mc_option_price(pi, {K, 30.0 / 365.0, 0.002537, option_kind::put}).price;
    parity = std::max(parity, std::abs((c - p) - (mean - K)));
  }
  double iv_err = 0.0;
  for (option_kind k : {option_kind::call, option_kind::put})
    for (double rate : {0.0, 0.002537})
      for (int i = 0; i <= 300; ++i) {
        const double v = 0.01 + (3.0 - 0.01) * i / 300.0;
        const option_spec s{100.0, 1.0, rate, k};
        iv_err = std::max(iv_err, std::abs(implied_vol(100.0, s, bs_price(100.0, s, v)).vol - v));
      }
  const double T = 30.0 / 365.0;
  const auto sm = smile_report(pi, 350.0, {336, 340, 344, 348, 350, 352, 356, 360, 364}, 0.0, T);
  // max - min against the standard error of that difference
  auto se = [&](const smile_point& p) { return p.mc_stderr / bs_vega(350.0, {p.strike, T, 0.0, p.kind}, p.implied_vol); };
  double spread = INFINITY, pooled = 0.0;
  if (!sm.points.empty()) {
    const smile_point* lo = &sm.points[0];
    const smile_point* hi = &sm.points[0];
    for (const auto& p : sm.points) {
      if (p.implied_vol < lo->implied_vol) lo = &p;
      if (p.implied_vol > hi->implied_vol) hi = &p;
    }
    spread = hi->implied_vol - lo->implied_vol;
    pooled = std::hypot(se(*hi), se(*lo));
  }
  const bool ok = parity <= 1e-12 && iv_err <= 1e-8 && sm.failures.empty() && spread <= 3.0 * pooled;
  return {ok, "parity " + num(parity) + ", iv round trip " + num(iv_err) + ", smile spread " + num(spread) + " vs 3 pooled se " +
                  num(3.0 * pooled)};
}

outcome criterion8() {
  const auto m = finite_factor_model::standard();
  arbitrage_config cfg;
  cfg.seed = stage_seed(kSeed, "arbitrage");
  const auto rep = run_demo(m, cfg);
  const grid_spec g(1, cfg.n_steps, cfg.horizon);
  double quad = 0.0;
  for (int p = 0; p < 20; ++p) {
    const auto z = z_path(m, g, cfg.seed, p);
    for (int j = 0; j <= cfg.n_steps; ++j) {
      const double t = g.t(j);
      const double exact = 0.5 * (20.0 + 2.0 * t) - 0.25 * (2.0 + std::sin(z[j]));
      quad = std::max(quad, std::abs(liquidation_proceeds(m, 0.5, t, z[j]) - exact) / exact);
    }
  }
  const bool ok = rep.verdict == arbitrage_verdict::realized && rep.worst_margin > 0.0 && rep.delta0 == 5.0 &&
                  std::abs(rep.x_star - 0.5) <= 1e-12 && quad <= 1e-8 && rep.paths.size() == 1000;
  return {ok, "delta0 " + num(rep.delta0) + ", x* " + num(rep.x_star) + ", worst margin " + num(rep.worst_margin) +
                  " over 1000 paths, L quadrature " + num(quad)};
}

outcome criterion9() {
  const auto truth = liqstring::testing::toy_model(20, 780, 0.3);
  sim_config cfg;
  cfg.seed = stage_seed(kSeed, "calibration");
  cfg.record_surfaces = true;
  const auto path = run(truth, cfg)[0];
  if (path.failed) return {false, "truth path failed: " + path.failure};
  calibration_config cc;
  cc.x_min = truth.x_min;
  cc.x_max = truth.x_max;
  cc.d0_min = truth.d0_min;
  cc.d0_max = truth.d0_max;
  cc.d1_min = truth.d1_min;
  cc.d1_max = truth.d1_max;
  const auto m = calibrate(to_surface(path, truth), cc);
  double worst = std::abs(m.sigbar_q_head.norm() / truth.sigbar_q_head.norm() - 1.0);
  worst = std::max(worst, std::abs(m.sigbar_Q0.norm() / truth.sigbar_Q0.norm() - 1.0));
  for (int r = 0; r < truth.n() - 1; ++r)
    worst = std::max(worst, std::abs(m.sigbar_q.row(r).norm() / truth.sigbar_q.row(r).norm() - 1.0));
  return {worst <= 0.1, "J_n=780, I_n=20: worst relative row-norm error " + num(worst) + " (limit 0.1)"};
}

outcome criterion10() {
  const fs::path base = fs::temp_directory_path() / ("liqstring_acceptance_" + std::to_string(::getpid()));
  std::string smiles[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = base / ("run" + std::to_string(i));
    fs::create_directories(dir);
    const std::string cmd = std::string("\"") + LIQSTRING_CLI + "\" --out-dir \"" + dir.string() + "\" --seed 42 pipeline > \"" +
                            (dir / "stdout.txt").string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "pipeline run " + std::to_string(i) + " failed"};
    std::ifstream in(dir / "smile.csv", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    smiles[i] = ss.str();
  }
  fs::remove_all(base);
  const bool ok = !smiles[0].empty() && smiles[0] == smiles[1];
  return {ok, "two seeded pipeline runs, smile.csv " + std::to_string(smiles[0].size()) + " bytes, identical " +
                  (smiles[0] == smiles[1] ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<outcome()>>> criteria{
      {"matching engine golden book", criterion1},       {"sheet covariance", criterion2},
      {"MPR manufactured solution and residual", criterion3}, {"risk-neutral martingale", criterion4},
      {"analytic risk prices", criterion5},             {"monotonicity and bounds", criterion6},
      {"pricing identities", criterion7},               {"arbitrage demo", criterion8},
      {"calibration round trip", criterion9},           {"end-to-end determinism", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << "criterion " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << o.detail
              << " [" << num(secs) << " s]" << std::endl;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : std::string("acceptance: all passed"))
            << std::endl;
  return failures ? 1 : 0;
}
