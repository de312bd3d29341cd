#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "demand_model.hpp"
#include "demand_surface.hpp"
#include "errors.hpp"
#include "grid.hpp"

namespace liqstring {

struct calibration_config {
  double horizon = 1.0;  // calibration window tau
  double x_min = -1000.0;
  double x_max = 1000.0;
  double gamma = 0.9;    // share of the bound-condition headroom given to the F ranges
  double d0_min_share = 0.01;
  double ridge_rel = 1e-10;
  double smooth_cells = 0.0;  // Gaussian bandwidth in price cells applied to q before matching; 0 = raw
  bool q0_tail_projection = false;  // load Q(p_0) on the tail bands through its sample cross-moments
  std::optional<double> d0_min, d0_max, d1_min, d1_max;
};

struct calibration_report {
  std::uint64_t clamps = 0;
  double ridge = 0.0;
  bool degenerate = false;
  double drop0 = 0.0, drop1 = 0.0;
  bool d0_short = false, d1_short = false;  // an observed drop reaches the range
};

// Gaussian smoothing of each density column across price cells; Q is rebuilt from Q(p_0).
inline demand_surface smooth_surface(const demand_surface& s, double bandwidth) {
  if (!(bandwidth > 0.0)) return s;
  demand_surface out = s;
  const int n = s.n_prices() - 1;
  const double dp = s.dp();
  const int reach = static_cast<int>(std::ceil(4.0 * bandwidth));
  std::vector<double> w(2 * reach + 1);
  for (int d = -reach; d <= reach; ++d) w[d + reach] = std::exp(-0.5 * d * d / (bandwidth * bandwidth));
  for (int j = 0; j < s.n_times(); ++j) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0, norm = 0.0;
      for (int d = std::max(-reach, -c); d <= std::min(reach, n - 1 - c); ++d) {
        acc += w[d + reach] * s.q(c + d + 1, j);
        norm += w[d + reach];
      }
      out.q(c + 1, j) = acc / norm;
      out.Q(c + 1, j) = out.Q(c, j) - dp * out.q(c + 1, j);
    }
  }
  return out;
}

namespace detail {
// Argument of F minus d_min, floored to keep the inverse finite.
inline double safe_inverse(const hyperbolic_f& F, double y, std::uint64_t& clamps) {
  const double floor = pole_margin * F.range();
  double z = y - F.d_min;
  if (!(z > floor)) {
    ++clamps;
    z = floor;
  }
  return F.range() / z - 1.0;
}
}  // namespace detail

// Method of moments on lag-one increments of the inverted state processes.
inline model_params calibrate(const demand_surface& raw, const calibration_config& cfg, calibration_report* report = nullptr) {
  if (cfg.smooth_cells < 0.0) throw config_error("calibrate: smoothing bandwidth must be >= 0");
  const demand_surface s = smooth_surface(raw, cfg.smooth_cells);
  const int n = s.n_prices() - 1;
  const int J = s.n_times() - 1;
  if (n < 2 || J < 1) throw data_error("calibrate: surface needs at least 2 price cells and 1 step");
  if (!check_surface(s, 1e-9).ok()) throw data_error("calibrate: surface violates monotonicity / density sign");
  if (!(cfg.x_min <= cfg.x_max)) throw config_error("calibrate: x_min must not exceed x_max");

  model_params m;
  m.prices = s.axis();
  m.grid = grid_spec(n, J, cfg.horizon);
  m.x_min = cfg.x_min;
  m.x_max = cfg.x_max;
  const double span = m.prices.span();
  calibration_report rep;

  // inputs at t = 0 and observed drops
  const double Qhat0 = s.Q(0, 0);
  Eigen::VectorXd qhat0(n);
  for (int c = 0; c < n; ++c) qhat0[c] = s.q(c + 1, 0);
  for (int j = 1; j <= J; ++j) {
    rep.drop0 = std::max(rep.drop0, Qhat0 - s.Q(0, j));
    for (int c = 0; c < n; ++c) rep.drop1 = std::max(rep.drop1, qhat0[c] - s.q(c + 1, j));
  }

  // F1 range: as wide as q(.,0) + d1_min >= 0 and MC_hold at S allow.
  const double d1_min = cfg.d1_min.value_or(0.0);
  const double min_q0 = qhat0.minCoeff();
  const double mc_cap = (-s.Q(n, 0) - cfg.x_max) / span;
  double D1;
  if (cfg.d1_max) {
    D1 = *cfg.d1_max - d1_min;
  } else {
    D1 = cfg.gamma * std::min(min_q0, mc_cap);
    if (!(D1 > 0.0)) throw calibration_error("no admissible delta_1 range: empty cell or MC_hold fails at t=0");
  }
  rep.d1_short = rep.drop1 >= D1;
  m.d1_min = d1_min;
  m.d1_max = d1_min + D1;

  // F0 range: as wide as Bound_hold at p_1 allows, d0_min included.
  double D0;
  const double bound_cap = cfg.gamma * (s.Q(1, 0) + cfg.x_min) / (1.0 + cfg.d0_min_share);
  if (cfg.d0_max) {
    D0 = *cfg.d0_max - cfg.d0_min.value_or(0.0);
  } else {
    if (!(bound_cap > 0.0)) throw calibration_error("no admissible delta_0 range: Q(eps S, 0) + x_min <= 0");
    D0 = bound_cap;
  }
  rep.d0_short = rep.drop0 >= D0;
  m.d0_min = cfg.d0_min.value_or(cfg.d0_min_share * D0);
  m.d0_max = cfg.d0_max.value_or(m.d0_min + D0);
  if (!(m.d0_min > 0.0) || !(m.d0_max > m.d0_min)) throw calibration_error("delta_0 bounds are not ordered");

  m.Q00 = Qhat0 - m.d0_max;
  m.q0 = qhat0.array() - m.d1_max;

  // inverted state processes, one row per time
  const auto F0 = m.F0();
  const auto F1 = m.F1();
  Eigen::MatrixXd X(J + 1, n + 1);  // column 0: X0, column 1+c: Xq_c
  for (int j = 0; j <= J; ++j) {
    X(j, 0) = detail::safe_inverse(F0, s.Q(0, j) - m.Q00, rep.clamps);
    for (int c = 0; c < n; ++c) X(j, 1 + c) = detail::safe_inverse(F1, s.q(c + 1, j) - m.q0[c], rep.clamps);
  }
  const Eigen::MatrixXd dX = X.bottomRows(J) - X.topRows(J);
  const Eigen::MatrixXd C = dX.transpose() * dX / static_cast<double>(J);  // uncentred: X has no drift
  const double unit = m.grid.ds * m.grid.dt;

  m.sigbar_Q0 = Eigen::VectorXd::Zero(n);
  m.sigbar_q_head = Eigen::VectorXd::Zero(n);
  m.sigbar_q = row_matrix::Zero(n - 1, n - 1);

  const Eigen::MatrixXd Ctail = C.block(2, 2, n - 1, n - 1);
  const double tr = Ctail.trace();
  if (!(C.cwiseAbs().maxCoeff() > 0.0)) {
    rep.degenerate = true;
  } else {
    rep.ridge = cfg.ridge_rel * std::max(tr, 1e-300);
    Eigen::MatrixXd reg = Ctail;
    reg.diagonal().array() += rep.ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(reg / unit);
    if (llt.info() != Eigen::Success) throw calibration_error("tail covariance is not positive definite after ridge");
    m.sigbar_q = llt.matrixL();
    double resid = C(0, 0) / unit;
    if (cfg.q0_tail_projection) {
      const Eigen::VectorXd cross = C.block(2, 0, n - 1, 1) / unit;
      const Eigen::VectorXd v = llt.matrixL().solve(cross);
      m.sigbar_Q0.tail(n - 1) = v;
      resid -= v.squaredNorm();
    }
    m.sigbar_Q0[0] = -std::sqrt(std::max(resid, 0.0));
    m.sigbar_q_head[0] = std::sqrt(C(1, 1) / unit);
  }
  m.calib_clamps = rep.clamps;
  m.ridge = rep.ridge;
  m.degenerate = rep.degenerate;
  m.validate();
  if (report) *report = rep;
  return m;
}

}  // namespace liqstring
