#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "grid.hpp"

namespace liqstring {

using row_matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// F(x) = d_min + (d_max - d_min)/(1 + x)
struct hyperbolic_f {
  double d_min = 0.0;
  double d_max = 0.0;

  double range() const { return d_max - d_min; }

  static void check(double x) {
    if (!(x > -1.0)) throw domain_error("F evaluated at x = " + std::to_string(x) + " (pole at -1)");
  }
  double value(double x) const {
    check(x);
    return d_min + range() / (1.0 + x);
  }
  double d1(double x) const {
    check(x);
    return -range() / ((1.0 + x) * (1.0 + x));
  }
  double d2(double x) const {
    check(x);
    return 2.0 * range() / ((1.0 + x) * (1.0 + x) * (1.0 + x));
  }
  // Solves F(x) = y; y must exceed d_min.
  double inverse(double y) const {
    if (!(y > d_min)) throw domain_error("F inverse outside range");
    return range() / (y - d_min) - 1.0;
  }
};

inline constexpr double pole_margin = 1e-6;

// Argument clamp used on simulated states.
inline double clamp_argument(double x, std::uint64_t& clamps) {
  if (x < -1.0 + pole_margin) {
    ++clamps;
    return -1.0 + pole_margin;
  }
  return x;
}

// Calibrated (or hand-built) model on the price axis p_0..p_n with n = I_n factor bands.
// Cell c is (p_c, p_{c+1}]; cell 0 is the head region below p_1 = eps S.
struct model_params {
  price_axis prices;
  grid_spec grid;
  double x_min = 0.0;
  double x_max = 0.0;
  double d0_min = 0.0, d0_max = 0.0;
  double d1_min = 0.0, d1_max = 0.0;
  double Q00 = 0.0;
  Eigen::VectorXd q0;             // per cell
  Eigen::VectorXd sigbar_Q0;      // per band
  Eigen::VectorXd sigbar_q_head;  // band-0 loading per cell; only cell 0 may be nonzero
  row_matrix sigbar_q;            // (n-1) x (n-1): cells 1..n-1 by bands 1..n-1
  std::vector<row_matrix> sigbar_q_table;  // optional, one per step

  // diagnostics carried with the parameters
  std::uint64_t calib_clamps = 0;
  double ridge = 0.0;
  bool degenerate = false;

  int n() const { return prices.n; }
  double S() const { return prices.p_hi(); }
  double eps() const { return 1.0 / prices.n; }
  double eps_S() const { return prices.at(1); }
  hyperbolic_f F0() const { return {d0_min, d0_max}; }
  hyperbolic_f F1() const { return {d1_min, d1_max}; }

  const row_matrix& kernel_at(int step) const {
    if (sigbar_q_table.empty()) return sigbar_q;
    return sigbar_q_table.at(static_cast<std::size_t>(std::clamp(step, 0, static_cast<int>(sigbar_q_table.size()) - 1)));
  }

  void validate() const {
    const int n_ = n();
    if (n_ < 2) throw config_error("model needs at least two price cells");
    if (grid.n_factors != n_) throw config_error("factor bands must equal price cells");
    if (q0.size() != n_ || sigbar_Q0.size() != n_ || sigbar_q_head.size() != n_)
      throw dimension_error("model vectors must have one entry per cell/band");
    if (sigbar_q.rows() != n_ - 1 || sigbar_q.cols() != n_ - 1)
      throw dimension_error("sigbar_q must be (n-1) x (n-1)");
    for (const auto& m : sigbar_q_table)
      if (m.rows() != n_ - 1 || m.cols() != n_ - 1) throw dimension_error("sigbar_q table entry has wrong shape");
    if (!sigbar_q_table.empty() && static_cast<int>(sigbar_q_table.size()) != grid.n_steps)
      throw dimension_error("sigbar_q table needs one matrix per step");
    for (int c = 1; c < n_; ++c)
      if (sigbar_q_head[c] != 0.0) throw config_error("sigbar_q must vanish on band 0 above eps S");
    if (!(d0_min > 0.0) || !(d0_max >= d0_min)) throw config_error("need 0 < d0_min <= d0_max");
    if (!(d1_min >= 0.0) || !(d1_max >= d1_min)) throw config_error("need 0 <= d1_min <= d1_max");
    if (!(x_min <= x_max)) throw config_error("need x_min <= x_max");
  }
};

struct model_state {
  double X0 = 0.0;
  Eigen::VectorXd Xq;  // per cell
  double t = 0.0;

  static model_state zero(const model_params& m) { return {0.0, Eigen::VectorXd::Zero(m.n()), 0.0}; }
};

// Q at nodes 0..n and q per cell (q of cell c is the density reported at node c+1).
struct surface_column {
  Eigen::VectorXd Q;
  Eigen::VectorXd q;
};

inline surface_column surface_from_state(const model_state& st, const model_params& m,
                                         std::uint64_t* clamps = nullptr) {
  const int n = m.n();
  if (st.Xq.size() != n) throw dimension_error("state does not match model");
  std::uint64_t local = 0;
  const auto F0 = m.F0();
  const auto F1 = m.F1();
  surface_column s{Eigen::VectorXd(n + 1), Eigen::VectorXd(n)};
  for (int c = 0; c < n; ++c) s.q[c] = m.q0[c] + F1.value(clamp_argument(st.Xq[c], local));
  s.Q[0] = m.Q00 + F0.value(clamp_argument(st.X0, local));
  for (int i = 1; i <= n; ++i) s.Q[i] = s.Q[i - 1] - m.prices.dp * s.q[i - 1];
  if (clamps) *clamps += local;
  return s;
}

// Everything the drift functional and the price coefficients need, on nodes 0..n.
struct node_coefficients {
  surface_column surface;
  double h0 = 0.0;
  Eigen::VectorXd h1;         // per cell
  Eigen::VectorXd mu_Q;       // per node
  row_matrix sigtilde;        // (n+1) x n
  row_matrix dsigtilde;       // d sigtilde / dp, finite differences
  Eigen::VectorXd Qp, Qpp;    // per node
  Eigen::VectorXd sigma_Q2;   // sum_k sigtilde^2 ds
  Eigen::VectorXd cross;      // sum_k dsigtilde * sigtilde ds
};

// Price derivatives of a node_coefficients whose surface.Q and sigtilde are set:
// central differences inside, one-sided at the ends, Q_pp copied from the neighbour at the ends.
inline void fill_derivatives(node_coefficients& nc, double dp, double ds) {
  const int n = static_cast<int>(nc.surface.Q.size()) - 1;
  if (n < 1 || nc.sigtilde.rows() != n + 1) throw dimension_error("fill_derivatives: need Q and sigtilde on the same nodes");
  const Eigen::VectorXd& Q = nc.surface.Q;
  nc.Qp.resize(n + 1);
  nc.Qpp.resize(n + 1);
  nc.dsigtilde.resize(n + 1, nc.sigtilde.cols());
  for (int i = 0; i <= n; ++i) {
    if (i == 0) {
      nc.Qp[i] = (Q[1] - Q[0]) / dp;
      nc.dsigtilde.row(i) = (nc.sigtilde.row(1) - nc.sigtilde.row(0)) / dp;
    } else if (i == n) {
      nc.Qp[i] = (Q[n] - Q[n - 1]) / dp;
      nc.dsigtilde.row(i) = (nc.sigtilde.row(n) - nc.sigtilde.row(n - 1)) / dp;
    } else {
      nc.Qp[i] = (Q[i + 1] - Q[i - 1]) / (2.0 * dp);
      nc.dsigtilde.row(i) = (nc.sigtilde.row(i + 1) - nc.sigtilde.row(i - 1)) / (2.0 * dp);
    }
  }
  if (n >= 2) {
    for (int i = 1; i < n; ++i) nc.Qpp[i] = (Q[i + 1] - 2.0 * Q[i] + Q[i - 1]) / (dp * dp);
    nc.Qpp[0] = nc.Qpp[1];
    nc.Qpp[n] = nc.Qpp[n - 1];
  } else {
    nc.Qpp.setZero();
  }
  nc.sigma_Q2 = nc.sigtilde.rowwise().squaredNorm() * ds;
  nc.cross = nc.dsigtilde.cwiseProduct(nc.sigtilde).rowwise().sum() * ds;
}

// Coefficients of a model given directly on the grid (Q, mu_Q and sigtilde at the nodes).
inline node_coefficients assemble_coefficients(const Eigen::VectorXd& Q, const Eigen::VectorXd& mu_Q,
                                               const row_matrix& sigtilde, double dp, double ds) {
  if (mu_Q.size() != Q.size() || sigtilde.rows() != Q.size())
    throw dimension_error("assemble_coefficients: Q, mu_Q and sigtilde need one row per node");
  node_coefficients nc;
  nc.surface.Q = Q;
  nc.surface.q = Eigen::VectorXd(Q.size() - 1);
  for (int c = 0; c + 1 < Q.size(); ++c) nc.surface.q[c] = -(Q[c + 1] - Q[c]) / dp;
  nc.mu_Q = mu_Q;
  nc.sigtilde = sigtilde;
  fill_derivatives(nc, dp, ds);
  return nc;
}

// Chain rule on Mod1/Mod2: loading F' sigbar, drift F''/2 |sigbar|^2, accumulated along price.
inline node_coefficients drift_diffusion(const model_state& st, const model_params& m, int step = 0,
                                         std::uint64_t* clamps = nullptr) {
  const int n = m.n();
  const double dp = m.prices.dp;
  const double ds = m.grid.ds;
  const row_matrix& K = m.kernel_at(step);
  std::uint64_t local = 0;
  node_coefficients nc;
  nc.surface = surface_from_state(st, m, &local);
  const auto F0 = m.F0();
  const auto F1 = m.F1();
  const double x0 = clamp_argument(st.X0, local);
  nc.h0 = F0.d1(x0);
  const double h0_2 = F0.d2(x0);
  nc.h1.resize(n);
  Eigen::VectorXd h1_2(n), knorm2(n);
  for (int c = 0; c < n; ++c) {
    const double xc = clamp_argument(st.Xq[c], local);
    nc.h1[c] = F1.d1(xc);
    h1_2[c] = F1.d2(xc);
  }
  knorm2[0] = m.sigbar_q_head[0] * m.sigbar_q_head[0] * ds;
  for (int c = 1; c < n; ++c) knorm2[c] = K.row(c - 1).squaredNorm() * ds;

  nc.sigtilde.resize(n + 1, n);
  nc.sigtilde.row(0) = nc.h0 * m.sigbar_Q0.transpose();
  nc.mu_Q.resize(n + 1);
  nc.mu_Q[0] = 0.5 * h0_2 * m.sigbar_Q0.squaredNorm() * ds;
  for (int i = 1; i <= n; ++i) {
    const int c = i - 1;
    nc.sigtilde.row(i) = nc.sigtilde.row(i - 1);
    const double w = dp * nc.h1[c];
    if (c == 0)
      nc.sigtilde(i, 0) -= w * m.sigbar_q_head[0];
    else
      nc.sigtilde.row(i).tail(n - 1) -= w * K.row(c - 1);
    nc.mu_Q[i] = nc.mu_Q[i - 1] - dp * 0.5 * h1_2[c] * knorm2[c];
  }

  fill_derivatives(nc, dp, ds);
  if (clamps) *clamps += local;
  return nc;
}

// Solve Q(P) + x = 0 on the piecewise-linear interpolant; lowest bracket wins.
struct clearing_point {
  double price = 0.0;
  int cell = 0;        // P in [p_cell, p_cell+1]
  double weight = 0.0; // (P - p_cell)/dp
  bool multiple_brackets = false;
};

inline clearing_point clearing_price(const Eigen::VectorXd& Q, const price_axis& px, double x = 0.0) {
  const int n = static_cast<int>(Q.size()) - 1;
  if (n != px.n) throw dimension_error("clearing_price: surface and price axis differ");
  int found = -1;
  for (int i = 0; i < n && found < 0; ++i)
    if (Q[i] + x >= 0.0 && Q[i + 1] + x <= 0.0) found = i;
  if (found < 0)
    throw clearing_failure("no sign change of Q + x on the price grid (Q(p_0)+x=" + std::to_string(Q[0] + x) +
                           ", Q(S)+x=" + std::to_string(Q[n] + x) + ")");
  clearing_point out;
  out.cell = found;
  const double a = Q[found] + x, b = Q[found + 1] + x;
  if (a == 0.0) {
    out.weight = 0.0;
    out.price = px.at(found);
  } else if (b == 0.0) {
    out.weight = 1.0;
    out.price = px.at(found + 1);
  } else {
    out.weight = a / (a - b);
    out.price = px.at(found) + out.weight * px.dp;
  }
  for (int i = found + 2; i <= n; ++i)
    if (Q[i] + x > 0.0) out.multiple_brackets = true;
  return out;
}

struct price_coefficients {
  double P = 0.0;
  double mu_P = 0.0;
  double sigma_P = 0.0;
  Eigen::VectorXd b_P;
  // inputs at P, exposed for checks
  double mu_Q = 0.0, Qp = 0.0, Qpp = 0.0, sigma_Q = 0.0, C = 0.0;
  Eigen::VectorXd sigtilde, dsigtilde;
};

inline price_coefficients price_coefficients_at(const node_coefficients& nc, const price_axis& px, double x) {
  const clearing_point cp = clearing_price(nc.surface.Q, px, x);
  const int i = cp.cell;
  const double w = cp.weight;
  const int j = std::min(i + 1, px.n);
  auto lerp = [&](double a, double b) { return (1.0 - w) * a + w * b; };
  const double ds = 1.0 / px.n;
  price_coefficients pc;
  pc.P = cp.price;
  pc.Qp = lerp(nc.Qp[i], nc.Qp[j]);
  if (!(pc.Qp < 0.0)) throw numerical_error("dQ/dp is not negative at the clearing price");
  pc.Qpp = lerp(nc.Qpp[i], nc.Qpp[j]);
  pc.mu_Q = lerp(nc.mu_Q[i], nc.mu_Q[j]);
  pc.sigtilde = (1.0 - w) * nc.sigtilde.row(i).transpose() + w * nc.sigtilde.row(j).transpose();
  pc.dsigtilde = (1.0 - w) * nc.dsigtilde.row(i).transpose() + w * nc.dsigtilde.row(j).transpose();
  pc.sigma_Q = std::sqrt(pc.sigtilde.squaredNorm() * ds);
  pc.C = -pc.dsigtilde.dot(pc.sigtilde) * ds / pc.Qp;
  pc.sigma_P = pc.sigma_Q / pc.Qp;
  pc.b_P = pc.sigma_Q > 0.0 ? Eigen::VectorXd(-pc.sigtilde / pc.sigma_Q) : Eigen::VectorXd::Zero(px.n);
  pc.mu_P = -(pc.mu_Q + 0.5 * pc.Qpp * pc.sigma_P * pc.sigma_P + pc.C) / pc.Qp;
  return pc;
}

// Feasibility of the bound conditions --------------------------------------

struct feasibility_input {
  double Q00 = 0.0;
  double int_q = 0.0;       // integral of q(.,0) over the whole span
  double int_q_head = 0.0;  // integral over the head region below eps S
  double x_min = 0.0, x_max = 0.0;
  double d0_max = 0.0;
  double span = 0.0;        // S - p_0
  double eps = 0.0;
  std::optional<double> d1_min, d1_max;
};

struct feasibility_report {
  double d1_min_lower = 0.0;
  double d1_max_upper = 0.0;
  double eps_upper = 0.0;
  bool mc_hold = true;      // delta_1min meets its lower bound
  bool bound_hold = true;   // delta_1max meets its upper bound
  bool delta_order = true;  // lower bound < upper bound (and d1_min <= d1_max when given)
  bool eps_ok = true;
  bool d0_condition = true;
  bool feasible() const { return mc_hold && bound_hold && delta_order && eps_ok; }
};

inline feasibility_report feasibility_bounds(const feasibility_input& in) {
  if (!(in.span > 0.0) || !(in.eps > 0.0) || !(in.eps < 1.0)) throw config_error("feasibility: need span > 0, 0 < eps < 1");
  feasibility_report r;
  const double num_lo = in.x_max + in.Q00 + in.d0_max - in.int_q;
  const double num_hi = in.x_min + in.Q00 - in.int_q_head;
  r.d1_min_lower = num_lo / in.span;
  r.d1_max_upper = num_hi / (in.eps * in.span);
  r.eps_upper = num_lo > 0.0 ? num_hi / num_lo : std::numeric_limits<double>::infinity();
  r.eps_ok = num_hi > 0.0 && in.eps < r.eps_upper;
  r.delta_order = r.d1_min_lower < r.d1_max_upper;
  if (in.d1_min) r.mc_hold = *in.d1_min >= r.d1_min_lower;
  if (in.d1_max) r.bound_hold = *in.d1_max <= r.d1_max_upper;
  if (in.d1_min && in.d1_max) r.delta_order = r.delta_order && *in.d1_min <= *in.d1_max;
  r.d0_condition = in.d0_max > in.x_min - in.x_max + in.int_q;
  return r;
}

inline feasibility_input feasibility_input_of(const model_params& m) {
  feasibility_input in;
  in.Q00 = m.Q00;
  in.int_q = m.q0.sum() * m.prices.dp;
  in.int_q_head = m.q0[0] * m.prices.dp;
  in.x_min = m.x_min;
  in.x_max = m.x_max;
  in.d0_max = m.d0_max;
  in.span = m.prices.span();
  in.eps = m.eps();
  in.d1_min = m.d1_min;
  in.d1_max = m.d1_max;
  return in;
}

inline feasibility_report feasibility_bounds(const model_params& m) { return feasibility_bounds(feasibility_input_of(m)); }

}  // namespace liqstring
