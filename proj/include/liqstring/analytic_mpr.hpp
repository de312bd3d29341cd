#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "demand_model.hpp"
#include "errors.hpp"

namespace liqstring {

// lambda = lambda_Q - h_Q for a demand curve linear in p with h_Q = (d sigtilde/dp)/Q_p
// the same at every node. lambda_Q is the caller's drift price (mu_Q = int sigtilde lambda_Q ds).
inline Eigen::VectorXd lambda_linear(const node_coefficients& nc, double dp, const Eigen::VectorXd& lambda_Q,
                                     double tol = 1e-8) {
  const int rows = static_cast<int>(nc.Qp.size());
  const int bands = static_cast<int>(nc.dsigtilde.cols());
  if (rows < 2 || lambda_Q.size() != bands || nc.dsigtilde.rows() != rows)
    throw dimension_error("lambda_linear: lambda_Q must have one entry per band");
  const double qp_scale = nc.Qp.cwiseAbs().maxCoeff();
  if (!(qp_scale > 0.0)) throw inapplicable_error("lambda_linear: flat demand curve");
  const double span = dp * (rows - 1);
  const double curv = nc.Qpp.cwiseAbs().maxCoeff() * span / qp_scale;
  if (curv > tol) throw inapplicable_error("lambda_linear: Q is not linear in p (relative curvature " + std::to_string(curv) + ")");

  Eigen::MatrixXd h(rows, bands);
  for (int i = 0; i < rows; ++i) {
    if (std::abs(nc.Qp[i]) < 1e-12 * qp_scale) throw inapplicable_error("lambda_linear: Q_p vanishes at a node");
    h.row(i) = nc.dsigtilde.row(i) / nc.Qp[i];
  }
  const Eigen::RowVectorXd hQ = h.row(0);
  const double spread = (h.rowwise() - hQ).cwiseAbs().maxCoeff();
  if (spread > tol * (1.0 + h.cwiseAbs().maxCoeff()))
    throw inapplicable_error("lambda_linear: h_Q depends on p (spread " + std::to_string(spread) + ")");
  return lambda_Q - hQ.transpose();
}

// Q(p) = sigma(p) F(X) with X = int b B ds, int b^2 ds = 1.
struct separated_model {
  std::function<double(double)> sigma, dsigma, d2sigma;
  double F = 0.0, dF = 0.0, d2F = 0.0;  // F and its derivatives at the current state
  Eigen::VectorXd b;                    // per band
};

// sigma'' sigma / sigma'^2 on the nodes; constant for the admissible family.
inline double separated_sigma0(const separated_model& m, const Eigen::VectorXd& nodes, double tol = 1e-8) {
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i < nodes.size(); ++i) {
    const double d1 = m.dsigma(nodes[i]);
    if (!(std::abs(d1) > 0.0)) throw inapplicable_error("lambda_separated: sigma' vanishes");
    const double s0 = m.d2sigma(nodes[i]) * m.sigma(nodes[i]) / (d1 * d1);
    lo = std::min(lo, s0);
    hi = std::max(hi, s0);
  }
  if (!(hi - lo <= tol * (1.0 + std::abs(hi))))
    throw inapplicable_error("lambda_separated: sigma'' sigma / sigma'^2 is not constant (range " + std::to_string(hi - lo) + ")");
  return 0.5 * (lo + hi);
}

inline Eigen::VectorXd lambda_separated(const separated_model& m, const Eigen::VectorXd& nodes, double tol = 1e-8) {
  if (!m.sigma || !m.dsigma || !m.d2sigma) throw config_error("lambda_separated: sigma and two derivatives required");
  const double s0 = separated_sigma0(m, nodes, tol);
  const double h0 = m.F, h1 = m.dF, h2 = 0.5 * m.d2F;
  if (!(std::abs(h0) > 1e-12)) throw inapplicable_error("lambda_separated: F too close to 0");
  if (h1 == 0.0) {
    if (h2 != 0.0) throw inapplicable_error("lambda_separated: F' = 0 with F'' != 0");
    return Eigen::VectorXd::Zero(m.b.size());
  }
  const double c = h2 / h1 + h1 * s0 / (2.0 * h0) - h1 / h0;
  return c * m.b;
}

// Density model on x in [x_min, x_max]; noise band s in [0, 1].
// The level p(x_min) also carries its own kernel on [0, eps).
struct lognormal_model {
  double eps = 0.1;
  double x_min = 0.0, x_max = 1.0;
  std::function<double(double)> mubar, dmubar;
  std::function<double(double, double)> sigbar, dsigbar_dx;  // evaluated only on s in [eps, f(x)]
  std::function<double(double)> sigbar_level;                // on [0, eps)
  std::optional<double> mubar_level;                         // defaults to mubar(x_min)

  double f(double x) const { return 2.0 * eps + (1.0 - 2.0 * eps) * (x - x_min) / (x_max - x_min); }
  double df() const { return (1.0 - 2.0 * eps) / (x_max - x_min); }
  double finv(double s) const { return x_min + (s - 2.0 * eps) / df(); }
  double level_drift() const { return mubar_level.value_or(mubar(x_min)); }

  void validate(int n_bands) const {
    if (!(eps > 0.0 && eps < 0.5)) throw config_error("lognormal model: eps must lie in (0, 1/2)");
    if (!(x_max > x_min)) throw config_error("lognormal model: x_max must exceed x_min");
    if (!mubar || !dmubar || !sigbar || !dsigbar_dx || !sigbar_level) throw config_error("lognormal model: missing coefficient");
    const double m = eps * n_bands;
    if (n_bands < 2 || std::abs(m - std::round(m)) > 1e-9 || std::round(m) < 1)
      throw config_error("lognormal model: eps must be a whole number of bands");
  }
};

namespace detail {
template <class Fn>
double band_integral(Fn&& g, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss<double, 10>::integrate(g, a, b);
}
}  // namespace detail

// lambda band by band: [eps,2eps) from x_min, [2eps,1] by marching the differentiated
// equation along s = f(x) (collocation at band midpoints), then [0,eps) from the level.
inline Eigen::VectorXd lambda_lognormal(const lognormal_model& m, int n_bands) {
  m.validate(n_bands);
  const double ds = 1.0 / n_bands;
  const int mb = static_cast<int>(std::round(m.eps * n_bands));
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(n_bands);

  const double k1 = detail::band_integral([&](double s) { return m.sigbar(m.x_min, s); }, m.eps, 2.0 * m.eps);
  if (!(std::abs(k1) > 1e-300)) throw domain_error("lognormal: kernel at x_min integrates to 0 on [eps, 2eps)");
  const double c1 = m.mubar(m.x_min) / k1;
  for (int k = mb; k < 2 * mb; ++k) lam[k] = c1;

  for (int k = 2 * mb; k < n_bands; ++k) {
    const double sa = k * ds, smid = sa + 0.5 * ds;
    const double x = m.finv(smid);
    double known = 0.0;
    for (int j = mb; j < k; ++j)
      known += lam[j] * detail::band_integral([&](double s) { return m.dsigbar_dx(x, s); }, j * ds, (j + 1) * ds);
    const double self = m.df() * m.sigbar(x, smid) +
                        detail::band_integral([&](double s) { return m.dsigbar_dx(x, s); }, sa, smid);
    if (!(std::abs(self) > 1e-300)) throw domain_error("lognormal: kernel vanishes on the moving edge at band " + std::to_string(k));
    lam[k] = (m.dmubar(x) - known) / self;
  }

  const double k0 = detail::band_integral(m.sigbar_level, 0.0, m.eps);
  if (!(std::abs(k0) > 1e-300)) throw domain_error("lognormal: level kernel integrates to 0 on [0, eps)");
  double rest = 0.0;
  for (int j = mb; j < 2 * mb; ++j)
    rest += lam[j] * detail::band_integral([&](double s) { return m.sigbar(m.x_min, s); }, j * ds, (j + 1) * ds);
  const double c0 = (m.level_drift() - rest) / k0;
  for (int k = 0; k < mb; ++k) lam[k] = c0;
  return lam;
}

// Price-format residual sum_s sigtilde_P(x, s) lambda(s) ds - mu_P(x) at x-nodes, with lambda
// piecewise constant on bands; density and level are the current state (any positive values).
inline Eigen::VectorXd lognormal_residual(const lognormal_model& m, const Eigen::VectorXd& lambda, int n_x,
                                          const std::function<double(double)>& density, double level) {
  const int nb = static_cast<int>(lambda.size());
  m.validate(nb);
  if (n_x < 2) throw config_error("lognormal_residual: need at least 2 x-nodes");
  const double ds = 1.0 / nb;
  const int mb = static_cast<int>(std::round(m.eps * nb));

  // differentiated residual r(y) = int_eps^f(y) sigbar(y,s) lambda ds - mubar(y)
  auto r = [&](double y) {
    const double fy = m.f(y);
    double acc = 0.0;
    for (int k = mb; k < nb; ++k) {
      const double a = k * ds, b = std::min((k + 1) * ds, fy);
      if (!(b > a)) break;
      acc += lambda[k] * detail::band_integral([&](double s) { return m.sigbar(y, s); }, a, b);
    }
    return acc - m.mubar(y);
  };

  double lvl = 0.0;
  for (int k = 0; k < mb; ++k) lvl += lambda[k] * detail::band_integral(m.sigbar_level, k * ds, (k + 1) * ds);
  for (int k = mb; k < 2 * mb; ++k)
    lvl += lambda[k] * detail::band_integral([&](double s) { return m.sigbar(m.x_min, s); }, k * ds, (k + 1) * ds);
  const double base = level * (lvl - m.level_drift());

  Eigen::VectorXd out(n_x);
  const double hx = (m.x_max - m.x_min) / (n_x - 1);
  double acc = 0.0;
  out[0] = base;
  for (int i = 1; i < n_x; ++i) {
    const double a = m.x_min + (i - 1) * hx, b = a + hx;
    acc += boost::math::quadrature::gauss<double, 10>::integrate([&](double y) { return density(y) * r(y); }, a, b);
    out[i] = base + acc;
  }
  return out;
}

}  // namespace liqstring
