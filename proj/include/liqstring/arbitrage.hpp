#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "string_field.hpp"

namespace liqstring {

// P(x,t) = mu(t) + sigma(x) h(Z(t)) on x in [x_min, x_max].
struct finite_factor_model {
  std::function<double(double)> mu, sigma, h;
  double x_min = -2.0, x_max = 2.0;
  double h_min = 1.0, h_max = 3.0;  // bounds of h over the real line
  double z_scale = 1.0;             // Z = z_scale * int unit kernel dB

  static finite_factor_model standard() {
    finite_factor_model m;
    m.mu = [](double t) { return 20.0 + 2.0 * t; };
    m.sigma = [](double x) { return 2.0 * x - 1.0; };
    m.h = [](double y) { return 2.0 + std::sin(y); };
    return m;
  }

  double price(double x, double t, double z) const { return mu(t) + sigma(x) * h(z); }

  // mu(0) + min sigma(x) h(y); sigma increasing so the corners decide
  double delta0() const {
    const double s_lo = sigma(x_min), s_hi = sigma(x_max);
    const double c = std::min({s_lo * h_min, s_lo * h_max, s_hi * h_min, s_hi * h_max});
    return mu(0.0) + c;
  }

  // positive root of sigma, if any
  std::optional<double> x_star() const {
    const double lo = 0.0, hi = x_max;
    if (!(hi > lo)) return std::nullopt;
    const double a = sigma(lo), b = sigma(hi);
    if (a == 0.0) return std::nullopt;
    if (b == 0.0) return hi;
    if ((a < 0.0) == (b < 0.0)) return std::nullopt;
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve([&](double x) { return sigma(x); }, lo, hi, a, b,
                                               boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
  }
};

// L(theta, t) = int_0^theta P(x, t) dx
inline double liquidation_proceeds(const finite_factor_model& m, double theta, double t, double z) {
  if (theta < m.x_min || theta > m.x_max) throw domain_error("position outside [x_min, x_max]");
  if (theta == 0.0) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate([&](double x) { return m.price(x, t, z); }, 0.0, theta,
                                                                        12, 1e-13, &err);
}

// V(t_j) - V(0) for the constant strategy theta: sum of L(theta, t_j) [mu(t_{j+1}) - mu(t_j)].
inline std::vector<double> wealth_path(const finite_factor_model& m, double theta, const std::vector<double>& z,
                                       const std::vector<double>& times) {
  if (z.size() != times.size() || times.empty()) throw dimension_error("wealth_path: z and times must align");
  std::vector<double> V(times.size(), 0.0);
  for (std::size_t j = 0; j + 1 < times.size(); ++j)
    V[j + 1] = V[j] + liquidation_proceeds(m, theta, times[j], z[j]) * (m.mu(times[j + 1]) - m.mu(times[j]));
  return V;
}

// Z on the time grid from a one-band sheet
inline std::vector<double> z_path(const finite_factor_model& m, const grid_spec& g, std::uint64_t seed, std::uint64_t path_id) {
  const auto inc = sample_sheet(g, seed, path_id);
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(g.n_factors);
  std::vector<double> z(static_cast<std::size_t>(g.n_steps) + 1, 0.0);
  for (int j = 0; j < g.n_steps; ++j) z[j + 1] = z[j] + m.z_scale * integrate_kernel(unit, inc, j);
  return z;
}

struct arbitrage_config {
  int n_paths = 1000;
  int n_steps = 250;
  double horizon = 1.0;
  std::uint64_t seed = 0;
};

enum class arbitrage_verdict { realized, not_realized, precondition_failed };

inline const char* to_string(arbitrage_verdict v) {
  switch (v) {
    case arbitrage_verdict::realized: return "arbitrage realized on all paths";
    case arbitrage_verdict::not_realized: return "arbitrage not realized";
    default: return "precondition failed";
  }
}

struct path_minimum {
  int path_id = 0;
  double min_margin = 0.0;  // min over t_j > 0 of V - x* delta0 [mu(t) - mu(0)]
  double min_wealth = 0.0;  // min over t_j > 0 of V
  double min_L_gap = 0.0;   // min over t_j of L(x*, t) - x* delta0
};

struct arbitrage_report {
  arbitrage_verdict verdict = arbitrage_verdict::precondition_failed;
  std::string message;
  double delta0 = 0.0;
  double x_star = 0.0;
  double worst_margin = 0.0;
  double worst_L_gap = 0.0;
  int failing_paths = 0;
  std::vector<path_minimum> paths;
};

inline arbitrage_report run_demo(const finite_factor_model& m, const arbitrage_config& cfg) {
  arbitrage_report rep;
  rep.delta0 = m.delta0();
  if (rep.delta0 < 0.0) {
    rep.message = "delta0 = " + fmt_double(rep.delta0) + " < 0: prices can turn negative";
    return rep;
  }
  const auto xs = m.x_star();
  if (!xs) {
    rep.message = "sigma has no positive root in (0, x_max]";
    return rep;
  }
  rep.x_star = *xs;
  if (cfg.n_paths < 1 || cfg.n_steps < 1) throw config_error("arbitrage demo needs paths and steps");
  const grid_spec g(1, cfg.n_steps, cfg.horizon);
  std::vector<double> times(static_cast<std::size_t>(cfg.n_steps) + 1);
  for (int j = 0; j <= cfg.n_steps; ++j) times[j] = g.t(j);

  rep.worst_margin = INFINITY;
  rep.worst_L_gap = INFINITY;
  for (int p = 0; p < cfg.n_paths; ++p) {
    const auto z = z_path(m, g, cfg.seed, static_cast<std::uint64_t>(p));
    const auto V = wealth_path(m, rep.x_star, z, times);
    path_minimum pm{p, INFINITY, INFINITY, INFINITY};
    for (std::size_t j = 0; j < times.size(); ++j) {
      pm.min_L_gap = std::min(pm.min_L_gap, liquidation_proceeds(m, rep.x_star, times[j], z[j]) - rep.x_star * rep.delta0);
      if (j == 0) continue;
      pm.min_margin = std::min(pm.min_margin, V[j] - rep.x_star * rep.delta0 * (m.mu(times[j]) - m.mu(0.0)));
      pm.min_wealth = std::min(pm.min_wealth, V[j]);
    }
    if (!(pm.min_margin > 0.0)) ++rep.failing_paths;
    rep.worst_margin = std::min(rep.worst_margin, pm.min_margin);
    rep.worst_L_gap = std::min(rep.worst_L_gap, pm.min_L_gap);
    rep.paths.push_back(pm);
  }
  rep.verdict = rep.failing_paths == 0 ? arbitrage_verdict::realized : arbitrage_verdict::not_realized;
  rep.message = std::to_string(cfg.n_paths - rep.failing_paths) + " of " + std::to_string(cfg.n_paths) +
                " paths beat the bound x* delta0 [mu(t) - mu(0)]";
  return rep;
}

inline void write_arbitrage_report(std::ostream& os, const arbitrage_report& r) {
  os << "verdict = " << to_string(r.verdict) << '\n';
  os << "message = " << r.message << '\n';
  os << "delta0 = " << fmt_double(r.delta0) << '\n';
  os << "x_star = " << fmt_double(r.x_star) << '\n';
  os << "paths = " << r.paths.size() << '\n';
  os << "failing_paths = " << r.failing_paths << '\n';
  os << "worst_margin = " << fmt_double(r.paths.empty() ? 0.0 : r.worst_margin) << '\n';
  os << "worst_L_gap = " << fmt_double(r.paths.empty() ? 0.0 : r.worst_L_gap) << '\n';
}

inline void write_path_minima_csv(std::ostream& os, const arbitrage_report& r) {
  os << "path_id,min_margin,min_wealth,min_L_gap\n";
  for (const auto& p : r.paths)
    os << p.path_id << ',' << fmt_double(p.min_margin) << ',' << fmt_double(p.min_wealth) << ',' << fmt_double(p.min_L_gap) << '\n';
}

}  // namespace liqstring
