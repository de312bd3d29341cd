#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace liqstring {

// Factor x time discretization of the sheet: I_n bands on [0,1], J_n steps on [0, horizon].
struct grid_spec {
  int n_factors = 0;
  int n_steps = 0;
  double horizon = 0.0;
  double ds = 0.0;
  double dt = 0.0;

  grid_spec() = default;
  grid_spec(int factors, int steps, double tau)
      : n_factors(factors), n_steps(steps), horizon(tau) {
    if (factors <= 0 || steps <= 0)
      throw config_error("grid needs positive n_factors and n_steps");
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw config_error("grid horizon must be positive and finite");
    ds = 1.0 / factors;
    dt = tau / steps;
  }

  double s(int k) const { return k * ds; }
  double t(int j) const { return j == n_steps ? horizon : j * dt; }

  bool operator==(const grid_spec& o) const {
    return n_factors == o.n_factors && n_steps == o.n_steps && horizon == o.horizon;
  }
};

// Uniform price axis p_0 .. p_n.
struct price_axis {
  double p_lo = 0.0;
  double dp = 0.0;
  int n = 0;

  price_axis() = default;
  price_axis(double lo, double step, int cells) : p_lo(lo), dp(step), n(cells) {
    if (cells <= 0) throw config_error("price axis needs at least one cell");
    if (!(step > 0.0)) throw config_error("price step must be positive");
    if (!(lo >= 0.0)) throw config_error("prices must be non-negative");
  }

  static price_axis spanning(double lo, double hi, int cells) {
    if (!(hi > lo)) throw config_error("price window must have hi > lo");
    return price_axis(lo, (hi - lo) / cells, cells);
  }

  double at(int i) const { return i == n ? p_hi_exact() : p_lo + i * dp; }
  double p_hi() const { return p_hi_exact(); }
  double span() const { return n * dp; }

 private:
  double p_hi_exact() const { return p_lo + n * dp; }
};

}  // namespace liqstring
