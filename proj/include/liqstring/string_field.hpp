#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace liqstring {

// Cell (k,j) holds dB_{k,j} ~ N(0, ds*dt).
struct sheet_increments {
  grid_spec grid;
  Eigen::MatrixXd values;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
};

// lambda_j(k), per factor band and step.
struct risk_price_field {
  grid_spec grid;
  Eigen::MatrixXd values;

  risk_price_field() = default;
  explicit risk_price_field(const grid_spec& g)
      : grid(g), values(Eigen::MatrixXd::Zero(g.n_factors, g.n_steps)) {}

  bool all_finite() const { return values.allFinite(); }
  // Riemann sum of lambda^2 over the grid; the caller decides what is too big.
  double energy() const { return values.squaredNorm() * grid.ds * grid.dt; }
};

// One column of the sheet, written into out (length n_factors).
inline void sample_sheet_column(const grid_spec& grid, std::uint64_t seed, std::uint64_t path_id,
                                int j, double* out) {
  const double scale = std::sqrt(grid.ds * grid.dt);
  for (int k = 0; k < grid.n_factors; ++k)
    out[k] = scale * counter_normal(seed, path_id, static_cast<std::uint64_t>(k),
                                    static_cast<std::uint64_t>(j));
}

inline sheet_increments sample_sheet(const grid_spec& grid, std::uint64_t seed,
                                     std::uint64_t path_id) {
  if (grid.n_factors <= 0 || grid.n_steps <= 0)
    throw config_error("sample_sheet: empty grid");
  sheet_increments inc{grid, Eigen::MatrixXd(grid.n_factors, grid.n_steps), seed, path_id};
  for (int j = 0; j < grid.n_steps; ++j) sample_sheet_column(grid, seed, path_id, j, inc.values.col(j).data());
  return inc;
}

// Step-j increment of the integral of kernel(s) against B(ds, dt).
inline double integrate_kernel(const Eigen::VectorXd& kernel, const sheet_increments& inc, int j) {
  if (kernel.size() != inc.grid.n_factors)
    throw dimension_error("integrate_kernel: kernel length " + std::to_string(kernel.size()) +
                          " vs " + std::to_string(inc.grid.n_factors) + " bands");
  if (j < 0 || j >= inc.grid.n_steps)
    throw dimension_error("integrate_kernel: step index out of range");
  return kernel.dot(inc.values.col(j));
}

// Physical increments from risk-neutral draws: dB = dB^Q - lambda ds dt.
inline sheet_increments girsanov_shift(const sheet_increments& inc, const risk_price_field& lambda) {
  if (!(inc.grid == lambda.grid) || lambda.values.rows() != inc.values.rows() ||
      lambda.values.cols() != inc.values.cols())
    throw dimension_error("girsanov_shift: grid mismatch");
  sheet_increments out = inc;
  out.values -= lambda.values * (inc.grid.ds * inc.grid.dt);
  return out;
}

// B at nodes (s_k, t_j), k = 0..n_factors, j = 0..n_steps; row/column 0 are zero.
inline Eigen::MatrixXd reconstruct_sheet(const sheet_increments& inc) {
  const int n = inc.grid.n_factors, m = inc.grid.n_steps;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + 1, m + 1);
  for (int j = 1; j <= m; ++j)
    for (int k = 1; k <= n; ++k)
      b(k, j) = inc.values(k - 1, j - 1) + b(k - 1, j) + b(k, j - 1) - b(k - 1, j - 1);
  return b;
}

namespace detail {
template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get_le(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw data_error("sheet dump truncated");
  return v;
}
}  // namespace detail

// 16-byte header (int32 n_factors, int32 n_steps, float64 horizon), then row-major float64.
inline void write_sheet_dump(std::ostream& os, const sheet_increments& inc) {
  detail::put_le<std::int32_t>(os, inc.grid.n_factors);
  detail::put_le<std::int32_t>(os, inc.grid.n_steps);
  detail::put_le<double>(os, inc.grid.horizon);
  for (int k = 0; k < inc.grid.n_factors; ++k)
    for (int j = 0; j < inc.grid.n_steps; ++j) detail::put_le<double>(os, inc.values(k, j));
}

inline sheet_increments read_sheet_dump(std::istream& is) {
  const auto n = detail::get_le<std::int32_t>(is);
  const auto m = detail::get_le<std::int32_t>(is);
  const auto tau = detail::get_le<double>(is);
  sheet_increments inc{grid_spec(n, m, tau), Eigen::MatrixXd(n, m), 0, 0};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < m; ++j) inc.values(k, j) = detail::get_le<double>(is);
  return inc;
}

}  // namespace liqstring
