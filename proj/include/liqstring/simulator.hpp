#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "demand_model.hpp"
#include "demand_surface.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "mpr.hpp"
#include "string_field.hpp"

namespace liqstring {

enum class measure { physical, risk_neutral };

inline const char* to_string(measure m) { return m == measure::physical ? "physical" : "risk_neutral"; }

inline measure parse_measure(const std::string& s) {
  if (s == "physical" || s == "P") return measure::physical;
  if (s == "risk_neutral" || s == "risk-neutral" || s == "Q") return measure::risk_neutral;
  throw config_error("unknown measure '" + s + "' (physical | risk_neutral)");
}

struct sim_config {
  int n_paths = 1;
  std::uint64_t seed = 0;
  measure meas = measure::physical;
  bool record_surfaces = false;
  bool record_lambda = false;
  bool frozen_lambda = false;   // solve once at t_0 and reuse; for speed comparisons only
  bool check_residual = true;
  bool strict_bounds = false;   // refuse to run when the feasibility checks fail
  std::vector<double> positions;  // extra large-trader positions x for P(x, t)
  int threads = 0;              // 0: all hardware threads
  int first_path = 0;
  mpr_options mpr;

  void validate() const {
    if (n_paths < 1) throw config_error("n_paths must be at least 1");
    if (threads < 0) throw config_error("threads must be >= 0");
    if (first_path < 0) throw config_error("first_path must be >= 0");
  }
};

struct violation_counts {
  std::uint64_t monotone = 0;       // Q(p_{i+1}) > Q(p_i)
  std::uint64_t density_floor = 0;  // q < q(.,0) + delta_1min
  std::uint64_t bound_hold = 0;     // Q(eps S) + x_min < 0
  std::uint64_t mc_hold = 0;        // Q(S) + x_max > 0

  std::uint64_t total() const { return monotone + density_floor + bound_hold + mc_hold; }
  violation_counts& operator+=(const violation_counts& o) {
    monotone += o.monotone;
    density_floor += o.density_floor;
    bound_hold += o.bound_hold;
    mc_hold += o.mc_hold;
    return *this;
  }
};

struct path_result {
  int path_id = 0;
  std::vector<double> pi;              // t_0 .. t_J
  std::vector<std::vector<double>> P;  // per configured position, t_0 .. t_J
  std::uint64_t clamps = 0;
  std::uint64_t multiple_brackets = 0;
  std::uint64_t steps_checked = 0;
  violation_counts violations;
  double max_residual = 0.0;  // max |residual| / (1 + |A|_inf) over steps
  double lambda_energy = 0.0;
  bool failed = false;
  std::string failure;
  std::vector<surface_column> surfaces;
  std::optional<risk_price_field> lambda;
};

// Checks of one surface column against the model's bounds.
inline violation_counts check_column(const surface_column& s, const model_params& m) {
  violation_counts v;
  const int n = m.n();
  for (int i = 0; i < n; ++i)
    if (s.Q[i + 1] > s.Q[i]) ++v.monotone;
  for (int c = 0; c < n; ++c)
    if (s.q[c] < m.q0[c] + m.d1_min) ++v.density_floor;
  if (s.Q[1] + m.x_min < 0.0) ++v.bound_hold;
  if (s.Q[n] + m.x_max > 0.0) ++v.mc_hold;
  return v;
}

// Euler step of the state processes. dB are the increments of the physical sheet; when lambda
// is given they are read as risk-neutral draws and shifted by -lambda ds dt first.
inline model_state step_state(const model_state& st, const Eigen::VectorXd& dB, const Eigen::VectorXd* lambda,
                              const model_params& m, int step) {
  const int n = m.n();
  if (dB.size() != n || st.Xq.size() != n) throw dimension_error("step_state: increment column has wrong length");
  Eigen::VectorXd inc = dB;
  if (lambda) {
    if (lambda->size() != n) throw dimension_error("step_state: lambda column has wrong length");
    inc -= *lambda * (m.grid.ds * m.grid.dt);
  }
  const row_matrix& K = m.kernel_at(step);
  model_state out;
  out.X0 = st.X0 + m.sigbar_Q0.dot(inc);
  out.Xq.resize(n);
  out.Xq[0] = st.Xq[0] + m.sigbar_q_head[0] * inc[0];
  out.Xq.tail(n - 1) = st.Xq.tail(n - 1) + K * inc.tail(n - 1);
  out.t = st.t + m.grid.dt;
  return out;
}

namespace detail {

inline double relative_residual(const Eigen::VectorXd& lambda, const node_coefficients& nc, const Eigen::VectorXd& A,
                                double ds) {
  const Eigen::VectorXd r = mpr_residual(lambda, nc.sigtilde, A, ds, 1);
  return r.cwiseAbs().maxCoeff() / (1.0 + A.tail(A.size() - 1).cwiseAbs().maxCoeff());
}

inline void record_prices(path_result& r, const surface_column& s, const model_params& m,
                          const std::vector<double>& positions) {
  const clearing_point cp = clearing_price(s.Q, m.prices, 0.0);
  if (cp.multiple_brackets) ++r.multiple_brackets;
  r.pi.push_back(cp.price);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const clearing_point c = clearing_price(s.Q, m.prices, positions[k]);
    if (c.multiple_brackets) ++r.multiple_brackets;
    r.P[k].push_back(c.price);
  }
}

}  // namespace detail

inline path_result simulate_path(const model_params& m, const sim_config& cfg, const mpr_solver_set& solvers,
                                 int path_id) {
  const int n = m.n();
  const int J = m.grid.n_steps;
  const double ds = m.grid.ds;
  const bool rn = cfg.meas == measure::risk_neutral;
  path_result r;
  r.path_id = path_id;
  r.P.assign(cfg.positions.size(), {});
  r.pi.reserve(J + 1);
  if (cfg.record_lambda && rn) r.lambda.emplace(m.grid);

  model_state st = model_state::zero(m);
  Eigen::VectorXd dB(n), lambda = Eigen::VectorXd::Zero(n);
  try {
    for (int j = 0; j <= J; ++j) {
      surface_column surf;
      std::optional<node_coefficients> nc;
      if (rn && j < J && (!cfg.frozen_lambda || j == 0)) {
        nc = drift_diffusion(st, m, j);
        surf = nc->surface;
        std::uint64_t c = 0;
        surface_from_state(st, m, &c);  // clamp accounting only
        r.clamps += c;
      } else {
        surf = surface_from_state(st, m, &r.clamps);
      }
      r.violations += check_column(surf, m);
      ++r.steps_checked;
      detail::record_prices(r, surf, m, cfg.positions);
      if (cfg.record_surfaces) r.surfaces.push_back(surf);
      if (j == J) break;

      sample_sheet_column(m.grid, cfg.seed, static_cast<std::uint64_t>(path_id), j, dB.data());
      if (rn) {
        if (nc) {
          const mpr_inputs in = mpr_inputs::from(*nc, m);
          lambda = solvers.at(j).solve(in);
          if (cfg.check_residual)
            r.max_residual = std::max(r.max_residual, detail::relative_residual(lambda, *nc, in.A, ds));
        }
        if (r.lambda) r.lambda->values.col(j) = lambda;
        r.lambda_energy += lambda.squaredNorm() * ds * m.grid.dt;
        st = step_state(st, dB, &lambda, m, j);
      } else {
        st = step_state(st, dB, nullptr, m, j);
      }
    }
  } catch (const numerical_error& e) {
    r.failed = true;
    r.failure = e.what();
  }
  return r;
}

struct run_report {
  int paths = 0;
  int failed = 0;
  std::uint64_t clamps = 0;
  std::uint64_t multiple_brackets = 0;
  std::uint64_t steps_checked = 0;
  violation_counts violations;
  double max_residual = 0.0;
  double max_lambda_energy = 0.0;
  bool feasible = false;
  std::vector<std::string> failures;  // first few diagnostics
};

inline run_report summarize(const std::vector<path_result>& paths, const model_params& m) {
  run_report rep;
  rep.feasible = feasibility_bounds(m).feasible();
  for (const auto& p : paths) {
    ++rep.paths;
    rep.clamps += p.clamps;
    rep.multiple_brackets += p.multiple_brackets;
    rep.steps_checked += p.steps_checked;
    rep.violations += p.violations;
    rep.max_residual = std::max(rep.max_residual, p.max_residual);
    rep.max_lambda_energy = std::max(rep.max_lambda_energy, p.lambda_energy);
    if (p.failed) {
      ++rep.failed;
      if (rep.failures.size() < 10) rep.failures.push_back("path " + std::to_string(p.path_id) + ": " + p.failure);
    }
  }
  return rep;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Paths are independent; results come back in path order whatever the thread count.
inline std::vector<path_result> run(const model_params& m, const sim_config& cfg) {
  cfg.validate();
  m.validate();
  if (cfg.strict_bounds && !feasibility_bounds(m).feasible())
    throw config_error("strict bounds requested but the feasibility checks fail");
  mpr_solver_set solvers;
  if (cfg.meas == measure::risk_neutral) solvers = mpr_solver_set(m, cfg.mpr);

  std::vector<path_result> out(static_cast<std::size_t>(cfg.n_paths));
  const int nt = std::min(resolve_threads(cfg.threads), cfg.n_paths);
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::atomic<bool> stop{false};
  auto worker = [&] {
    try {
      for (int i = next++; i < cfg.n_paths && !stop; i = next++)
        out[static_cast<std::size_t>(i)] = simulate_path(m, cfg, solvers, cfg.first_path + i);
    } catch (...) {
      if (!stop.exchange(true)) err = std::current_exception();
    }
  };
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

// Column k of the terminal values: pi when position < 0, else P at cfg.positions[position].
inline std::vector<double> terminal_values(const std::vector<path_result>& paths, int position = -1) {
  std::vector<double> v;
  v.reserve(paths.size());
  for (const auto& p : paths) {
    if (p.failed) continue;
    v.push_back(position < 0 ? p.pi.back() : p.P.at(static_cast<std::size_t>(position)).back());
  }
  return v;
}

// Recorded surfaces of one path in ingest layout (q at node c+1 for cell c, 0 at p_0).
inline demand_surface to_surface(const path_result& p, const model_params& m) {
  if (p.surfaces.empty()) throw config_error("to_surface: path has no recorded surfaces");
  const int n = m.n();
  const int cols = static_cast<int>(p.surfaces.size());
  demand_surface s;
  for (int i = 0; i <= n; ++i) s.prices.push_back(m.prices.at(i));
  for (int j = 0; j < cols; ++j) s.times.push_back(m.grid.t(j));
  s.Q = Eigen::MatrixXd::Zero(n + 1, cols);
  s.q = Eigen::MatrixXd::Zero(n + 1, cols);
  for (int j = 0; j < cols; ++j) {
    s.Q.col(j) = p.surfaces[j].Q;
    s.q.col(j).tail(n) = p.surfaces[j].q;
  }
  return s;
}

inline constexpr const char* path_csv_header = "path_id,t_index,pi";

inline void write_paths(std::ostream& os, const std::vector<path_result>& paths) {
  os << path_csv_header << '\n';
  for (const auto& p : paths) {
    if (p.failed) {
      os << "# path " << p.path_id << " failed: " << p.failure << '\n';
      continue;
    }
    for (std::size_t j = 0; j < p.pi.size(); ++j) os << p.path_id << ',' << j << ',' << fmt_double(p.pi[j]) << '\n';
  }
}

struct path_row {
  int path_id;
  int t_index;
  double pi;
};

inline std::vector<path_row> read_paths(std::istream& in) {
  std::vector<path_row> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (trim(line) != path_csv_header) throw parse_error("path CSV: expected header '" + std::string(path_csv_header) + "'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = split_csv(t);
    if (f.size() != 3) throw parse_error("path CSV line " + std::to_string(lineno) + ": expected 3 fields");
    path_row r{};
    if (!parse_number(f[0], r.path_id) || !parse_number(f[1], r.t_index) || !parse_number(f[2], r.pi))
      throw parse_error("path CSV line " + std::to_string(lineno) + ": bad number");
    rows.push_back(r);
  }
  return rows;
}

// Terminal value per path: the row with the largest t_index.
inline std::vector<double> terminal_from_rows(const std::vector<path_row>& rows) {
  std::vector<double> out;
  int cur = -1, best_j = -1;
  double val = 0.0;
  for (const auto& r : rows) {
    if (r.path_id != cur) {
      if (cur >= 0) out.push_back(val);
      cur = r.path_id;
      best_j = -1;
    }
    if (r.t_index > best_j) {
      best_j = r.t_index;
      val = r.pi;
    }
  }
  if (cur >= 0) out.push_back(val);
  return out;
}

inline void write_run_report(std::ostream& os, const run_report& r, const sim_config& cfg) {
  os << "measure = " << to_string(cfg.meas) << '\n';
  os << "paths = " << r.paths << '\n';
  os << "failed_paths = " << r.failed << '\n';
  os << "clamps = " << r.clamps << '\n';
  os << "multiple_brackets = " << r.multiple_brackets << '\n';
  os << "steps_checked = " << r.steps_checked << '\n';
  os << "violations_monotone = " << r.violations.monotone << '\n';
  os << "violations_density_floor = " << r.violations.density_floor << '\n';
  os << "violations_bound_hold = " << r.violations.bound_hold << '\n';
  os << "violations_mc_hold = " << r.violations.mc_hold << '\n';
  os << "feasible = " << (r.feasible ? "true" : "false") << '\n';
  os << "max_mpr_residual_rel = " << fmt_double(r.max_residual) << '\n';
  os << "max_lambda_energy = " << fmt_double(r.max_lambda_energy) << '\n';
  for (const auto& f : r.failures) os << "# " << f << '\n';
}

}  // namespace liqstring
