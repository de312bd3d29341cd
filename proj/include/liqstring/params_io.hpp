#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "demand_model.hpp"
#include "errors.hpp"
#include "io.hpp"

namespace liqstring {

// Text layout:
//   key = value lines, then "[name rows cols]" headers each followed by rows lines of CSV.
//   Lines starting with '#' are comments.

namespace detail {
inline void write_block(std::ostream& out, const std::string& name, const Eigen::MatrixXd& M) {
  out << '[' << name << ' ' << M.rows() << ' ' << M.cols() << "]\n";
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << fmt_double(M(i, j));
    }
    out << '\n';
  }
}

struct params_text {
  std::map<std::string, std::string> keys;
  std::map<std::string, Eigen::MatrixXd> blocks;
  std::vector<std::string> order;  // block names as they appear

  const std::string& key(const std::string& k) const {
    auto it = keys.find(k);
    if (it == keys.end()) throw parse_error("parameters file: missing key '" + k + "'");
    return it->second;
  }
  double num(const std::string& k) const { return parse_double_or_throw(key(k), k); }
  long integer(const std::string& k) const {
    long v = 0;
    if (!parse_number(std::string_view(key(k)), v)) throw parse_error("parameters file: '" + k + "' is not an integer");
    return v;
  }
  const Eigen::MatrixXd& block(const std::string& b) const {
    auto it = blocks.find(b);
    if (it == blocks.end()) throw parse_error("parameters file: missing block '" + b + "'");
    return it->second;
  }
};

inline params_text parse_params_text(std::istream& in) {
  params_text t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    if (v.front() == '[') {
      if (v.back() != ']') throw parse_error("parameters file line " + std::to_string(lineno) + ": bad block header");
      std::istringstream hs{std::string(v.substr(1, v.size() - 2))};
      std::string name;
      long rows = -1, cols = -1;
      hs >> name >> rows >> cols;
      if (name.empty() || rows < 0 || cols < 0)
        throw parse_error("parameters file line " + std::to_string(lineno) + ": block header needs name rows cols");
      Eigen::MatrixXd M(rows, cols);
      for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw parse_error("parameters file: block '" + name + "' is truncated");
        ++lineno;
        const auto f = split_csv(trim(line));
        if (static_cast<long>(f.size()) != cols && cols > 0)
          throw parse_error("parameters file line " + std::to_string(lineno) + ": expected " + std::to_string(cols) + " values");
        for (long j = 0; j < cols; ++j) M(i, j) = parse_double_or_throw(f[j], "block " + name);
      }
      t.blocks[name] = std::move(M);
      t.order.push_back(name);
      continue;
    }
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw parse_error("parameters file line " + std::to_string(lineno) + ": expected key = value");
    t.keys[std::string(trim(v.substr(0, eq)))] = std::string(trim(v.substr(eq + 1)));
  }
  return t;
}
}  // namespace detail

inline void write_params(std::ostream& out, const model_params& m) {
  out << "# liqstring model parameters\n";
  out << "format = 1\n";
  out << "p_lo = " << fmt_double(m.prices.p_lo) << '\n';
  out << "dp = " << fmt_double(m.prices.dp) << '\n';
  out << "n_cells = " << m.prices.n << '\n';
  out << "n_steps = " << m.grid.n_steps << '\n';
  out << "horizon = " << fmt_double(m.grid.horizon) << '\n';
  out << "x_min = " << fmt_double(m.x_min) << '\n';
  out << "x_max = " << fmt_double(m.x_max) << '\n';
  out << "d0_min = " << fmt_double(m.d0_min) << '\n';
  out << "d0_max = " << fmt_double(m.d0_max) << '\n';
  out << "d1_min = " << fmt_double(m.d1_min) << '\n';
  out << "d1_max = " << fmt_double(m.d1_max) << '\n';
  out << "Q00 = " << fmt_double(m.Q00) << '\n';
  out << "# diagnostics\n";
  out << "calib_clamps = " << m.calib_clamps << '\n';
  out << "ridge = " << fmt_double(m.ridge) << '\n';
  out << "degenerate = " << (m.degenerate ? 1 : 0) << '\n';
  out << "kernel_table = " << m.sigbar_q_table.size() << '\n';
  detail::write_block(out, "q0", m.q0.transpose());
  detail::write_block(out, "sigbar_Q0", m.sigbar_Q0.transpose());
  detail::write_block(out, "sigbar_q_head", m.sigbar_q_head.transpose());
  detail::write_block(out, "sigbar_q", m.sigbar_q);
  for (std::size_t j = 0; j < m.sigbar_q_table.size(); ++j)
    detail::write_block(out, "sigbar_q." + std::to_string(j), m.sigbar_q_table[j]);
}

inline model_params read_params(std::istream& in) {
  const auto t = detail::parse_params_text(in);
  if (t.key("format") != "1") throw parse_error("parameters file: unsupported format " + t.key("format"));
  model_params m;
  m.prices = price_axis(t.num("p_lo"), t.num("dp"), static_cast<int>(t.integer("n_cells")));
  m.grid = grid_spec(m.prices.n, static_cast<int>(t.integer("n_steps")), t.num("horizon"));
  m.x_min = t.num("x_min");
  m.x_max = t.num("x_max");
  m.d0_min = t.num("d0_min");
  m.d0_max = t.num("d0_max");
  m.d1_min = t.num("d1_min");
  m.d1_max = t.num("d1_max");
  m.Q00 = t.num("Q00");
  m.calib_clamps = static_cast<std::uint64_t>(t.integer("calib_clamps"));
  m.ridge = t.num("ridge");
  m.degenerate = t.integer("degenerate") != 0;
  auto vec = [&](const std::string& b) -> Eigen::VectorXd {
    const auto& M = t.block(b);
    if (M.rows() != 1) throw parse_error("parameters file: block '" + b + "' must be one row");
    return M.row(0).transpose();
  };
  m.q0 = vec("q0");
  m.sigbar_Q0 = vec("sigbar_Q0");
  m.sigbar_q_head = vec("sigbar_q_head");
  m.sigbar_q = t.block("sigbar_q");
  const long tab = t.integer("kernel_table");
  for (long j = 0; j < tab; ++j) m.sigbar_q_table.push_back(t.block("sigbar_q." + std::to_string(j)));
  m.validate();
  return m;
}

inline void save_params(const std::string& path, const model_params& m) {
  auto out = open_out(path);
  write_params(out, m);
  if (!out) throw config_error("failed writing " + path);
}

inline model_params load_params(const std::string& path) {
  auto in = open_in(path);
  return read_params(in);
}

// t_index,band,lambda rows plus "# residual" summary comments
inline void write_lambda_csv(std::ostream& out, const std::vector<Eigen::VectorXd>& lambdas,
                             const std::vector<double>& residual_max) {
  out << "t_index,band,lambda\n";
  for (std::size_t j = 0; j < lambdas.size(); ++j)
    for (int k = 0; k < lambdas[j].size(); ++k) out << j << ',' << k << ',' << fmt_double(lambdas[j][k]) << '\n';
  double worst = 0.0;
  for (std::size_t j = 0; j < residual_max.size(); ++j) {
    out << "# residual," << j << ',' << fmt_double(residual_max[j]) << '\n';
    worst = std::max(worst, residual_max[j]);
  }
  out << "# residual_max," << fmt_double(worst) << '\n';
}

}  // namespace liqstring
