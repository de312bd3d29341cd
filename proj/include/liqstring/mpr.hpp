#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "demand_model.hpp"
#include "errors.hpp"

namespace liqstring {

// A(p) = mu_Q + Q_pp/2 (sigma_Q/Q_p)^2 + C with C = -(1/Q_p) sum_k dsigtilde sigtilde ds.
// Nodes below first_node are filled but not checked for a flat curve.
inline Eigen::VectorXd compute_A(const node_coefficients& nc, int first_node = 1, double qp_floor = 1e-12) {
  const int n1 = static_cast<int>(nc.mu_Q.size());
  Eigen::VectorXd A(n1);
  for (int i = 0; i < n1; ++i) {
    const double qp = nc.Qp[i];
    if (std::abs(qp) < qp_floor) {
      if (i >= first_node)
        throw numerical_error("near-flat demand at price node " + std::to_string(i) + " (|dQ/dp| = " +
                              std::to_string(std::abs(qp)) + ")");
      A[i] = 0.0;
      continue;
    }
    const double C = -nc.cross[i] / qp;
    A[i] = nc.mu_Q[i] + 0.5 * nc.Qpp[i] * nc.sigma_Q2[i] / (qp * qp) + C;
  }
  return A;
}

struct mpr_inputs {
  Eigen::VectorXd A;             // nodes 0..n
  Eigen::VectorXd h1;            // cells 0..n-1
  Eigen::VectorXd sigtilde_p1;   // loading at p_1 = eps S, per band
  double ds = 0.0;
  double dp = 0.0;

  static mpr_inputs from(const node_coefficients& nc, const model_params& m) {
    return {compute_A(nc), nc.h1, nc.sigtilde.row(1).transpose(), m.grid.ds, m.prices.dp};
  }
};

struct mpr_options {
  double eta = 1e-8;        // floor on the band-0 denominator
  double h1_floor = 1e-12;
  double rel_tol = 1e-10;   // linear residual relative to the right-hand side
};

// Right-hand side of the tail system: differences of the demand-format equation between
// adjacent nodes p_i, p_{i+1}, i = 1..n-1.
inline Eigen::VectorXd mpr_rhs(const mpr_inputs& in, const mpr_options& opt = {}) {
  const int n = static_cast<int>(in.h1.size());
  Eigen::VectorXd r(n - 1);
  for (int i = 1; i < n; ++i) {
    const double h = in.h1[i];
    if (!(std::abs(h) >= opt.h1_floor))
      throw numerical_error("|h1| below floor in price cell " + std::to_string(i));
    r[i - 1] = (in.A[i] - in.A[i + 1]) / (in.dp * h * in.ds);
  }
  return r;
}

// Factor-once solver for one kernel matrix; shareable across threads after construction.
class mpr_solver {
 public:
  mpr_solver() = default;
  explicit mpr_solver(const row_matrix& sigbar_q, mpr_options opt = {}) : opt_(opt), K_(sigbar_q) {
    if (K_.rows() != K_.cols() || K_.rows() == 0) throw dimension_error("mpr_solver: sigbar_q must be square");
    lu_.compute(K_);
    // the rcond estimate misses exact zero pivots, so look at U as well
    const Eigen::VectorXd piv = lu_.matrixLU().diagonal().cwiseAbs();
    const double rc = std::min(lu_.rcond(), piv.minCoeff() / std::max(piv.maxCoeff(), 1e-300));
    if (!(rc > 1e-15) || !K_.allFinite())
      throw solver_error("sigbar_q is singular to working precision (rcond " + std::to_string(rc) + ")");
    rcond_ = rc;
  }

  double rcond() const { return rcond_; }
  int size() const { return static_cast<int>(K_.rows()); }
  const mpr_options& options() const { return opt_; }

  // Solves K x = b with one step of refinement when needed.
  Eigen::VectorXd solve_linear(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = lu_.solve(b);
    const double scale = b.norm();
    Eigen::VectorXd res = b - K_ * x;
    if (res.norm() > opt_.rel_tol * scale) {
      x += lu_.solve(res);
      res = b - K_ * x;
      if (res.norm() > opt_.rel_tol * scale && res.norm() > 1e-300)
        throw solver_error("linear residual " + std::to_string(res.norm() / scale) + " above tolerance after refinement");
    }
    return x;
  }

  // lambda over bands 0..n-1 for one step
  Eigen::VectorXd solve(const mpr_inputs& in) const {
    const int n = static_cast<int>(in.h1.size());
    if (n - 1 != size() || in.A.size() != n + 1 || in.sigtilde_p1.size() != n)
      throw dimension_error("mpr inputs do not match the factored kernel");
    Eigen::VectorXd lambda(n);
    lambda.tail(n - 1) = solve_linear(mpr_rhs(in, opt_));
    const double denom = in.sigtilde_p1[0] * in.ds;
    if (!(std::abs(denom) >= opt_.eta))
      throw positivity_violation("band-0 denominator " + std::to_string(denom) + " below eta");
    const double rest = in.sigtilde_p1.tail(n - 1).dot(lambda.tail(n - 1)) * in.ds;
    lambda[0] = (in.A[1] - rest) / denom;
    return lambda;
  }

 private:
  mpr_options opt_;
  row_matrix K_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double rcond_ = 0.0;
};

inline Eigen::VectorXd solve_mpr_step(const mpr_inputs& in, const row_matrix& sigbar_q, mpr_options opt = {}) {
  return mpr_solver(sigbar_q, opt).solve(in);
}

// residual(p_i) = sum_k sigtilde(p_i, s_k) lambda_k ds - A(p_i) for nodes first..last.
inline Eigen::VectorXd mpr_residual(const Eigen::VectorXd& lambda, const row_matrix& sigtilde, const Eigen::VectorXd& A,
                                    double ds, int first = 1) {
  if (sigtilde.cols() != lambda.size() || sigtilde.rows() != A.size())
    throw dimension_error("mpr_residual: dimensions disagree");
  const int rows = static_cast<int>(A.size()) - first;
  Eigen::VectorXd r(rows);
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int k = 0; k < lambda.size(); ++k) acc += sigtilde(first + i, k) * lambda[k];
    r[i] = acc * ds - A[first + i];
  }
  return r;
}

// Solvers for a model, one per distinct kernel matrix.
class mpr_solver_set {
 public:
  mpr_solver_set() = default;
  explicit mpr_solver_set(const model_params& m, mpr_options opt = {}) {
    if (m.sigbar_q_table.empty()) {
      solvers_.push_back(std::make_shared<mpr_solver>(m.sigbar_q, opt));
    } else {
      for (const auto& K : m.sigbar_q_table) solvers_.push_back(std::make_shared<mpr_solver>(K, opt));
    }
  }
  const mpr_solver& at(int step) const {
    const int idx = solvers_.size() == 1 ? 0 : std::clamp(step, 0, static_cast<int>(solvers_.size()) - 1);
    return *solvers_.at(static_cast<std::size_t>(idx));
  }
  bool empty() const { return solvers_.empty(); }

 private:
  std::vector<std::shared_ptr<const mpr_solver>> solvers_;
};

}  // namespace liqstring
