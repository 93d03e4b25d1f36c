#ifndef SANOVSIM_LP_HPP
#define SANOVSIM_LP_HPP

// Dense two-phase tableau simplex for small standard-form programs
//
//     minimize c'x  subject to  A x = b,  x >= 0.
//
// Pivoting follows Bland's rule (lowest eligible index enters, ratio ties go
// to the lowest basic index), so the returned vertex is a deterministic
// function of the input.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sanovsim/error.hpp"

namespace sanovsim::lp {

struct Problem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

enum class Status { optimal, infeasible, unbounded };

struct Solution {
  Status status = Status::infeasible;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

struct Options {
  std::size_t max_iterations = 50000;
  double pivot_tolerance = 1e-11;
  double feasibility_tolerance = 1e-9;
};

namespace detail {

class Tableau {
 public:
  Tableau(const Problem& p, const Options& opt) : opt_(opt), n_(p.A.cols()), m_(p.A.rows()) {
    // Columns: [x (n) | artificial (m) | rhs]; last row holds reduced costs.
    t_ = Eigen::MatrixXd::Zero(m_ + 1, n_ + m_ + 1);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double sign = p.b(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign * p.A.row(i);
      t_(i, n_ + i) = 1.0;
      t_(i, rhs()) = sign * p.b(i);
    }
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = n_ + i;
    active_rows_.assign(static_cast<std::size_t>(m_), true);
  }

  Eigen::Index rhs() const { return n_ + m_; }
  Eigen::Index obj() const { return m_; }

  // Phase 1: minimize the sum of artificials.
  void load_phase1_costs() {
    t_.row(obj()).setZero();
    for (Eigen::Index j = n_; j < n_ + m_; ++j) t_(obj(), j) = 1.0;
    price_out();
  }

  void load_phase2_costs(const Eigen::VectorXd& c) {
    t_.row(obj()).setZero();
    t_.row(obj()).head(n_) = c.transpose();
    price_out();
  }

  // Returns false when the program is unbounded in the current phase.
  bool optimize(Eigen::Index allowed_columns, std::size_t& iterations) {
    while (true) {
      if (iterations >= opt_.max_iterations) {
        throw Error(Errc::solver_stall, "simplex iteration limit reached");
      }
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_columns; ++j) {
        if (t_(obj(), j) < -opt_.pivot_tolerance) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (!active_rows_[static_cast<std::size_t>(i)]) continue;
        const double a = t_(i, enter);
        if (a <= opt_.pivot_tolerance) continue;
        const double ratio = t_(i, rhs()) / a;
        if (leave < 0) {
          best = ratio;
          leave = i;
          continue;
        }
        const bool tie = std::abs(ratio - best) <= opt_.pivot_tolerance * (1.0 + std::abs(best));
        if (tie) {
          if (basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) leave = i;
        } else if (ratio < best) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      ++iterations;
    }
  }

  double objective_value() const { return -t_(obj(), rhs()); }

  // Replace basic artificials by structural columns; rows with no structural
  // entry are redundant and get deactivated.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_rows_[static_cast<std::size_t>(i)] || basis_[static_cast<std::size_t>(i)] < n_) continue;
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (std::abs(t_(i, j)) > opt_.pivot_tolerance) {
          col = j;
          break;
        }
      }
      if (col < 0) {
        active_rows_[static_cast<std::size_t>(i)] = false;
      } else {
        pivot(i, col);
      }
    }
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto bi = basis_[static_cast<std::size_t>(i)];
      if (active_rows_[static_cast<std::size_t>(i)] && bi < n_) x(bi) = std::max(0.0, t_(i, rhs()));
    }
    return x;
  }

  Eigen::Index structural_columns() const { return n_; }

 private:
  void price_out() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_rows_[static_cast<std::size_t>(i)]) continue;
      const double cb = t_(obj(), basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(obj()) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == row) continue;
      if (i < m_ && !active_rows_[static_cast<std::size_t>(i)]) continue;
      const double f = t_(i, col);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(row);
        t_(i, col) = 0.0;
      }
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Options opt_;
  Eigen::Index n_;
  Eigen::Index m_;
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> active_rows_;
};

}  // namespace detail

inline Solution solve(const Problem& problem, const Options& opt = {}) {
  if (problem.A.rows() != problem.b.size() || problem.A.cols() != problem.c.size()) {
    throw Error(Errc::dimension_mismatch, "LP dimensions are inconsistent");
  }
  Solution sol;
  detail::Tableau tab(problem, opt);

  tab.load_phase1_costs();
  const Eigen::Index all = tab.structural_columns() + problem.A.rows();
  tab.optimize(all, sol.iterations);
  const double scale = 1.0 + problem.b.cwiseAbs().sum();
  if (tab.objective_value() > opt.feasibility_tolerance * scale) {
    sol.status = Status::infeasible;
    return sol;
  }
  tab.expel_artificials();

  tab.load_phase2_costs(problem.c);
  if (!tab.optimize(tab.structural_columns(), sol.iterations)) {
    sol.status = Status::unbounded;
    return sol;
  }
  sol.status = Status::optimal;
  sol.x = tab.primal();
  sol.objective = problem.c.dot(sol.x);
  return sol;
}

}  // namespace sanovsim::lp

#endif  // SANOVSIM_LP_HPP
