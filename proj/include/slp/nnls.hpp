#pragma once

// Lawson-Hanson active-set solver for  min_{delta >= 0} ||C delta - d||_2^2.
//
// Tolerances are relative: a gradient entry g_i = [C^T (C delta - d)]_i is
// treated as zero when |g_i| <= tol * max(1, ||C||_F ||d||_2).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "slp/errors.hpp"
#include "slp/linalg.hpp"

namespace slp {

struct NnlsProblem {
  RMatrix C;
  RVector d;
  double tol = 1e-10;
  /// Outer-iteration cap; negative selects 10 * n.
  int max_iter = -1;
};

struct NnlsSolution {
  RVector delta;
  double residual_norm = 0.0;
  /// Outer (variable-entering) iterations.
  int iterations = 0;
  std::vector<int> passive_set;
  /// ||C delta - d|| at the start and after each outer iteration.
  std::vector<double> residual_history;
};

class NnlsNonConvergence : public std::runtime_error {
 public:
  NnlsNonConvergence(const std::string& what, NnlsSolution best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const NnlsSolution& best_iterate() const { return best_; }

 private:
  NnlsSolution best_;
};

inline double kkt_tolerance(const NnlsProblem& p) {
  return p.tol * std::max(1.0, p.C.norm() * p.d.norm());
}

inline void validate(const NnlsProblem& p) {
  if (p.C.rows() < 1) throw InputError("nnls: C must have at least one row");
  if (p.d.size() != p.C.rows())
    throw InputError("nnls: d has length " + std::to_string(p.d.size()) + ", expected " +
                     std::to_string(p.C.rows()));
  if (!(p.tol > 0.0)) throw InputError("nnls: tol must be positive");
  if (!p.C.allFinite() || !p.d.allFinite()) throw InputError("nnls: non-finite input");
}

namespace detail {

inline RVector passive_lsq(const RMatrix& C, const RVector& d, const std::vector<int>& passive) {
  RMatrix sub(C.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t c = 0; c < passive.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = C.col(passive[c]);
  return sub.colPivHouseholderQr().solve(d);
}

inline NnlsSolution finish(const NnlsProblem& p, RVector delta, int iterations,
                           std::vector<double> history) {
  NnlsSolution sol;
  delta = delta.cwiseMax(0.0);
  sol.residual_norm = (p.C * delta - p.d).norm();
  for (Eigen::Index i = 0; i < delta.size(); ++i)
    if (delta(i) > 0.0) sol.passive_set.push_back(static_cast<int>(i));
  sol.delta = std::move(delta);
  sol.iterations = iterations;
  sol.residual_history = std::move(history);
  return sol;
}

}  // namespace detail

inline NnlsSolution solve_active_set(const NnlsProblem& p) {
  validate(p);
  const auto n = p.C.cols();
  const int max_iter = p.max_iter < 0 ? static_cast<int>(10 * n) : p.max_iter;
  const double tol = kkt_tolerance(p);

  RVector x = RVector::Zero(n);
  std::vector<char> in_passive(n, 0);
  // Variables whose entry produced a non-positive inner solution; reset once x moves.
  std::vector<char> blocked(n, 0);
  std::vector<double> history{p.d.norm()};
  int iterations = 0;

  RVector w = p.C.transpose() * p.d;
  while (true) {
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!in_passive[j] && !blocked[j] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    if (iterations >= max_iter)
      throw NnlsNonConvergence("nnls: no convergence after " + std::to_string(iterations) +
                                   " outer iterations",
                               detail::finish(p, x, iterations, history));
    ++iterations;

    in_passive[enter] = 1;
    std::vector<int> passive;
    for (Eigen::Index j = 0; j < n; ++j)
      if (in_passive[j]) passive.push_back(static_cast<int>(j));
    RVector z_p = detail::passive_lsq(p.C, p.d, passive);

    const auto entering_pos =
        std::find(passive.begin(), passive.end(), static_cast<int>(enter)) - passive.begin();
    if (z_p(entering_pos) <= 0.0) {
      in_passive[enter] = 0;
      blocked[enter] = 1;
      history.push_back(history.back());
      continue;
    }

    // Inner loop: step back toward feasibility until the LS solution is positive.
    for (Eigen::Index guard = 0; guard <= n; ++guard) {
      Eigen::Index worst = -1;
      double alpha = 1.0;
      for (std::size_t c = 0; c < passive.size(); ++c) {
        const int j = passive[c];
        if (z_p(static_cast<Eigen::Index>(c)) <= 0.0) {
          const double a = x(j) / (x(j) - z_p(static_cast<Eigen::Index>(c)));
          if (worst < 0 || a < alpha) {
            alpha = a;
            worst = j;
          }
        }
      }
      if (worst < 0) break;
      for (std::size_t c = 0; c < passive.size(); ++c) {
        const int j = passive[c];
        x(j) += alpha * (z_p(static_cast<Eigen::Index>(c)) - x(j));
      }
      x(worst) = 0.0;
      std::vector<int> kept;
      for (int j : passive) {
        if (x(j) > 0.0) {
          kept.push_back(j);
        } else {
          x(j) = 0.0;
          in_passive[j] = 0;
        }
      }
      passive = std::move(kept);
      z_p = detail::passive_lsq(p.C, p.d, passive);
    }

    x.setZero();
    for (std::size_t c = 0; c < passive.size(); ++c)
      x(passive[c]) = std::max(0.0, z_p(static_cast<Eigen::Index>(c)));
    std::fill(blocked.begin(), blocked.end(), 0);
    const RVector r = p.d - p.C * x;
    w = p.C.transpose() * r;
    history.push_back(r.norm());
  }
  return detail::finish(p, std::move(x), iterations, std::move(history));
}

/// Stationarity, primal feasibility and complementary slackness within tol.
inline bool verify_kkt(const NnlsProblem& p, const NnlsSolution& sol) {
  if (sol.delta.size() != p.C.cols() || p.d.size() != p.C.rows()) return false;
  const double tol = kkt_tolerance(p);
  const RVector g = p.C.transpose() * (p.C * sol.delta - p.d);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!(sol.delta(i) >= 0.0)) return false;
    if (g(i) < -tol) return false;
    if (sol.delta(i) > 0.0 && std::abs(g(i)) > tol) return false;
  }
  return true;
}

}  // namespace slp
