#pragma once

#include "ikkt/kkt.hpp"
#include "ikkt/model.hpp"
#include "ikkt/qp.hpp"

#include <vector>

namespace ikkt {

// min ||M a||^2  s.t.  E a = E a0,  a >= lo, started from the feasible point a0. Primal active
// set on the bounds; subproblems are solved on M itself, so its conditioning is not squared.
// lo may hold -inf entries.
Vec bounded_lsq(const Mat& M, const Mat& E, const Vec& lo, const Vec& a0);

// Stationarity of one window with dynamics multipliers projected out. Unknowns are
// (q, r, lambda) where lambda holds only the known-constraint rows active in the window.
struct WindowSystem {
  Mat R;  // rows x (nx + nu + n_lambda)
  double floor = 0.0;
  int n_lambda = 0;
};

WindowSystem reduce_window(const KktWindow& w, const Trajectory& traj,
                           const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                           double active_tol);

struct WeightFit {
  CostWeights w;
  double residual = 0.0;  // 2-norm of the stacked stationarity at the optimum
  bool degenerate = false;  // tie-break stage was needed
};

// min || stacked R a ||  s.t.  sum q = 1, q >= 0, r >= r_min, lambda >= 0.
// Among residual-optimal points picks the one with minimal ||q||_2.
WeightFit fit_weights(const std::vector<WindowSystem>& systems, int nx, int nu, double r_min,
                      const SolverConfig& qp = {});

}  // namespace ikkt
