#pragma once

#include "ikkt/kkt.hpp"
#include "ikkt/model.hpp"
#include "ikkt/qp.hpp"

#include <vector>

namespace ikkt {

struct SegmentConfig {
  // States per estimation window. Windows ending at the goal take one extra state.
  int window = 5;
  double r_min = kDefaultRMin;
  // Known-constraint rows with |g| above this count as inactive and get lambda = 0.
  double active_tol = 1e-7;
  double alpha = 0.05;
  int max_outliers = -1;  // -1 selects floor(n / 3)
  // GESD stops once the sample stdev drops below rel_spread * median |trace|.
  double rel_spread = 1e-6;
  int threads = 1;
  SolverConfig qp;
};

struct SegmentCostEstimate {
  int j = 0;  // window start index
  int first = 0;
  int last = 0;
  Vec q;
  Vec r;
  double residual = 0.0;  // ||stationarity||_2 at the optimum
  double trace_omega = 0.0;
};

struct DemoSegmentation {
  std::vector<SegmentCostEstimate> estimates;
  std::vector<int> outlier_windows;  // positions into estimates
  std::vector<int> active;
  std::vector<int> inactive;
};

struct Segmentation {
  std::vector<DemoSegmentation> demos;
};

// Window [first, last] used for start index j.
KktWindow segment_window(int j, int N, int window);
// Number of start indices for a trajectory of length N.
int segment_count(int N, int window);

SegmentCostEstimate estimate_segment_cost(const Trajectory& traj, int j,
                                          const std::vector<BoxConstraint>& known,
                                          const LinearDynamics& dyn, const SegmentConfig& cfg = {});

double trace_omega(const CostWeights& w, const std::vector<int>& axis_map);

// Rosner critical value lambda_i for sample size n, round i (1-based).
double gesd_critical_value(int n, int i, double alpha);
double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

// Indices (ascending) flagged by the generalized ESD test. Rounds stop early when the sample
// stdev is <= min_stdev.
std::vector<int> gesd_outliers(const std::vector<double>& values, double alpha, int max_outliers,
                               double min_stdev = 0.0);

Segmentation segment_demonstrations(const std::vector<Trajectory>& trajs,
                                    const std::vector<BoxConstraint>& known,
                                    const LinearDynamics& dyn, const SegmentConfig& cfg = {});

}  // namespace ikkt
