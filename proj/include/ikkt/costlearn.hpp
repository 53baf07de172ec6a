#pragma once

#include "ikkt/model.hpp"
#include "ikkt/qp.hpp"
#include "ikkt/segmenter.hpp"

#include <vector>

namespace ikkt {

struct CostLearnConfig {
  double r_min = kDefaultRMin;
  double active_tol = 1e-7;
  SolverConfig qp;
};

struct CostReport {
  double residual = 0.0;
  int runs = 0;       // inactive runs used across all demos
  bool degenerate = false;
};

// Maximal runs [first, last] of consecutive indices.
std::vector<KktWindow> contiguous_runs(const std::vector<int>& indices);

// One joint fit over every inactive run of length >= 3. Throws InsufficientInactiveData when a
// demo has no such run.
CostWeights extract_cost(const std::vector<Trajectory>& trajs, const Segmentation& seg,
                         const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                         const CostLearnConfig& cfg = {}, CostReport* report = nullptr);

}  // namespace ikkt
