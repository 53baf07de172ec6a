#pragma once

#include "ikkt/kkt.hpp"
#include "ikkt/mip.hpp"
#include "ikkt/model.hpp"

#include <string>
#include <vector>

namespace ikkt {

Trajectory rollout(const LinearDynamics& dyn, const Vec& x0, const Mat& controls);

struct ForwardConfig {
  // Run branch-and-bound over the big-M side binaries after the side-pattern search.
  bool exact = false;
  MipConfig mip;
  int max_rounds = 60;
  double big_m = 0.0;  // 0 selects 10 x max |coordinate|
};

enum class ForwardStatus { Optimal, LocallyOptimal, Infeasible, SolverFailure };
const char* to_string(ForwardStatus s);

struct ForwardResult {
  ForwardStatus status = ForwardStatus::SolverFailure;
  Trajectory traj;
  Multipliers mult;
  // Constraint order used by mult: known constraints followed by truth boxes.
  std::vector<BoxConstraint> constraints;
  double objective = 0.0;
  std::string message;
};

ForwardResult solve_forward(const Scenario& s, int endpoint_index, const CostWeights& w, int N,
                            const ForwardConfig& cfg = {});

// Known constraints only, no obstacles: one convex QP.
ForwardResult solve_forward_convex(const LinearDynamics& dyn, const Endpoint& ep,
                                   const std::vector<BoxConstraint>& known, const CostWeights& w,
                                   int N);

std::vector<BoxConstraint> default_known_bounds(int axes = 2, double vmax = 10.0, double umax = 5.0);
CostWeights default_truth_weights();

std::vector<Scenario> builtin_scenarios();
// Scenario by catalog letter "a".."h"; throws when unknown.
Scenario builtin_scenario(const std::string& name);

}  // namespace ikkt
