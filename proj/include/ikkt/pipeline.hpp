#pragma once

#include "ikkt/conslearn.hpp"
#include "ikkt/costlearn.hpp"
#include "ikkt/demogen.hpp"
#include "ikkt/segmenter.hpp"

#include <vector>

namespace ikkt {

// Forward-solves every endpoint pair with the truth weights. Throws SolverError when a demo has
// no feasible solution.
std::vector<Trajectory> generate_demos(const Scenario& s, const ForwardConfig& cfg = {},
                                       int threads = 1);

struct PipelineConfig {
  SegmentConfig segment;
  CostLearnConfig cost;
  ConstraintLearnConfig constraints;
};

struct PipelineResult {
  Segmentation seg;
  CostWeights weights;
  CostReport cost_report;
  std::vector<BoxConstraint> boxes;
  ConstraintReport constraint_report;
  double seconds = 0.0;
};

// segment -> extract_cost -> extract_constraints
PipelineResult run_pipeline(const std::vector<Trajectory>& trajs,
                            const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                            const PipelineConfig& cfg);

}  // namespace ikkt
