#pragma once

#include "ikkt/model.hpp"
#include "ikkt/pipeline.hpp"

#include <string>
#include <vector>

namespace ikkt {

// y_i = q_i / r_{axis_map[i]}
Vec y_vector(const CostWeights& w, const std::vector<int>& axis_map);
double cost_rmse(const CostWeights& truth, const CostWeights& est, const std::vector<int>& axis_map);

struct BoxMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
};

// Exact area of the union of 2-D boxes (first two masked dims).
double union_area(const std::vector<BoxConstraint>& boxes);
BoxMetrics box_metrics(const std::vector<BoxConstraint>& pred, const std::vector<BoxConstraint>& truth);

// Diagonal perturbation: q1 + sigma, q2 - sigma, other entries unchanged.
CostWeights perturb_weights(const CostWeights& w, double sigma);

struct SweepConfig {
  std::vector<double> sigmas{-0.01, -0.005, -0.001, 0.0, 0.001, 0.005, 0.01, 0.02};
  double time_limit = 600.0;  // per constraint program
  std::vector<std::string> scenarios;  // names; empty runs every scenario given
  bool learned_row = true;
  int threads = 1;  // concurrent cells
  // n_b is set per scenario from its truth boxes; the time limit from time_limit.
  PipelineConfig pipeline;
};

// Throws ConfigError.
void validate_sweep(const SweepConfig& cfg);

struct SweepCell {
  std::string scenario;
  double sigma = 0.0;
  bool learned = false;
  bool solved = false;  // boxes were returned
  bool converged = false;
  std::string status;
  double rmse = 0.0;
  BoxMetrics metrics;  // zeros when unsolved
  double seconds = 0.0;
  std::vector<BoxConstraint> boxes;
};

struct SweepRow {
  double sigma = 0.0;
  bool learned = false;
  int cells = 0;
  double conv_pct = 0.0;
  double rmse = 0.0;
  BoxMetrics metrics;
};

struct SweepTable {
  std::vector<SweepCell> cells;  // ordered by (sigma, scenario), learned cells last
  std::vector<SweepRow> rows;
};

// For each sigma the constraint stage runs alone with the perturbed weights; the learned row
// runs the whole pipeline. Demos come from each scenario's truth weights and boxes.
SweepTable perturbation_sweep(const std::vector<Scenario>& scenarios, const SweepConfig& cfg);

// Columns: sigma, conv_pct, rmse, precision, recall, f1, iou.
std::string sweep_csv(const SweepTable& t);
std::string sweep_cells_csv(const SweepTable& t);

}  // namespace ikkt
