#pragma once

#include "ikkt/mip.hpp"
#include "ikkt/model.hpp"
#include "ikkt/segmenter.hpp"

#include <vector>

namespace ikkt {

MipConfig default_constraint_mip();

struct ConstraintLearnConfig {
  int n_b = 1;
  double big_m = 0.0;  // 0 selects 10 x max |coordinate|
  double epsilon = -1e-6;
  std::vector<int> dims{0, 1};
  // Weight of sum(ub - lb); collapses faces no data supports.
  double regularizer = 1e-9;
  double lambda_big_m = 0.0;  // 0 selects 10 x the largest multiplier of the free fit
  double active_tol = 1e-7;   // known-constraint rows
  // Starting assignment: free-fit multipliers above this fraction of the largest count as contacts.
  double contact_tol = 1e-3;
  int max_pf_rounds = 25;
  SegmentConfig segment;  // candidate steps when no segmentation is supplied
  MipConfig mip = default_constraint_mip();
};

// Throws ConfigError.
void validate_config(const ConstraintLearnConfig& cfg);

struct PfPair {
  int demo = 0;
  int step = 0;
  int box = 0;
  bool operator==(const PfPair&) const = default;
};

// Which steps carry box multipliers and which demo points carry an explicit outside disjunction.
struct ProgramScope {
  std::vector<std::vector<int>> candidates;  // per demo, ascending
  std::vector<PfPair> pf;

  // Every step a candidate and every (point, box) pair disjunctive.
  static ProgramScope full(const std::vector<Trajectory>& trajs, int n_b);
};

struct ContactVars {
  int demo = 0;
  int step = 0;
  int face = 0;    // lb faces 0..nd-1, then ub faces
  int lambda = 0;  // aggregated multiplier over boxes
  std::vector<int> a;  // activity binary per box
};

struct ConstraintProgram {
  MixedBinaryProgram mip;
  int n_b = 0;
  int nd = 0;
  std::vector<int> dims;
  // Box b, dim i: lb at lb_index(b, i), ub at ub_index(b, i).
  int lb_index(int b, int i) const { return b * nd + i; }
  int ub_index(int b, int i) const { return (n_b + b) * nd + i; }
  std::vector<ContactVars> contacts;
  std::vector<std::vector<int>> pf_binaries;  // per scope.pf entry, one per face
  std::vector<int> known_lambda;              // all known-constraint multipliers kept
  // Multiplier columns are stored divided by this.
  double lambda_scale = 1.0;
  // QP objective + constant = sum ||stationarity||^2 + regularizer term.
  double constant = 0.0;
  // Valid lower bound of the QP objective.
  double floor = 0.0;
  double big_m = 0.0;
  double lambda_big_m = 0.0;
  double eps_geo = 0.0;
};

// The whole program when scope is null.
ConstraintProgram build_constraint_program(const std::vector<Trajectory>& trajs,
                                           const CostWeights& weights,
                                           const std::vector<BoxConstraint>& known,
                                           const LinearDynamics& dyn,
                                           const ConstraintLearnConfig& cfg,
                                           const ProgramScope* scope = nullptr);

// Boxes encoded in a solution vector of the program.
std::vector<BoxConstraint> decode_boxes(const ConstraintProgram& prog, const Vec& z);

struct ConstraintReport {
  MipStatus status = MipStatus::Infeasible;
  bool converged = false;
  double objective = 0.0;  // squared residual plus regularizer
  int rounds = 0;
  long nodes = 0;
  double seconds = 0.0;
  std::vector<int> supported;  // active contacts per box
};

// Candidate steps come from seg (computed with cfg.segment when null). Demo points are made
// disjunctive lazily until no point lies strictly inside a recovered box.
std::vector<BoxConstraint> extract_constraints(const std::vector<Trajectory>& trajs,
                                               const CostWeights& weights,
                                               const std::vector<BoxConstraint>& known,
                                               const LinearDynamics& dyn,
                                               const ConstraintLearnConfig& cfg = {},
                                               const Segmentation* seg = nullptr,
                                               ConstraintReport* report = nullptr);

std::vector<BoxConstraint> merge_boxes(const std::vector<BoxConstraint>& boxes);

}  // namespace ikkt
