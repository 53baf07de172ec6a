#pragma once

#include "ikkt/qp.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace ikkt {

struct MixedBinaryProgram {
  QuadraticProgram base;
  std::vector<int> binary_indices;
  // Each group requires the sum of its binaries to be at least one.
  std::vector<std::vector<int>> cardinality_groups;
};

enum class MipStatus { Optimal, Infeasible, GapLimit, TimeLimit };
const char* to_string(MipStatus s);

struct MipConfig {
  double abs_gap = 1e-6;
  long max_nodes = 200000;
  double time_limit = 0.0;  // seconds, 0 disables
  int threads = 1;
  double int_tol = 1e-7;
  SolverConfig qp;
  // Optional starting incumbent; only its binary values are used.
  std::optional<Vec> incumbent;
  bool record_bounds = false;
  // A valid lower bound on the objective known in advance; seeds the root bound.
  double objective_floor = -std::numeric_limits<double>::infinity();
};

struct MipSolution {
  MipStatus status = MipStatus::Infeasible;
  bool has_incumbent = false;
  Vec z;
  double objective = 0.0;
  std::vector<int> binaries;
  double best_bound = 0.0;
  double bound_gap = 0.0;
  long nodes = 0;
  long failed_nodes = 0;
  double seconds = 0.0;
  std::vector<double> bound_history;
};

MipSolution solve_mip(const MixedBinaryProgram& p, const MipConfig& cfg = {});

// Thread count from IKKT_THREADS, else hardware concurrency.
int default_threads();

}  // namespace ikkt
