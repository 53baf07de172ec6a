#pragma once

#include "ikkt/model.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace ikkt {

// minimize 0.5 z'Pz + q'z  s.t.  Aeq z = beq,  Gin z <= hin,  lo <= z <= hi.
// lo/hi may be empty (unbounded) or hold +-inf entries.
struct QuadraticProgram {
  Mat P;
  Vec q;
  Mat Aeq;
  Vec beq;
  Mat Gin;
  Vec hin;
  Vec lo;
  Vec hi;

  int n() const { return static_cast<int>(q.size()); }
  // Allocates empty constraint blocks and infinite bounds for n variables.
  static QuadraticProgram with_size(int n);
  // Empty string when dimensions and symmetry are consistent.
  std::string check() const;
  double objective(const Vec& z) const { return 0.5 * z.dot(P * z) + q.dot(z); }
};

enum class QpStatus { Optimal, Infeasible, Unbounded, IterLimit };
const char* to_string(QpStatus s);

struct SolverConfig {
  double tol_feas = 1e-8;
  double tol_stat = 1e-8;
  double tol_comp = 1e-8;
  int max_iters = 0;  // 0 selects a size-based default
  // IterLimit is returned once this passes; a default-constructed value disables it.
  std::chrono::steady_clock::time_point deadline{};
};

// Working-set description reusable as a warm start.
struct QpBasis {
  std::vector<int> rows;    // active Gin rows
  std::vector<int> at_lo;   // variables fixed at lo
  std::vector<int> at_hi;   // variables fixed at hi
};

struct QpSolution {
  QpStatus status = QpStatus::IterLimit;
  Vec z;
  double objective = 0.0;
  Vec eq_multipliers;
  Vec ineq_multipliers;
  // Signed: positive when the upper bound is active, negative for the lower bound.
  Vec bound_multipliers;
  int iterations = 0;
  QpBasis basis;
};

struct KktResiduals {
  double primal = 0.0;
  double stationarity = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
};

QpSolution solve_qp(const QuadraticProgram& p, const SolverConfig& cfg = {},
                    const Vec* warm_z = nullptr, const QpBasis* warm_basis = nullptr);

KktResiduals kkt_residuals(const QuadraticProgram& p, const QpSolution& s);

}  // namespace ikkt
