#pragma once

#include "ikkt/model.hpp"

#include <vector>

namespace ikkt {

enum class BlockKind { Q, R, LambdaX, LambdaU, ThetaD, ThetaS, ThetaG };

struct UnknownBlock {
  BlockKind kind;
  int step;  // time index, -1 for q, r, theta_s, theta_g
  int offset;
  int size;
};

struct UnknownLayout {
  std::vector<UnknownBlock> blocks;
  int size = 0;

  void add(BlockKind kind, int step, int size);
  // Offset of the block, or -1 when absent.
  int find(BlockKind kind, int step = -1) const;
};

struct ExprTag {
  bool control = false;  // dL/du when true, dL/dx otherwise
  int step = 0;
  int dim = 0;
};

// Expressions e = coeffs * unknowns + constant.
struct LinearExprBundle {
  Mat coeffs;
  Vec constant;
  std::vector<ExprTag> tags;
  UnknownLayout layout;

  Vec evaluate(const Vec& unknowns) const { return coeffs * unknowns + constant; }
};

// Inclusive state-index range [first, last] of one trajectory.
struct KktWindow {
  int first = 0;
  int last = 0;
  bool is_start() const { return first == 0; }
  bool is_goal(int N) const { return last == N - 1; }
};

struct Multipliers {
  std::vector<Vec> lambda_x;  // per state, rows of all state constraints
  std::vector<Vec> lambda_u;  // per control, rows of all control constraints
  std::vector<Vec> theta_d;   // per transition k -> k+1
  Vec theta_s;
  Vec theta_g;

  static Multipliers zeros(int N, int nx, int ncx_rows, int ncu_rows);
};

struct ConditionResiduals {
  double pf = 0.0;
  double df = 0.0;
  double cs = 0.0;
};

// Stacked row values or gradient signs of all constraints of a set.
Vec constraint_rows(const std::vector<BoxConstraint>& cs, const Vec& w);

// Builds dL/dx(k) and dL/du(k) for every step of the window. Multipliers of every
// transition touching the window enter as unknowns; theta_s only at the start, theta_g only
// at the goal. Constraint terms appear only for constraints whose vsx/vsu entry is 1.
LinearExprBundle assemble_stationarity(const KktWindow& w, const Trajectory& traj,
                                       const std::vector<BoxConstraint>& constraints,
                                       const SelectorVectors& sel, const LinearDynamics& dyn);

ConditionResiduals condition_residuals(const Trajectory& traj,
                                       const std::vector<BoxConstraint>& constraints,
                                       const SelectorVectors& sel, const Multipliers& mult);

// Unknown vector for a layout given weights and multipliers.
Vec pack_unknowns(const UnknownLayout& layout, const CostWeights& w, const Multipliers& m);

// Max-norm of the whole-trajectory stationarity expressions.
double stationarity_residual(const Trajectory& traj, const std::vector<BoxConstraint>& constraints,
                             const SelectorVectors& sel, const LinearDynamics& dyn,
                             const CostWeights& w, const Multipliers& m);

// Moves the given block columns into the constant term using the supplied values.
LinearExprBundle substitute(const LinearExprBundle& b, BlockKind kind, int step, const Vec& values);

// Reduced least-squares data after eliminating free columns by orthogonal projection:
// min over free of ||C_keep a + C_free f + c|| equals ||R a + t|| for the returned (R, t).
struct ProjectedSystem {
  Mat R;
  Vec t;
  double residual_floor = 0.0;  // part of ||.||^2 independent of the kept unknowns
};
ProjectedSystem project_out(const Mat& keep, const Mat& free, const Vec& constant);

// Least-squares values of free columns given the kept unknowns.
Vec recover_free(const Mat& keep, const Mat& free, const Vec& constant, const Vec& kept_values);

}  // namespace ikkt
