#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ikkt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct LinearDynamics {
  Mat A;
  Mat B;
  double dt = 1.0;
  // axis_map[i] is the control dimension actuating state dimension i.
  std::vector<int> axis_map;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }

  // Point masses on `axes` independent axes; x = (p_1..p_a, v_1..v_a), u = (a_1..a_a).
  static LinearDynamics free_floating(double dt, int axes = 2);
};

// Fills axis_map from the largest |B| entry of each row when it is empty.
void derive_axis_map(LinearDynamics& dyn);

struct Trajectory {
  Mat states;    // N x nx
  Mat controls;  // (N-1) x nu

  int length() const { return static_cast<int>(states.rows()); }
  Vec x(int k) const { return states.row(k).transpose(); }
  Vec u(int k) const { return controls.row(k).transpose(); }
};

struct CostWeights {
  Vec q;
  Vec r;
};

inline constexpr double kDefaultRMin = 1e-8;

// Empty string when the weights are valid.
std::string check_weights(const CostWeights& w, double r_min = kDefaultRMin);

enum class ConstraintKind { Inclusive, Exclusive };
enum class ConstraintTarget { State, Control };

struct BoxConstraint {
  ConstraintKind kind = ConstraintKind::Exclusive;
  ConstraintTarget target = ConstraintTarget::State;
  std::vector<int> dims;
  Vec lb;
  Vec ub;

  int nw() const { return static_cast<int>(dims.size()); }
  // Rows per step: lb side for every dim, then ub side.
  int rows() const { return 2 * nw(); }

  // Row values at vector w (a full state or control). Inclusive rows are feasible when <= 0;
  // exclusive rows are all positive exactly when w is strictly inside.
  Vec row_values(const Vec& w) const;
  // Gradient sign of row r with respect to w(dims[r % nw]).
  double row_sign(int r) const;
  bool strictly_inside(const Vec& w, double margin = 0.0) const;
  double area() const;
};

BoxConstraint make_obstacle(double x0, double y0, double x1, double y1);
BoxConstraint make_bound(ConstraintTarget target, std::vector<int> dims, double limit);

struct SelectorVectors {
  std::vector<int> vpx, vpu, vsx, vsu;

  std::vector<int> vdx() const;
  std::vector<int> vdu() const;
  static SelectorVectors all(int ncx, int ncu, int value);
};

struct ConstraintSet {
  std::vector<BoxConstraint> state;
  std::vector<BoxConstraint> control;

  int state_rows() const;
  int control_rows() const;
  static ConstraintSet split(const std::vector<BoxConstraint>& boxes);
};

struct Endpoint {
  Vec start;
  Vec goal;
};

struct Scenario {
  std::string name;
  LinearDynamics dynamics;
  std::vector<BoxConstraint> known_constraints;
  std::vector<BoxConstraint> unknown_constraints_truth;
  std::vector<Endpoint> endpoints;
  int horizon = 50;
  std::optional<CostWeights> weights_truth;
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

ValidationReport validate_scenario(const Scenario& s);
std::string check_trajectory(const Trajectory& t, const LinearDynamics& dyn);

}  // namespace ikkt
