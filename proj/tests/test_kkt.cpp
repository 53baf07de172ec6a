#include "doctest.h"

#include "ikkt/demogen.hpp"
#include "ikkt/kkt.hpp"
#include "ikkt/qp.hpp"

#include <random>

using namespace ikkt;

namespace {

Trajectory lqr_demo(int N, const CostWeights& w) {
  auto dyn = LinearDynamics::free_floating(1.0);
  Endpoint ep;
  ep.start = Vec::Zero(4);
  ep.goal = Vec(4);
  ep.goal << 6.0, -2.0, 0.0, 0.0;
  auto res = solve_forward_convex(dyn, ep, {}, w, N);
  REQUIRE(res.status == ForwardStatus::Optimal);
  return res.traj;
}

// Columns of the bundle belonging to theta blocks.
std::vector<int> theta_columns(const UnknownLayout& L) {
  std::vector<int> cols;
  for (const auto& b : L.blocks)
    if (b.kind == BlockKind::ThetaD || b.kind == BlockKind::ThetaS || b.kind == BlockKind::ThetaG)
      for (int i = 0; i < b.size; ++i) cols.push_back(b.offset + i);
  return cols;
}

}  // namespace

TEST_CASE("zero trajectory gives zero expressions") {
  auto dyn = LinearDynamics::free_floating(1.0);
  Trajectory t{Mat::Zero(6, 4), Mat::Zero(5, 2)};
  const std::vector<BoxConstraint> cons = {make_bound(ConstraintTarget::State, {2, 3}, 10.0)};
  auto sel = SelectorVectors::all(1, 0, 1);
  for (int first = 0; first + 2 < 6; ++first) {
    auto b = assemble_stationarity({first, first + 2}, t, cons, sel, dyn);
    CostWeights w{Vec::Constant(4, 0.25), Vec::Constant(2, 3.0)};
    auto m = Multipliers::zeros(6, 4, 4, 0);
    CHECK(b.evaluate(pack_unknowns(b.layout, w, m)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("LQR-optimal demo has near-zero stationarity residual over theta") {
  CostWeights w{Vec::Constant(4, 0.25), Vec::Ones(2)};
  const int N = 15;
  auto t = lqr_demo(N, w);
  auto dyn = LinearDynamics::free_floating(1.0);
  SelectorVectors sel;
  const KktWindow wins[] = {{0, N - 1}, {0, 4}, {5, 9}, {10, N - 1}};
  for (const auto& win : wins) {
    auto b = assemble_stationarity(win, t, {}, sel, dyn);
    auto withq = substitute(b, BlockKind::Q, -1, w.q);
    auto fixed = substitute(withq, BlockKind::R, -1, w.r);
    // Route 1: solve_qp on min ||C th + c||^2 over theta.
    auto p = QuadraticProgram::with_size(fixed.layout.size);
    p.P = 2.0 * fixed.coeffs.transpose() * fixed.coeffs;
    p.q = 2.0 * fixed.coeffs.transpose() * fixed.constant;
    auto s = solve_qp(p);
    REQUIRE(s.status == QpStatus::Optimal);
    const double r1 = fixed.evaluate(s.z).norm();
    CHECK(r1 <= 1e-6);
    // Route 2: orthogonal projection onto the complement of the theta columns.
    const auto cols = theta_columns(b.layout);
    Mat F(b.coeffs.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) F.col(i) = b.coeffs.col(cols[i]);
    Mat K = b.coeffs.leftCols(6);
    Vec qr(6);
    qr << w.q, w.r;
    auto ps = project_out(K, F, b.constant);
    const double r2 = std::sqrt((ps.R * qr + ps.t).squaredNorm() + ps.residual_floor);
    CHECK(r2 <= 1e-6);
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-3).scale(1e-9));
  }
}

TEST_CASE("selector zero removes lambda terms") {
  auto dyn = LinearDynamics::free_floating(1.0);
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  Trajectory t{Mat(8, 4), Mat(7, 2)};
  for (int i = 0; i < t.states.size(); ++i) t.states.data()[i] = g(rng);
  for (int i = 0; i < t.controls.size(); ++i) t.controls.data()[i] = g(rng);
  const std::vector<BoxConstraint> cons = {make_obstacle(0, 0, 1, 1),
                                           make_bound(ConstraintTarget::State, {2, 3}, 10.0),
                                           make_bound(ConstraintTarget::Control, {0, 1}, 5.0)};
  SelectorVectors sel = SelectorVectors::all(2, 1, 1);
  sel.vsx[0] = 0;
  auto b = assemble_stationarity({2, 6}, t, cons, sel, dyn);
  for (int k = 2; k <= 6; ++k) {
    const int off = b.layout.find(BlockKind::LambdaX, k);
    REQUIRE(off >= 0);
    CHECK(b.coeffs.middleCols(off, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.coeffs.middleCols(off + 4, 4).cwiseAbs().maxCoeff() == 1.0);
  }
  sel.vsu[0] = 0;
  auto c = assemble_stationarity({2, 6}, t, cons, sel, dyn);
  for (int k = 2; k <= 6; ++k)
    CHECK(c.coeffs.middleCols(c.layout.find(BlockKind::LambdaU, k), 4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("window layout and boundary multipliers") {
  auto dyn = LinearDynamics::free_floating(1.0);
  Trajectory t{Mat::Zero(10, 4), Mat::Zero(9, 2)};
  SelectorVectors sel;
  auto mid = assemble_stationarity({3, 5}, t, {}, sel, dyn);
  CHECK(mid.layout.find(BlockKind::ThetaS) < 0);
  CHECK(mid.layout.find(BlockKind::ThetaG) < 0);
  CHECK(mid.layout.find(BlockKind::ThetaD, 2) >= 0);
  CHECK(mid.layout.find(BlockKind::ThetaD, 5) >= 0);
  CHECK(mid.coeffs.rows() == 3 * 6);
  auto head = assemble_stationarity({0, 2}, t, {}, sel, dyn);
  CHECK(head.layout.find(BlockKind::ThetaS) >= 0);
  auto tail = assemble_stationarity({7, 9}, t, {}, sel, dyn);
  CHECK(tail.layout.find(BlockKind::ThetaG) >= 0);
  CHECK(tail.layout.find(BlockKind::LambdaU, 9) < 0);
  CHECK(tail.coeffs.rows() == 3 * 4 + 2 * 2);  // no control rows at the last step
  CHECK_THROWS(assemble_stationarity({3, 4}, t, {}, sel, dyn));
  CHECK_THROWS(assemble_stationarity({8, 10}, t, {}, sel, dyn));
}

TEST_CASE("stationarity bundle is linear in the unknowns") {
  auto dyn = LinearDynamics::free_floating(1.0);
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  Trajectory t{Mat(7, 4), Mat(6, 2)};
  for (int i = 0; i < t.states.size(); ++i) t.states.data()[i] = g(rng);
  for (int i = 0; i < t.controls.size(); ++i) t.controls.data()[i] = g(rng);
  const std::vector<BoxConstraint> cons = {make_obstacle(0, 0, 1, 1)};
  auto b = assemble_stationarity({1, 5}, t, cons, SelectorVectors::all(1, 0, 1), dyn);
  Vec z(b.layout.size);
  for (int i = 0; i < z.size(); ++i) z(i) = g(rng);
  const Vec base = b.evaluate(Vec::Zero(z.size()));
  for (double a : {0.5, 2.0, -3.0}) {
    const Vec lhs = b.evaluate(a * z) - base;
    const Vec rhs = a * (b.evaluate(z) - base);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("condition residual examples") {
  // One state, one inclusive bound on dim 0: g = w - 1 for the ub row.
  BoxConstraint c = make_bound(ConstraintTarget::State, {0}, 1.0);
  const std::vector<BoxConstraint> cons = {c};
  auto sel = SelectorVectors::all(1, 0, 1);
  Trajectory t{Mat::Zero(3, 1), Mat::Zero(2, 1)};
  auto m = Multipliers::zeros(3, 1, 2, 0);
  auto r = condition_residuals(t, cons, sel, m);
  CHECK(r.pf == 0.0);
  CHECK(r.df == 0.0);
  CHECK(r.cs == 0.0);

  t.states(1, 0) = 1.0;  // ub row active
  m.lambda_x[1](1) = 3.0;
  r = condition_residuals(t, cons, sel, m);
  CHECK(r.cs == 0.0);
  CHECK(r.df == 0.0);

  t.states(1, 0) = 0.0;  // g = -1 on the ub row
  m.lambda_x[1](1) = 2.0;
  r = condition_residuals(t, cons, sel, m);
  CHECK(r.cs == doctest::Approx(2.0));

  m.lambda_x[1](1) = -0.5;
  r = condition_residuals(t, cons, sel, m);
  CHECK(r.df == doctest::Approx(0.5));

  t.states(2, 0) = 1.25;
  r = condition_residuals(t, cons, sel, m);
  CHECK(r.pf == doctest::Approx(0.25));
  sel.vpx[0] = 0;
  CHECK(condition_residuals(t, cons, sel, m).pf == 0.0);
}

TEST_CASE("exclusive primal feasibility is penetration depth") {
  const std::vector<BoxConstraint> cons = {make_obstacle(0, 0, 4, 4)};
  auto sel = SelectorVectors::all(1, 0, 1);
  Trajectory t{Mat::Zero(3, 4), Mat::Zero(2, 2)};
  t.states.row(0) << -1, 2, 0, 0;
  t.states.row(1) << 1, 2, 0, 0;
  t.states.row(2) << 5, 2, 0, 0;
  auto m = Multipliers::zeros(3, 4, 4, 0);
  CHECK(condition_residuals(t, cons, sel, m).pf == doctest::Approx(1.0));
}
