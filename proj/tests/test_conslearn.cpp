#include "doctest.h"

#include "ikkt/conslearn.hpp"
#include "ikkt/demogen.hpp"
#include "ikkt/errors.hpp"
#include "ikkt/evalmetrics.hpp"
#include "ikkt/kkt.hpp"

#include <random>

using namespace ikkt;

namespace {

struct Demos {
  Scenario s;
  std::vector<Trajectory> trajs;
};

Demos scenario_demos(const std::string& name) {
  Demos d{builtin_scenario(name), {}};
  for (size_t e = 0; e < d.s.endpoints.size(); ++e)
    d.trajs.push_back(solve_forward(d.s, static_cast<int>(e), *d.s.weights_truth, d.s.horizon).traj);
  return d;
}

ConstraintLearnConfig config_for(const Scenario& s) {
  ConstraintLearnConfig c;
  c.n_b = static_cast<int>(s.unknown_constraints_truth.size());
  return c;
}

// Distance from p to the segment of edge f (lb faces first) of a 2-D box.
double edge_distance(const BoxConstraint& b, int f, const Vec& p) {
  const int i = f % 2, o = 1 - i;
  const double line = f < 2 ? b.lb(i) : b.ub(i);
  const double along = std::clamp(p(o), b.lb(o), b.ub(o));
  return std::hypot(p(i) - line, p(o) - along);
}

}  // namespace

TEST_CASE("configuration checks") {
  ConstraintLearnConfig c;
  CHECK_NOTHROW(validate_config(c));
  c.epsilon = 0.0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.epsilon = -0.01;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.n_b = -1;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.dims.clear();
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  auto d = scenario_demos("a");
  c = config_for(d.s);
  c.big_m = 100.0;  // coordinates reach 70 > big_m / 2
  CHECK_THROWS_AS(build_constraint_program(d.trajs, *d.s.weights_truth, d.s.known_constraints,
                                           d.s.dynamics, c),
                  ConfigError);
}

TEST_CASE("no boxes: program minimum equals the direct stationarity residual") {
  auto d = scenario_demos("a");
  const auto w = perturb_weights(*d.s.weights_truth, 0.02);
  ConstraintLearnConfig c;
  c.n_b = 0;
  const auto prog = build_constraint_program(d.trajs, w, d.s.known_constraints, d.s.dynamics, c);
  CHECK(prog.mip.binary_indices.empty());
  const auto s = solve_qp(prog.mip.base);
  REQUIRE(s.status == QpStatus::Optimal);
  const double via_program = s.objective + prog.constant;

  // Direct route: every demo, theta and active known multipliers as QP unknowns, no projection.
  double direct = 0.0;
  const auto ks = ConstraintSet::split(d.s.known_constraints);
  for (const auto& t : d.trajs) {
    const auto sel = SelectorVectors::all(static_cast<int>(ks.state.size()),
                                          static_cast<int>(ks.control.size()), 1);
    auto b = assemble_stationarity({0, t.length() - 1}, t, d.s.known_constraints, sel, d.s.dynamics);
    b = substitute(b, BlockKind::Q, -1, w.q);
    b = substitute(b, BlockKind::R, -1, w.r);
    std::vector<int> cols, nonneg;
    for (const auto& blk : b.layout.blocks) {
      const bool ctl = blk.kind == BlockKind::LambdaU;
      if (blk.kind == BlockKind::LambdaX || ctl) {
        const Vec g = ctl ? constraint_rows(ks.control, t.u(blk.step))
                          : constraint_rows(ks.state, t.x(blk.step));
        for (int r = 0; r < blk.size; ++r)
          if (std::abs(g(r)) <= 1e-7) {
            nonneg.push_back(static_cast<int>(cols.size()));
            cols.push_back(blk.offset + r);
          }
      } else {
        for (int i = 0; i < blk.size; ++i) cols.push_back(blk.offset + i);
      }
    }
    Mat K(b.coeffs.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) K.col(i) = b.coeffs.col(cols[i]);
    auto qp = QuadraticProgram::with_size(static_cast<int>(cols.size()));
    qp.P = 2.0 * K.transpose() * K;
    qp.q = 2.0 * K.transpose() * b.constant;
    for (int i : nonneg) qp.lo(i) = 0.0;
    const auto r = solve_qp(qp);
    REQUIRE(r.status == QpStatus::Optimal);
    direct += (K * r.z + b.constant).squaredNorm();
  }
  CHECK(direct > 1.0);
  CHECK(via_program == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("scenario a: box recovered within one unit per edge") {
  auto d = scenario_demos("a");
  auto c = config_for(d.s);
  ConstraintReport rep;
  const auto boxes = extract_constraints(d.trajs, *d.s.weights_truth, d.s.known_constraints,
                                         d.s.dynamics, c, nullptr, &rep);
  CHECK(rep.converged);
  CHECK(rep.status == MipStatus::Optimal);
  REQUIRE(boxes.size() == 1);
  const auto& t = d.s.unknown_constraints_truth[0];
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(boxes[0].lb(i) - t.lb(i)) <= 1.0);
    CHECK(std::abs(boxes[0].ub(i) - t.ub(i)) <= 1.0);
  }
  CHECK(boxes[0].kind == ConstraintKind::Exclusive);
  CHECK(rep.objective < 1e-6);

  SUBCASE("forward re-solve with the recovered box reproduces the demos") {
    Scenario s = d.s;
    s.unknown_constraints_truth = boxes;
    double dev = 0.0;
    for (size_t e = 0; e < s.endpoints.size(); ++e) {
      const auto f = solve_forward(s, static_cast<int>(e), *s.weights_truth, s.horizon);
      dev = std::max(dev, (f.traj.states.leftCols(2) - d.trajs[e].states.leftCols(2))
                              .cwiseAbs().maxCoeff());
    }
    CHECK(dev <= 0.05 * std::hypot(100.0, 100.0));
  }
}

TEST_CASE("recovered boxes: primal feasibility and edge support") {
  for (const char* name : {"b", "e"}) {
    CAPTURE(name);
    auto d = scenario_demos(name);
    auto c = config_for(d.s);
    ConstraintReport rep;
    const auto boxes = extract_constraints(d.trajs, *d.s.weights_truth, d.s.known_constraints,
                                           d.s.dynamics, c, nullptr, &rep);
    CHECK(rep.converged);
    const double eps_geo = std::abs(c.epsilon) * 100.0;
    for (size_t b = 0; b < boxes.size(); ++b) {
      for (const auto& t : d.trajs)
        for (int k = 0; k < t.length(); ++k) CHECK_FALSE(boxes[b].strictly_inside(t.x(k), 1e-7));
      if (rep.supported[b] == 0) continue;
      for (int f = 0; f < 4; ++f) {
        double best = 1e300;
        for (const auto& t : d.trajs)
          for (int k = 0; k < t.length(); ++k) best = std::min(best, edge_distance(boxes[b], f, t.x(k)));
        CHECK(best <= eps_geo + 1e-9);
      }
    }
  }
}

TEST_CASE("demo far from every obstacle gives a zero-area box outside the hull") {
  auto dyn = LinearDynamics::free_floating(1.0);
  Vec x0(4), xg(4);
  x0 << 10, 10, 0, 0;
  xg << 16, 12, 0, 0;
  CostWeights w{Vec::Constant(4, 0.25), Vec::Constant(2, 1.0)};
  const auto f = solve_forward_convex(dyn, {x0, xg}, {}, w, 5);
  REQUIRE(f.status == ForwardStatus::Optimal);
  ConstraintLearnConfig c;
  c.n_b = 1;

  SUBCASE("whole program by branch and bound") {
    const auto prog = build_constraint_program({f.traj}, w, {}, dyn, c);
    // Contact binaries on the three interior steps, disjunction binaries on all five.
    CHECK(prog.mip.binary_indices.size() == 3 * 4 + 5 * 4);
    MipConfig mc;
    mc.objective_floor = prog.floor;
    const auto s = solve_mip(prog.mip, mc);
    REQUIRE(s.status == MipStatus::Optimal);
    CHECK(s.objective + prog.constant <= 1e-6);
    for (const auto& cv : prog.contacts) CHECK(s.z(cv.lambda) <= 1e-8);
  }
  SUBCASE("extraction") {
    ConstraintReport rep;
    const auto boxes = extract_constraints({f.traj}, w, {}, dyn, c, nullptr, &rep);
    REQUIRE(boxes.size() == 1);
    CHECK(rep.supported[0] == 0);
    CHECK(boxes[0].area() == 0.0);
    for (int i = 0; i < 2; ++i) CHECK(boxes[0].ub(i) < f.traj.states.col(i).minCoeff());
  }
}

TEST_CASE("extraction is independent of the thread count") {
  auto d = scenario_demos("e");
  auto c = config_for(d.s);
  const auto b1 = extract_constraints(d.trajs, *d.s.weights_truth, d.s.known_constraints,
                                      d.s.dynamics, c);
  c.mip.threads = 3;
  c.segment.threads = 3;
  const auto b3 = extract_constraints(d.trajs, *d.s.weights_truth, d.s.known_constraints,
                                      d.s.dynamics, c);
  REQUIRE(b1.size() == b3.size());
  for (size_t i = 0; i < b1.size(); ++i) {
    CHECK((b1[i].lb - b3[i].lb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b1[i].ub - b3[i].ub).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("merge_boxes examples") {
  auto nested = merge_boxes({make_obstacle(40, 40, 60, 60), make_obstacle(45, 45, 55, 55)});
  REQUIRE(nested.size() == 1);
  CHECK(nested[0].lb(0) == 40);
  CHECK(nested[0].ub(1) == 60);

  auto disjoint = merge_boxes({make_obstacle(0, 0, 1, 1), make_obstacle(2, 2, 3, 3)});
  REQUIRE(disjoint.size() == 2);
  CHECK(disjoint[1].lb(0) == 2);

  auto joined = merge_boxes({make_obstacle(0, 0, 2, 2), make_obstacle(1, 0, 3, 2)});
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].lb(0) == 0);
  CHECK(joined[0].ub(0) == 3);
  CHECK(joined[0].lb(1) == 0);
  CHECK(joined[0].ub(1) == 2);

  CHECK(merge_boxes({}).empty());
}

TEST_CASE("merge_boxes preserves the union and leaves no overlap") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pos(0, 20), len(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BoxConstraint> in;
    const int n = 1 + trial % 4;
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      in.push_back(make_obstacle(x, y, x + len(rng), y + len(rng)));
    }
    const auto out = merge_boxes(in);
    CHECK(union_area(out) == doctest::Approx(union_area(in)));
    double sum = 0.0;
    for (const auto& b : out) sum += b.area();
    CHECK(sum == doctest::Approx(union_area(in)));
  }
}
