#include "doctest.h"

#include "ikkt/costlearn.hpp"
#include "ikkt/demogen.hpp"
#include "ikkt/errors.hpp"
#include "ikkt/evalmetrics.hpp"

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

}  // namespace

TEST_CASE("contiguous runs") {
  auto r = contiguous_runs({7, 0, 1, 2, 5, 6, 9});
  REQUIRE(r.size() == 3);
  CHECK(r[0].first == 0);
  CHECK(r[0].last == 2);
  CHECK(r[1].first == 5);
  CHECK(r[1].last == 7);
  CHECK(r[2].first == 9);
  CHECK(contiguous_runs({}).empty());
}

TEST_CASE("single unconstrained demo recovers uniform q") {
  auto dyn = LinearDynamics::free_floating(1.0);
  CostWeights w{Vec::Constant(4, 0.25), Vec::Constant(2, 3.0)};
  Endpoint ep{Vec::Zero(4), Vec(4)};
  ep.goal << 30, -12, 0, 0;
  auto t = solve_forward_convex(dyn, ep, {}, w, 30).traj;
  auto seg = segment_demonstrations({t}, {}, dyn);
  REQUIRE(seg.demos[0].active.empty());
  auto est = extract_cost({t}, seg, {}, dyn);
  CHECK(cost_rmse(w, est, dyn.axis_map) <= 1e-6);
  CHECK(std::abs(est.q.sum() - 1.0) <= 1e-9);
  CHECK(check_weights(est).empty());
}

TEST_CASE("scenario a learned cost and duplicate invariance") {
  auto d = scenario_demos("a");
  const auto& dyn = d.s.dynamics;
  auto seg = segment_demonstrations(d.trajs, d.s.known_constraints, dyn);
  CostReport rep;
  auto est = extract_cost(d.trajs, seg, d.s.known_constraints, dyn, {}, &rep);
  const auto& truth = *d.s.weights_truth;
  const Vec yt = y_vector(truth, dyn.axis_map), ye = y_vector(est, dyn.axis_map);
  CHECK(((ye - yt).cwiseQuotient(yt)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rep.runs >= 4);

  auto trajs2 = d.trajs;
  trajs2.push_back(d.trajs[0]);
  auto seg2 = seg;
  seg2.demos.push_back(seg.demos[0]);
  auto est2 = extract_cost(trajs2, seg2, d.s.known_constraints, dyn);
  CHECK((y_vector(est2, dyn.axis_map) - ye).cwiseQuotient(ye).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((est2.q - est.q).cwiseAbs().maxCoeff() <= 1e-8);

  // The recovered weights reproduce the demonstrations.
  for (size_t e = 0; e < d.trajs.size(); ++e) {
    auto again = solve_forward(d.s, static_cast<int>(e), est, d.s.horizon);
    CHECK((again.traj.states - d.trajs[e].states).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("demo without an inactive run is rejected") {
  auto dyn = LinearDynamics::free_floating(1.0);
  Trajectory t{Mat::Random(6, 4), Mat::Random(5, 2)};
  Segmentation seg;
  seg.demos.resize(1);
  seg.demos[0].active = {0, 1, 3, 4};
  seg.demos[0].inactive = {2, 5};
  CHECK_THROWS_AS(extract_cost({t}, seg, {}, dyn), InsufficientInactiveData);
}
