#include "doctest.h"

#include "ikkt/demogen.hpp"
#include "ikkt/errors.hpp"
#include "ikkt/evalmetrics.hpp"

#include <random>
#include <set>

using namespace ikkt;

namespace {

// Coordinate-compression area: sum the grid cells covered by any box.
double grid_area(const std::vector<BoxConstraint>& boxes) {
  std::set<double> xs, ys;
  for (const auto& b : boxes) {
    xs.insert(b.lb(0));
    xs.insert(b.ub(0));
    ys.insert(b.lb(1));
    ys.insert(b.ub(1));
  }
  const std::vector<double> X(xs.begin(), xs.end()), Y(ys.begin(), ys.end());
  double area = 0.0;
  for (size_t i = 0; i + 1 < X.size(); ++i)
    for (size_t j = 0; j + 1 < Y.size(); ++j) {
      const double cx = 0.5 * (X[i] + X[i + 1]), cy = 0.5 * (Y[j] + Y[j + 1]);
      for (const auto& b : boxes)
        if (cx > b.lb(0) && cx < b.ub(0) && cy > b.lb(1) && cy < b.ub(1)) {
          area += (X[i + 1] - X[i]) * (Y[j + 1] - Y[j]);
          break;
        }
    }
  return area;
}

std::vector<BoxConstraint> random_boxes(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> pos(0.0, 20.0), len(0.5, 8.0);
  std::vector<BoxConstraint> out;
  for (int i = 0; i < n; ++i) {
    const double x = pos(rng), y = pos(rng);
    out.push_back(make_obstacle(x, y, x + len(rng), y + len(rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("cost_rmse") {
  CostWeights w{Vec::Constant(4, 0.25), Vec::Ones(2)};
  const std::vector<int> axis{0, 1, 0, 1};
  CHECK(cost_rmse(w, w, axis) == 0.0);
  CHECK(cost_rmse(w, perturb_weights(w, 0.01), axis) == doctest::Approx(std::sqrt(2e-4 / 4.0)));
  CHECK(cost_rmse(w, perturb_weights(w, 0.01), axis) == doctest::Approx(0.00707).epsilon(1e-3));
  const auto p = perturb_weights(w, 0.01);
  CHECK(p.q(2) == w.q(2));
  CHECK(p.r(0) == w.r(0));
  CHECK_THROWS(cost_rmse(w, w, {0, 1}));
}

TEST_CASE("box metrics examples") {
  const auto truth = make_obstacle(40, 40, 60, 60);
  auto m = box_metrics({make_obstacle(39.08, 40, 60, 60)}, {truth});
  CHECK(m.precision == doctest::Approx(400.0 / 418.4));
  CHECK(m.recall == doctest::Approx(1.0));
  CHECK(m.iou == doctest::Approx(0.956).epsilon(5e-4));

  m = box_metrics({truth}, {truth});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.iou == 1.0);

  m = box_metrics({make_obstacle(0, 0, 1, 1)}, {truth});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.iou == 0.0);

  const auto flat = make_obstacle(10, 10, 10, 12);
  m = box_metrics({flat}, {truth});
  CHECK(m.precision == 0.0);
  CHECK(m.iou == 0.0);
  m = box_metrics({flat}, {make_obstacle(3, 3, 5, 3)});
  CHECK(m.iou == 1.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("union area matches the grid oracle") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto boxes = random_boxes(rng, 1 + trial % 5);
    CHECK(union_area(boxes) == doctest::Approx(grid_area(boxes)).epsilon(1e-10));
  }
}

TEST_CASE("metric properties") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto P = random_boxes(rng, 1 + trial % 3), T = random_boxes(rng, 1 + trial % 4);
    const auto a = box_metrics(P, T), b = box_metrics(T, P);
    CHECK(a.iou == doctest::Approx(b.iou));
    CHECK(a.precision == doctest::Approx(b.recall));
    CHECK(a.recall == doctest::Approx(b.precision));
    for (double v : {a.precision, a.recall, a.f1, a.iou}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    if (a.precision * a.recall == 0.0) CHECK(a.f1 == 0.0);
    std::vector<BoxConstraint> both = P;
    both.insert(both.end(), T.begin(), T.end());
    const double inter = union_area(P) + union_area(T) - grid_area(both);
    CHECK(a.iou == doctest::Approx(inter / grid_area(both)).epsilon(1e-9));
  }
}

TEST_CASE("sweep configuration checks") {
  SweepConfig c;
  CHECK_NOTHROW(validate_sweep(c));
  c.time_limit = 0.0;
  CHECK_THROWS_AS(validate_sweep(c), ConfigError);
  c = {};
  c.sigmas.push_back(std::nan(""));
  CHECK_THROWS_AS(validate_sweep(c), ConfigError);
  c = {};
  c.scenarios = {"nope"};
  CHECK_THROWS_AS(perturbation_sweep({builtin_scenario("a")}, c), ConfigError);
}

TEST_CASE("small sweep on scenario a") {
  SweepConfig c;
  c.sigmas = {0.0, 0.02};
  c.time_limit = 60.0;
  c.threads = 3;
  const auto t = perturbation_sweep({builtin_scenario("a")}, c);
  REQUIRE(t.rows.size() == 3);
  REQUIRE(t.cells.size() == 3);
  CHECK(t.rows[0].sigma == 0.0);
  CHECK(t.rows[1].sigma == 0.02);
  CHECK(t.rows[2].learned);
  CHECK(t.rows[0].conv_pct == 100.0);
  CHECK(t.rows[0].rmse == 0.0);
  CHECK(t.rows[0].metrics.iou >= 0.9);
  CHECK(t.rows[1].rmse == doctest::Approx(0.02 / std::sqrt(2.0) / 1e5));
  CHECK(t.rows[2].rmse <= 1e-5);
  CHECK(std::abs(t.rows[2].metrics.iou - t.rows[0].metrics.iou) <= 0.02);

  const auto csv = sweep_csv(t);
  CHECK(csv.rfind("sigma,conv_pct,rmse,precision,recall,f1,iou\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("\nlearned,") != std::string::npos);
  const auto cells = sweep_cells_csv(t);
  CHECK(std::count(cells.begin(), cells.end(), '\n') == 4);
}
