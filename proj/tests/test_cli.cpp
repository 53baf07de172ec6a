#include "doctest.h"

#include "ikkt/demogen.hpp"
#include "ikkt/errors.hpp"
#include "ikkt/evalmetrics.hpp"
#include "ikkt/io.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>

using namespace ikkt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ikkt_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run miner(const std::string& args, const std::string& env = {}) {
  const auto dir = scratch("_run");
  const std::string cmd = env + (env.empty() ? "" : " ") + IKKT_MINER_PATH + " -q " + args + " > " +
                          (dir / "out").string() + " 2> " + (dir / "err").string();
  const int st = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = read_text(dir / "out");
  r.err = read_text(dir / "err");
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("json round trips") {
  for (const auto& s : builtin_scenarios()) {
    const auto j = scenario_to_json(s);
    const auto back = scenario_from_json(Json::parse(j.dump()));
    CHECK(scenario_to_json(back).dump() == j.dump());
    CHECK(back.name == s.name);
    REQUIRE(back.unknown_constraints_truth.size() == s.unknown_constraints_truth.size());
    for (size_t b = 0; b < s.unknown_constraints_truth.size(); ++b) {
      CHECK(back.unknown_constraints_truth[b].lb == s.unknown_constraints_truth[b].lb);
      CHECK(back.unknown_constraints_truth[b].ub == s.unknown_constraints_truth[b].ub);
    }
    CHECK((back.dynamics.A - s.dynamics.A).norm() == 0.0);
    CHECK(back.dynamics.axis_map == s.dynamics.axis_map);
    CHECK(back.weights_truth->r == s.weights_truth->r);
  }
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<BoxConstraint> boxes;
  for (int i = 0; i < 20; ++i) {
    const double a = u(rng), b = u(rng);
    boxes.push_back(make_obstacle(std::min(a, b), u(rng), std::max(a, b), 1e3 + u(rng)));
  }
  boxes.push_back(make_bound(ConstraintTarget::Control, {0, 1}, INFINITY));
  const auto back = boxes_from_json(Json::parse(boxes_to_json(boxes).dump()));
  REQUIRE(back.size() == boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) {
    CHECK(back[i].lb == boxes[i].lb);
    CHECK(back[i].ub == boxes[i].ub);
    CHECK(back[i].kind == boxes[i].kind);
    CHECK(back[i].target == boxes[i].target);
  }
  const CostWeights w{Vec{{0.1, 0.2, 0.3 + 1e-17, 0.4}}, Vec::Constant(2, 1.0 / 3.0)};
  const auto wb = weights_from_json(Json::parse(weights_to_json(w).dump()));
  CHECK(wb.q == w.q);
  CHECK(wb.r == w.r);
  CHECK_THROWS_AS(boxes_from_json(Json{{"boxes", Json::array()}}), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(Json{{"format_version", 99}}), ConfigError);
}

TEST_CASE("trajectory csv round trip and schema errors") {
  const auto s = builtin_scenario("a");
  const auto t = solve_forward(s, 0, *s.weights_truth, s.horizon).traj;
  const auto csv = trajectory_to_csv(t);
  const auto back = trajectory_from_csv(csv, 4, 2);
  CHECK(back.states == t.states);
  CHECK(back.controls == t.controls);
  CHECK(trajectory_to_csv(back) == csv);

  CHECK_THROWS_WITH_AS(trajectory_from_csv("k,x1,x2\n0,1,2\n1,2,3\n2,3,4\n"),
                       doctest::Contains("missing controls"), ConfigError);
  CHECK_THROWS_WITH_AS(trajectory_from_csv("k,x1,u1\n0,1,\n1,2,0.5\n2,3,\n"),
                       doctest::Contains("missing controls"), ConfigError);
  CHECK_THROWS_AS(trajectory_from_csv("k,x1,u1\n0,1,0\n1,2,0.5\n"), ConfigError);
  CHECK_THROWS_AS(trajectory_from_csv("k,x1,u1\n0,1,zz\n1,2,\n"), ConfigError);
  CHECK_THROWS_AS(trajectory_from_csv("# format_version: 2\nk,x1,u1\n0,1,0\n1,2,\n"), ConfigError);
}

TEST_CASE("gen then learn recovers scenario a") {
  const auto dir = scratch("learn");
  auto r = miner("gen --builtin a --out " + q(dir / "demos"));
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "demos" / "demo_001.csv"));
  CHECK(fs::exists(dir / "demos" / "scenario.json"));

  r = miner("learn --demos " + q(dir / "demos") + " --out " + q(dir / "results") + " --threads 1");
  REQUIRE(r.code == 0);
  for (const char* f : {"boxes.json", "weights.json", "segmentation.csv", "metrics.csv", "overlay.svg"})
    CHECK(fs::exists(dir / "results" / f));
  const auto boxes = boxes_from_json(read_json(dir / "results" / "boxes.json"));
  const auto s = builtin_scenario("a");
  CHECK(box_metrics(boxes, s.unknown_constraints_truth).iou >= 0.9);
  const auto w = weights_from_json(read_json(dir / "results" / "weights.json"));
  CHECK(cost_rmse(*s.weights_truth, w, s.dynamics.axis_map) <= 1e-5);

  SUBCASE("outputs do not depend on the thread count") {
    r = miner("learn --demos " + q(dir / "demos") + " --out " + q(dir / "again") + " --threads 4");
    REQUIRE(r.code == 0);
    for (const char* f : {"boxes.json", "weights.json", "segmentation.csv", "metrics.csv", "report.json"})
      CHECK(read_text(dir / "results" / f) == read_text(dir / "again" / f));
  }
  SUBCASE("eval and plot") {
    r = miner("eval --builtin a --boxes " + q(dir / "results" / "boxes.json") + " --weights " +
              q(dir / "results" / "weights.json"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("scenario,rmse,precision,recall,f1,iou\na,", 0) == 0);
    r = miner("plot --demos " + q(dir / "demos") + " --boxes " + q(dir / "results" / "boxes.json") +
              " --out " + q(dir / "plot"));
    REQUIRE(r.code == 0);
    const auto svg = read_text(dir / "plot" / "overlay.svg");
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
  }
  SUBCASE("staged learning matches the joint run") {
    r = miner("learn-cost --demos " + q(dir / "demos") + " --out " + q(dir / "cost"));
    REQUIRE(r.code == 0);
    CHECK(read_text(dir / "cost" / "weights.json") == read_text(dir / "results" / "weights.json"));
    r = miner("learn-constraints --demos " + q(dir / "demos") + " --weights " +
              q(dir / "cost" / "weights.json") + " --out " + q(dir / "cons"));
    REQUIRE(r.code == 0);
    CHECK(read_text(dir / "cons" / "boxes.json") == read_text(dir / "results" / "boxes.json"));
  }
}

TEST_CASE("gen noise is seeded") {
  const auto dir = scratch("seed");
  const std::string base = "gen --builtin a --control-noise 0.001 ";
  REQUIRE(miner(base + "--seed 5 --out " + q(dir / "x")).code == 0);
  REQUIRE(miner(base + "--seed 5 --out " + q(dir / "y")).code == 0);
  REQUIRE(miner(base + "--seed 6 --out " + q(dir / "z")).code == 0);
  CHECK(read_text(dir / "x" / "demo_000.csv") == read_text(dir / "y" / "demo_000.csv"));
  CHECK(read_text(dir / "x" / "demo_000.csv") != read_text(dir / "z" / "demo_000.csv"));
}

TEST_CASE("ingest") {
  const auto dir = scratch("ingest");
  write_text(dir / "no_u.csv", "k,x1,x2,x3,x4\n0,0,0,0,0\n1,0,0,0,0\n2,0,0,0,0\n");
  auto r = miner("ingest --builtin a --csv " + q(dir / "no_u.csv") + " --out " + q(dir / "o"));
  CHECK(r.code == 2);
  CHECK(r.err.find("missing controls") != std::string::npos);
  const auto err = Json::parse(r.err);
  CHECK(err["error"] == "config");
  CHECK(err["exit_code"] == 2);

  write_text(dir / "off.csv", "k,x1,x2,x3,x4,u1,u2\n0,0,0,0,0,1,0\n1,5,0,0,0,0,0\n2,5,0,0,0,,\n");
  r = miner("ingest --builtin a --csv " + q(dir / "off.csv") + " --out " + q(dir / "o"));
  CHECK(r.code == 2);
  CHECK(r.err.find("dynamics") != std::string::npos);

  r = miner("ingest --scenario " + q(fs::path(IKKT_DATA_DIR) / "cup_pour" / "scenario.json") +
            " --csv " + q(fs::path(IKKT_DATA_DIR) / "cup_pour" / "demo_000.csv") + " " +
            q(fs::path(IKKT_DATA_DIR) / "cup_pour" / "demo_001.csv") + " --out " + q(dir / "cup"));
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "cup" / "demo_001.csv"));
}

TEST_CASE("error exit codes") {
  const auto dir = scratch("codes");
  CHECK(miner("gen --builtin z --out " + q(dir)).code == 2);
  CHECK(miner("learn --out " + q(dir)).code == 2);
  CHECK(miner("gen --builtin a --out " + q(dir), "IKKT_THREADS=zero").code == 2);
  CHECK(miner("frobnicate").code == 2);

  // Two control kinks in a 9-step demo: the flagged windows leave no run of 3 inactive steps.
  write_text(dir / "d" / "demo_000.csv",
             "k,x1,x2,x3,x4,u1,u2\n"
             "0,20.0,20.0,0.0,0.0,0.2,0.1\n"
             "1,20.1,20.05,0.2,0.1,0.2,0.1\n"
             "2,20.400000000000002,20.200000000000003,0.4,0.2,2.4956688703858863,-0.15567878071724062\n"
             "3,22.047834435192943,20.322160609641383,2.895668870385886,0.044321219282759394,0.2,0.1\n"
             "4,25.04350330557883,20.416481828924145,3.0956688703858863,0.1443212192827594,0.2,0.1\n"
             "5,28.23917217596472,20.610803048206904,3.2956688703858865,0.2443212192827594,0.2,0.1\n"
             "6,31.634841046350605,20.905124267489665,3.4956688703858867,0.3443212192827594,0.2,0.1\n"
             "7,35.230509916736494,21.299445486772424,3.695668870385887,0.44432121928275936,0.48511250610033496,0.6335971808359613\n"
             "8,39.16873504017255,22.060565296473165,4.180781376486221,1.0779184001187208,,\n");
  write_json(dir / "d" / "scenario.json", scenario_to_json(builtin_scenario("a")));
  const auto r = miner("learn-cost --demos " + q(dir / "d") + " --out " + q(dir / "o"));
  CHECK(r.code == 4);
  CHECK(r.err.find("insufficient_inactive_data") != std::string::npos);
}

TEST_CASE("sweep row count") {
  const auto dir = scratch("sweep");
  const auto r = miner("sweep --scenarios a --sigmas -0.01,0,0.02 --time-limit 30 --out " + q(dir));
  REQUIRE(r.code == 0);
  const auto csv = read_text(dir / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("\nlearned,") != std::string::npos);
  CHECK(fs::exists(dir / "sweep.svg"));
  CHECK(miner("sweep --sigmas 0,abc --out " + q(dir)).code == 2);
}
