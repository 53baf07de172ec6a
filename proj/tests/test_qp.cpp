#include "doctest.h"
#include "oracles.hpp"

#include "ikkt/qp.hpp"

#include <random>

using namespace ikkt;

namespace {

void require_certified(const QuadraticProgram& p, const QpSolution& s) {
  REQUIRE(s.status == QpStatus::Optimal);
  const auto r = kkt_residuals(p, s);
  CHECK(r.primal <= 1e-8);
  CHECK(r.stationarity <= 1e-8);
  CHECK(r.dual <= 1e-8);
  CHECK(r.complementarity <= 1e-8);
}

}  // namespace

TEST_CASE("unconstrained identity") {
  auto p = QuadraticProgram::with_size(3);
  p.P = Mat::Identity(3, 3);
  auto s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.z.norm() == doctest::Approx(0.0));
  CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("single equality") {
  auto p = QuadraticProgram::with_size(2);
  p.P = Mat::Identity(2, 2);
  p.Aeq = Mat::Ones(1, 2);
  p.beq = Vec::Ones(1);
  auto s = solve_qp(p);
  require_certified(p, s);
  CHECK(s.z(0) == doctest::Approx(0.5));
  CHECK(s.z(1) == doctest::Approx(0.5));
  CHECK(s.objective == doctest::Approx(0.25));
}

TEST_CASE("contradictory bounds are infeasible") {
  auto p = QuadraticProgram::with_size(1);
  p.P = Mat::Identity(1, 1);
  p.Gin = Mat(2, 1);
  p.Gin << 1.0, -1.0;
  p.hin = Vec(2);
  p.hin << -1.0, -1.0;
  CHECK(solve_qp(p).status == QpStatus::Infeasible);
}

TEST_CASE("linear objective without bound is unbounded") {
  auto p = QuadraticProgram::with_size(2);
  p.q << 1.0, 0.0;
  p.lo(1) = 0.0;
  CHECK(solve_qp(p).status == QpStatus::Unbounded);
}

TEST_CASE("linear program reaches a vertex") {
  auto p = QuadraticProgram::with_size(2);
  p.q << -1.0, -1.0;
  p.Gin = Mat(1, 2);
  p.Gin << 1.0, 2.0;
  p.hin = Vec::Constant(1, 4.0);
  p.lo = Vec::Zero(2);
  auto s = solve_qp(p);
  require_certified(p, s);
  CHECK(s.objective == doctest::Approx(-4.0));
}

TEST_CASE("singular hessian with bounds") {
  auto p = QuadraticProgram::with_size(3);
  p.P(0, 0) = 1.0;
  p.q << -2.0, 1.0, 0.0;
  p.lo = Vec::Constant(3, -1.0);
  p.hi = Vec::Constant(3, 1.0);
  auto s = solve_qp(p);
  require_certified(p, s);
  CHECK(s.z(0) == doctest::Approx(1.0));
  CHECK(s.z(1) == doctest::Approx(-1.0));
  CHECK(s.objective == doctest::Approx(-2.5));
}

TEST_CASE("redundant equalities are tolerated") {
  auto p = QuadraticProgram::with_size(2);
  p.P = Mat::Identity(2, 2);
  p.Aeq = Mat(2, 2);
  p.Aeq << 1.0, 1.0, 2.0, 2.0;
  p.beq = Vec(2);
  p.beq << 1.0, 2.0;
  auto s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.z(0) == doctest::Approx(0.5));
  p.beq(1) = 3.0;
  CHECK(solve_qp(p).status == QpStatus::Infeasible);
}

TEST_CASE("random instances match active-set enumeration") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 6;
    const int mi = 1 + (trial * 5) % 8;
    const int me = trial % 3 == 0 ? std::min(1, n - 1) : 0;
    auto p = oracle::random_qp(rng, n, mi, me);
    auto ref = oracle::enumerate_active_sets(p);
    REQUIRE(ref.has_value());
    auto s = solve_qp(p);
    require_certified(p, s);
    CHECK(s.objective == doctest::Approx(*ref).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("objective scaling leaves the argmin unchanged") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_qp(rng, 5, 7, 1);
    auto a = solve_qp(p);
    for (double c : {1e-3, 10.0, 1e3}) {
      auto q = p;
      q.P *= c;
      q.q *= c;
      auto b = solve_qp(q);
      REQUIRE(b.status == QpStatus::Optimal);
      CHECK((a.z - b.z).cwiseAbs().maxCoeff() <= 1e-7);
    }
  }
}

TEST_CASE("warm start reproduces the cold solution") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_qp(rng, 6, 8, 0);
    p.lo = Vec::Constant(6, -6.0);
    p.hi = Vec::Constant(6, 6.0);
    auto cold = solve_qp(p);
    REQUIRE(cold.status == QpStatus::Optimal);
    p.hin.array() -= 0.05;
    auto warm = solve_qp(p, {}, &cold.z, &cold.basis);
    auto ref = solve_qp(p);
    require_certified(p, warm);
    CHECK(warm.objective == doctest::Approx(ref.objective).epsilon(1e-9));
  }
}
