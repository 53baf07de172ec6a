#pragma once

// Brute-force reference solvers used only by tests.

#include "ikkt/mip.hpp"
#include "ikkt/qp.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace oracle {

using ikkt::Mat;
using ikkt::Vec;

// Enumerates every subset of inequality rows treated as equalities and keeps the KKT points.
// Bounds must already be folded into Gin.
inline std::optional<double> enumerate_active_sets(const ikkt::QuadraticProgram& p) {
  const int n = p.n();
  const int me = static_cast<int>(p.Aeq.rows());
  const int mi = static_cast<int>(p.Gin.rows());
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int k = me + static_cast<int>(act.size());
    Mat K = Mat::Zero(n + k, n + k);
    Vec rhs = Vec::Zero(n + k);
    K.topLeftCorner(n, n) = p.P;
    rhs.head(n) = -p.q;
    for (int r = 0; r < me; ++r) {
      K.block(n + r, 0, 1, n) = p.Aeq.row(r);
      K.block(0, n + r, n, 1) = p.Aeq.row(r).transpose();
      rhs(n + r) = p.beq(r);
    }
    for (size_t a = 0; a < act.size(); ++a) {
      const int r = me + static_cast<int>(a);
      K.block(n + r, 0, 1, n) = p.Gin.row(act[a]);
      K.block(0, n + r, n, 1) = p.Gin.row(act[a]).transpose();
      rhs(n + r) = p.hin(act[a]);
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(K);
    const Vec sol = cod.solve(rhs);
    if ((K * sol - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;
    const Vec z = sol.head(n);
    bool ok = true;
    for (int i = 0; i < mi && ok; ++i) ok = p.Gin.row(i).dot(z) <= p.hin(i) + 1e-9;
    for (size_t a = 0; a < act.size() && ok; ++a) ok = sol(n + me + a) >= -1e-9;
    if (!ok) continue;
    const double obj = p.objective(z);
    if (!best || obj < *best) best = obj;
  }
  return best;
}

// Solves every binary assignment as a QP with the binaries fixed.
inline std::optional<double> enumerate_binaries(const ikkt::MixedBinaryProgram& m) {
  const int B = static_cast<int>(m.binary_indices.size());
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << B); ++mask) {
    ikkt::QuadraticProgram q = m.base;
    for (int b = 0; b < B; ++b) {
      const int j = m.binary_indices[b];
      q.lo(j) = q.hi(j) = (mask >> b) & 1u ? 1.0 : 0.0;
    }
    bool card_ok = true;
    for (const auto& grp : m.cardinality_groups) {
      double s = 0.0;
      for (int j : grp) s += q.lo(j);
      card_ok &= s >= 1.0;
    }
    if (!card_ok) continue;
    const auto sol = ikkt::solve_qp(q);
    if (sol.status != ikkt::QpStatus::Optimal) continue;
    if (!best || sol.objective < *best) best = sol.objective;
  }
  return best;
}

// Random strictly convex QP with a known interior point.
inline ikkt::QuadraticProgram random_qp(std::mt19937& rng, int n, int mi, int me) {
  std::normal_distribution<double> N01(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  ikkt::QuadraticProgram p = ikkt::QuadraticProgram::with_size(n);
  Mat L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = N01(rng);
  p.P = L * L.transpose() + 0.05 * Mat::Identity(n, n);
  for (int i = 0; i < n; ++i) p.q(i) = 3.0 * N01(rng);
  Vec z0(n);
  for (int i = 0; i < n; ++i) z0(i) = N01(rng);
  p.Gin = Mat(mi, n);
  p.hin = Vec(mi);
  for (int r = 0; r < mi; ++r) {
    for (int j = 0; j < n; ++j) p.Gin(r, j) = N01(rng);
    p.hin(r) = p.Gin.row(r).dot(z0) + U(rng);
  }
  p.Aeq = Mat(me, n);
  p.beq = Vec(me);
  for (int r = 0; r < me; ++r) {
    for (int j = 0; j < n; ++j) p.Aeq(r, j) = N01(rng);
    p.beq(r) = p.Aeq.row(r).dot(z0);
  }
  return p;
}

// Random disjunctive program: continuous w in R^d, binaries selecting big-M halfspaces.
inline ikkt::MixedBinaryProgram random_mip(std::mt19937& rng, int d, int B) {
  std::normal_distribution<double> N01(0.0, 1.0);
  const int n = d + B;
  ikkt::MixedBinaryProgram m;
  m.base = ikkt::QuadraticProgram::with_size(n);
  Mat L(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) L(i, j) = N01(rng);
  m.base.P.topLeftCorner(d, d) = L * L.transpose() + 0.1 * Mat::Identity(d, d);
  for (int i = 0; i < d; ++i) m.base.q(i) = 2.0 * N01(rng);
  for (int b = 0; b < B; ++b) m.base.q(d + b) = 0.3 * N01(rng);
  const double M = 20.0;
  m.base.Gin = Mat::Zero(B, n);
  m.base.hin = Vec(B);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < d; ++i) m.base.Gin(b, i) = N01(rng);
    m.base.Gin(b, d + b) = M;  // a'w <= h - M + M(1-p)
    m.base.hin(b) = M + N01(rng) - 1.0;
    m.binary_indices.push_back(d + b);
  }
  m.base.lo.head(d).setConstant(-5.0);
  m.base.hi.head(d).setConstant(5.0);
  for (int g = 0; g + 3 <= B; g += 3) m.cardinality_groups.push_back({d + g, d + g + 1, d + g + 2});
  return m;
}

}  // namespace oracle
