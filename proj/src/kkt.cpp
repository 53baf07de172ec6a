#include "ikkt/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ikkt {

void UnknownLayout::add(BlockKind kind, int step, int n) {
  blocks.push_back({kind, step, size, n});
  size += n;
}

int UnknownLayout::find(BlockKind kind, int step) const {
  for (const auto& b : blocks)
    if (b.kind == kind && b.step == step) return b.offset;
  return -1;
}

Multipliers Multipliers::zeros(int N, int nx, int ncx_rows, int ncu_rows) {
  Multipliers m;
  m.lambda_x.assign(N, Vec::Zero(ncx_rows));
  m.lambda_u.assign(N - 1, Vec::Zero(ncu_rows));
  m.theta_d.assign(N - 1, Vec::Zero(nx));
  m.theta_s = Vec::Zero(nx);
  m.theta_g = Vec::Zero(nx);
  return m;
}

Vec constraint_rows(const std::vector<BoxConstraint>& cs, const Vec& w) {
  int n = 0;
  for (const auto& c : cs) n += c.rows();
  Vec g(n);
  int o = 0;
  for (const auto& c : cs) {
    g.segment(o, c.rows()) = c.row_values(w);
    o += c.rows();
  }
  return g;
}

namespace {

void check_dims(const Trajectory& traj, const std::vector<BoxConstraint>& constraints,
                const SelectorVectors& sel, const LinearDynamics* dyn) {
  const auto cs = ConstraintSet::split(constraints);
  if (sel.vsx.size() != cs.state.size() || sel.vsu.size() != cs.control.size() ||
      sel.vpx.size() != cs.state.size() || sel.vpu.size() != cs.control.size())
    throw std::invalid_argument("selector length does not match constraint count");
  if (traj.controls.rows() != traj.states.rows() - 1)
    throw std::invalid_argument("control count must be N-1");
  if (dyn && (traj.states.cols() != dyn->nx() || traj.controls.cols() != dyn->nu()))
    throw std::invalid_argument("trajectory dimension does not match dynamics");
}

}  // namespace

LinearExprBundle assemble_stationarity(const KktWindow& w, const Trajectory& traj,
                                       const std::vector<BoxConstraint>& constraints,
                                       const SelectorVectors& sel, const LinearDynamics& dyn) {
  check_dims(traj, constraints, sel, &dyn);
  const int N = traj.length();
  if (w.first < 0 || w.last >= N || w.last - w.first < 2)
    throw std::invalid_argument("window must span at least three steps inside the trajectory");
  const int nx = dyn.nx(), nu = dyn.nu();
  const auto cs = ConstraintSet::split(constraints);
  const int rx = cs.state_rows(), ru = cs.control_rows();

  LinearExprBundle b;
  auto& L = b.layout;
  L.add(BlockKind::Q, -1, nx);
  L.add(BlockKind::R, -1, nu);
  for (int k = w.first; k <= w.last; ++k) L.add(BlockKind::LambdaX, k, rx);
  for (int k = w.first; k <= std::min(w.last, N - 2); ++k) L.add(BlockKind::LambdaU, k, ru);
  for (int k = std::max(0, w.first - 1); k <= std::min(w.last, N - 2); ++k)
    L.add(BlockKind::ThetaD, k, nx);
  if (w.is_start()) L.add(BlockKind::ThetaS, -1, nx);
  if (w.is_goal(N)) L.add(BlockKind::ThetaG, -1, nx);

  int rows = 0;
  for (int k = w.first; k <= w.last; ++k) rows += nx + (k <= N - 2 ? nu : 0);
  b.coeffs = Mat::Zero(rows, L.size);
  b.constant = Vec::Zero(rows);
  const int oq = L.find(BlockKind::Q), orr = L.find(BlockKind::R);

  int row = 0;
  for (int k = w.first; k <= w.last; ++k) {
    // dL/dx(k)
    for (int i = 0; i < nx; ++i) {
      b.tags.push_back({false, k, i});
      b.coeffs(row + i, oq + i) = traj.states(k, i);
    }
    const int olx = L.find(BlockKind::LambdaX, k);
    int o = 0;
    for (size_t c = 0; c < cs.state.size(); ++c) {
      const auto& con = cs.state[c];
      if (sel.vsx[c])
        for (int r = 0; r < con.rows(); ++r)
          b.coeffs(row + con.dims[r % con.nw()], olx + o + r) = con.row_sign(r);
      o += con.rows();
    }
    if (k >= 1) {
      const int op = L.find(BlockKind::ThetaD, k - 1);
      for (int i = 0; i < nx; ++i) b.coeffs(row + i, op + i) += 1.0;
    }
    if (k <= N - 2) {
      const int ot = L.find(BlockKind::ThetaD, k);
      b.coeffs.block(row, ot, nx, nx) -= dyn.A.transpose();
    }
    if (k == 0) {
      const int os = L.find(BlockKind::ThetaS);
      for (int i = 0; i < nx; ++i) b.coeffs(row + i, os + i) += 1.0;
    }
    if (k == N - 1) {
      const int og = L.find(BlockKind::ThetaG);
      for (int i = 0; i < nx; ++i) b.coeffs(row + i, og + i) += 1.0;
    }
    row += nx;
    if (k > N - 2) continue;
    // dL/du(k)
    for (int j = 0; j < nu; ++j) {
      b.tags.push_back({true, k, j});
      b.coeffs(row + j, orr + j) = traj.controls(k, j);
    }
    const int olu = L.find(BlockKind::LambdaU, k);
    o = 0;
    for (size_t c = 0; c < cs.control.size(); ++c) {
      const auto& con = cs.control[c];
      if (sel.vsu[c])
        for (int r = 0; r < con.rows(); ++r)
          b.coeffs(row + con.dims[r % con.nw()], olu + o + r) = con.row_sign(r);
      o += con.rows();
    }
    const int ot = L.find(BlockKind::ThetaD, k);
    b.coeffs.block(row, ot, nu, nx) -= dyn.B.transpose();
    row += nu;
  }
  return b;
}

ConditionResiduals condition_residuals(const Trajectory& traj,
                                       const std::vector<BoxConstraint>& constraints,
                                       const SelectorVectors& sel, const Multipliers& mult) {
  check_dims(traj, constraints, sel, nullptr);
  const auto cs = ConstraintSet::split(constraints);
  ConditionResiduals res;
  auto scan = [&](const std::vector<BoxConstraint>& set, const std::vector<int>& vp,
                  const std::vector<int>& vs, const Vec& w, const Vec* lambda) {
    int o = 0;
    for (size_t c = 0; c < set.size(); ++c) {
      const auto& con = set[c];
      const Vec g = con.row_values(w);
      if (vp[c]) {
        if (con.kind == ConstraintKind::Inclusive)
          res.pf = std::max(res.pf, g.maxCoeff());
        else
          res.pf = std::max(res.pf, g.minCoeff());  // penetration depth when inside
      }
      if (vs[c] && lambda && lambda->size() > 0) {
        for (int r = 0; r < con.rows(); ++r) {
          const double lam = (*lambda)(o + r);
          res.df = std::max(res.df, -lam);
          res.cs = std::max(res.cs, std::abs(lam * g(r)));
        }
      }
      o += con.rows();
    }
  };
  const int N = traj.length();
  for (int k = 0; k < N; ++k) {
    const Vec* lx = k < static_cast<int>(mult.lambda_x.size()) ? &mult.lambda_x[k] : nullptr;
    scan(cs.state, sel.vpx, sel.vsx, traj.x(k), lx);
    if (k < N - 1) {
      const Vec* lu = k < static_cast<int>(mult.lambda_u.size()) ? &mult.lambda_u[k] : nullptr;
      scan(cs.control, sel.vpu, sel.vsu, traj.u(k), lu);
    }
  }
  res.pf = std::max(0.0, res.pf);
  return res;
}

Vec pack_unknowns(const UnknownLayout& layout, const CostWeights& w, const Multipliers& m) {
  Vec z = Vec::Zero(layout.size);
  for (const auto& b : layout.blocks) {
    const Vec* src = nullptr;
    switch (b.kind) {
      case BlockKind::Q: src = &w.q; break;
      case BlockKind::R: src = &w.r; break;
      case BlockKind::LambdaX: src = &m.lambda_x.at(b.step); break;
      case BlockKind::LambdaU: src = &m.lambda_u.at(b.step); break;
      case BlockKind::ThetaD: src = &m.theta_d.at(b.step); break;
      case BlockKind::ThetaS: src = &m.theta_s; break;
      case BlockKind::ThetaG: src = &m.theta_g; break;
    }
    if (src->size() == b.size) z.segment(b.offset, b.size) = *src;
  }
  return z;
}

double stationarity_residual(const Trajectory& traj, const std::vector<BoxConstraint>& constraints,
                             const SelectorVectors& sel, const LinearDynamics& dyn,
                             const CostWeights& w, const Multipliers& m) {
  KktWindow win{0, traj.length() - 1};
  const auto b = assemble_stationarity(win, traj, constraints, sel, dyn);
  return b.evaluate(pack_unknowns(b.layout, w, m)).cwiseAbs().maxCoeff();
}

LinearExprBundle substitute(const LinearExprBundle& b, BlockKind kind, int step, const Vec& values) {
  const int off = b.layout.find(kind, step);
  if (off < 0) return b;
  int size = 0;
  for (const auto& blk : b.layout.blocks)
    if (blk.kind == kind && blk.step == step) size = blk.size;
  LinearExprBundle out;
  out.tags = b.tags;
  out.constant = b.constant + b.coeffs.middleCols(off, size) * values;
  out.coeffs = Mat(b.coeffs.rows(), b.layout.size - size);
  out.coeffs.leftCols(off) = b.coeffs.leftCols(off);
  out.coeffs.rightCols(b.layout.size - off - size) = b.coeffs.rightCols(b.layout.size - off - size);
  for (const auto& blk : b.layout.blocks)
    if (!(blk.kind == kind && blk.step == step)) out.layout.add(blk.kind, blk.step, blk.size);
  return out;
}

ProjectedSystem project_out(const Mat& keep, const Mat& free, const Vec& constant) {
  const int m = static_cast<int>(keep.rows());
  const int a = static_cast<int>(keep.cols());
  Mat K = keep;
  Vec c = constant;
  if (free.cols() > 0 && m > 0) {
    Eigen::ColPivHouseholderQR<Mat> qr(free);
    qr.setThreshold(1e-12);
    const int r = static_cast<int>(qr.rank());
    Mat Qt = qr.householderQ().transpose() * Mat::Identity(m, m);
    K = Qt.bottomRows(m - r) * keep;
    c = Qt.bottomRows(m - r) * constant;
  }
  ProjectedSystem ps;
  Mat aug(K.rows(), a + 1);
  aug.leftCols(a) = K;
  aug.col(a) = c;
  ps.R = Mat::Zero(a, a);
  ps.t = Vec::Zero(a);
  if (aug.rows() == 0) return ps;
  Eigen::HouseholderQR<Mat> qr(aug);
  const Mat U = qr.matrixQR().triangularView<Eigen::Upper>();
  const int kr = std::min<int>(static_cast<int>(aug.rows()), a);
  ps.R.topRows(kr) = U.topLeftCorner(kr, a);
  ps.t.head(kr) = U.block(0, a, kr, 1);
  if (aug.rows() > a) ps.residual_floor = U(a, a) * U(a, a);
  return ps;
}

Vec recover_free(const Mat& keep, const Mat& free, const Vec& constant, const Vec& kept_values) {
  if (free.cols() == 0) return Vec(0);
  const Vec rhs = -(keep * kept_values + constant);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(free);
  return cod.solve(rhs);
}

}  // namespace ikkt
