#include "ikkt/weightfit.hpp"

#include "ikkt/errors.hpp"

#include <cmath>

namespace ikkt {

Vec bounded_lsq(const Mat& M, const Mat& E, const Vec& lo, const Vec& a0) {
  const int n = static_cast<int>(M.cols());
  Vec a = a0;
  std::vector<char> fixed(n, 0);
  for (int i = 0; i < n; ++i) fixed[i] = a(i) <= lo(i);
  const double mscale = std::max(1.0, M.cwiseAbs().maxCoeff());
  bool at_min = false;  // the last step reached the subproblem minimizer
  int released = -1;
  for (int it = 0; it < 50 * (n + 1); ++it) {
    std::vector<int> F;
    for (int i = 0; i < n; ++i)
      if (!fixed[i]) F.push_back(i);
    const int nf = static_cast<int>(F.size());
    const Vec res = M * a;
    Vec d = Vec::Zero(n);
    if (nf > 0 && !at_min) {
      Mat MF(M.rows(), nf), EF(E.rows(), nf);
      for (int i = 0; i < nf; ++i) {
        MF.col(i) = M.col(F[i]);
        EF.col(i) = E.col(F[i]);
      }
      // Null space of EF from a full QR of EF'.
      Eigen::ColPivHouseholderQR<Mat> qe(EF.transpose());
      const int re = static_cast<int>(qe.rank());
      const Mat Qe = qe.householderQ() * Mat::Identity(nf, nf);
      const Mat Z = Qe.rightCols(nf - re);
      if (Z.cols() > 0) {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod;
        cod.setThreshold(1e-13);
        cod.compute(MF * Z);
        const Vec c = cod.solve(-res);
        const Vec dF = Z * c;
        for (int i = 0; i < nf; ++i) d(F[i]) = dF(i);
      }
    }
    const double dn = d.cwiseAbs().maxCoeff();
    if (dn <= 1e-15 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
      // Bound multipliers mu = g - E' nu on the fixed set.
      const Vec g = M.transpose() * res;
      Vec nu = Vec::Zero(E.rows());
      if (nf > 0) {
        Mat EF(E.rows(), nf);
        Vec gF(nf);
        for (int i = 0; i < nf; ++i) {
          EF.col(i) = E.col(F[i]);
          gF(i) = g(F[i]);
        }
        nu = EF.transpose().completeOrthogonalDecomposition().solve(gF);
      }
      const Vec mu = g - E.transpose() * nu;
      const double tol = 1e-13 * mscale * mscale * std::max(1.0, a.cwiseAbs().maxCoeff());
      int rel = -1;
      for (int i = 0; i < n; ++i)
        if (fixed[i] && mu(i) < -tol && (rel < 0 || mu(i) < mu(rel))) rel = i;
      if (rel < 0) return a;
      fixed[rel] = 0;
      released = rel;
      at_min = false;
      continue;
    }
    double step = 1.0;
    int block = -1;
    for (int i = 0; i < n; ++i)
      if (!fixed[i] && d(i) < 0.0) {
        const double s = (lo(i) - a(i)) / d(i);
        if (s < step) {
          step = s;
          block = i;
        }
      }
    // A released variable that cannot move means the negative multiplier was rounding noise.
    if (block >= 0 && block == released && step <= 0.0) {
      a(block) = lo(block);
      return a;
    }
    released = -1;
    a += std::max(0.0, step) * d;
    if (block >= 0) {
      a(block) = lo(block);
      fixed[block] = 1;
    } else {
      at_min = true;
    }
  }
  throw SolverError("bounded least squares did not converge");
}

WindowSystem reduce_window(const KktWindow& w, const Trajectory& traj,
                           const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                           double active_tol) {
  const auto cs = ConstraintSet::split(known);
  const auto sel = SelectorVectors::all(static_cast<int>(cs.state.size()),
                                        static_cast<int>(cs.control.size()), 1);
  const auto b = assemble_stationarity(w, traj, known, sel, dyn);
  const int nx = dyn.nx(), nu = dyn.nu();

  std::vector<int> keep, free;
  for (int i = 0; i < nx + nu; ++i) keep.push_back(i);
  int n_lambda = 0;
  for (const auto& blk : b.layout.blocks) {
    switch (blk.kind) {
      case BlockKind::LambdaX:
      case BlockKind::LambdaU: {
        const bool ctl = blk.kind == BlockKind::LambdaU;
        const Vec g = ctl ? constraint_rows(cs.control, traj.u(blk.step))
                          : constraint_rows(cs.state, traj.x(blk.step));
        for (int r = 0; r < blk.size; ++r)
          if (std::abs(g(r)) <= active_tol) {
            keep.push_back(blk.offset + r);
            ++n_lambda;
          }
        break;
      }
      case BlockKind::ThetaD:
      case BlockKind::ThetaS:
      case BlockKind::ThetaG:
        for (int i = 0; i < blk.size; ++i) free.push_back(blk.offset + i);
        break;
      default:
        break;
    }
  }
  Mat K(b.coeffs.rows(), static_cast<Eigen::Index>(keep.size()));
  Mat F(b.coeffs.rows(), static_cast<Eigen::Index>(free.size()));
  for (size_t i = 0; i < keep.size(); ++i) K.col(i) = b.coeffs.col(keep[i]);
  for (size_t i = 0; i < free.size(); ++i) F.col(i) = b.coeffs.col(free[i]);
  const auto ps = project_out(K, F, b.constant);
  WindowSystem ws;
  ws.R = ps.R;
  ws.floor = ps.residual_floor;
  ws.n_lambda = n_lambda;
  return ws;
}

WeightFit fit_weights(const std::vector<WindowSystem>& systems, int nx, int nu, double r_min,
                      const SolverConfig& qpcfg) {
  const int nw = nx + nu;
  int n = nw, rows = 0;
  double floor = 0.0;
  for (const auto& s : systems) {
    n += s.n_lambda;
    rows += static_cast<int>(s.R.rows());
    floor += s.floor;
  }
  Mat M = Mat::Zero(rows, n);
  int ro = 0, lo = nw;
  for (const auto& s : systems) {
    const int m = static_cast<int>(s.R.rows());
    M.block(ro, 0, m, nw) = s.R.leftCols(nw);
    M.block(ro, lo, m, s.n_lambda) = s.R.rightCols(s.n_lambda);
    ro += m;
    lo += s.n_lambda;
  }

  // a = S a' with unit-norm columns of M S.
  // Columns at rounding level (an unexcited state) stay unscaled.
  Vec S = Vec::Ones(n);
  const double cmax = n > 0 ? M.colwise().norm().maxCoeff() : 0.0;
  for (int c = 0; c < n; ++c) {
    const double nc = M.col(c).norm();
    if (nc > 1e-12 * cmax) S(c) = 1.0 / nc;
  }
  const Mat Ms = M * S.asDiagonal();

  Vec lower = Vec::Zero(n);
  for (int c = nx; c < nw; ++c) lower(c) = r_min / S(c);

  Mat E = Mat::Zero(1, n);
  E.leftCols(nx) = S.head(nx).transpose();
  Vec a0 = lower;
  for (int c = 0; c < nx; ++c) a0(c) = 1.0 / (nx * S(c));
  for (int c = nx; c < nw; ++c) a0(c) = std::max(lower(c), 1.0 / S(c));
  Vec a = bounded_lsq(Ms, E, lower, a0);

  WeightFit fit;
  Eigen::JacobiSVD<Mat> svd(Ms, Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  std::vector<int> null_cols;
  for (int i = 0; i < n; ++i)
    if (i >= sv.size() || sv(i) <= 1e-8 * smax) null_cols.push_back(i);
  if (null_cols.size() >= 2 || (null_cols.size() == 1 && smax == 0.0)) {
    const int d = static_cast<int>(null_cols.size());
    Mat Nb(n, d);
    for (int i = 0; i < d; ++i) Nb.col(i) = svd.matrixV().col(null_cols[i]);
    const Mat Nq = S.head(nx).asDiagonal() * Nb.topRows(nx);
    const Vec q1 = S.head(nx).cwiseProduct(a.head(nx));
    auto p2 = QuadraticProgram::with_size(d);
    p2.P = 2.0 * Nq.transpose() * Nq;
    p2.q = 2.0 * Nq.transpose() * q1;
    p2.Aeq = Nq.colwise().sum();
    p2.beq = Vec::Zero(1);
    p2.Gin = -Nb;
    p2.hin = a - lower;
    auto s2 = solve_qp(p2, qpcfg);
    if (s2.status == QpStatus::Optimal && p2.objective(s2.z) < -1e-14) {
      a += Nb * s2.z;
      a = a.cwiseMax(lower);
      fit.degenerate = true;
    }
  }

  fit.w.q = S.head(nx).cwiseProduct(a.head(nx)).cwiseMax(0.0);
  fit.w.r = S.segment(nx, nu).cwiseProduct(a.segment(nx, nu));
  const double tr = fit.w.q.sum();
  if (tr > 0.0) {
    fit.w.q /= tr;
    fit.w.r /= tr;
  }
  fit.w.r = fit.w.r.cwiseMax(r_min);
  fit.residual = std::sqrt((Ms * a).squaredNorm() + floor);
  return fit;
}

}  // namespace ikkt
