#include "ikkt/qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace ikkt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Normalized problem handled by the active-set core. Rows [0, me) are equalities.
struct CoreProblem {
  const Mat* P = nullptr;  // null for linear objectives
  Vec q;
  Mat C;
  Vec d;
  int me = 0;
  Vec lo;
  Vec hi;
  Vec row_scale;  // inf-norm of each row of C
};

enum class CoreExit { Optimal, Unbounded, IterLimit, Stopped };

struct CoreState {
  Vec z;
  std::vector<int> eq_rows;  // independent equality subset, always in the working set
  std::vector<int> work;     // active inequality rows
  std::vector<int> fix;      // per variable: 0 free, -1 at lo, +1 at hi
  Vec mu;                    // multipliers of eq_rows then work
  Vec nu;                    // per variable, signed (hi positive)
  int iters = 0;
};

class CoreSolver {
 public:
  CoreSolver(const CoreProblem& p, const SolverConfig& cfg, int max_iters)
      : p_(p), cfg_(cfg), max_iters_(max_iters) {}

  CoreExit run(CoreState& s, const std::function<bool(const Vec&)>& stop) {
    const int n = static_cast<int>(p_.q.size());
    const int m = static_cast<int>(p_.C.rows());
    int degenerate = 0;
    std::vector<char> in_work(m, 0);
    for (int r : s.eq_rows) in_work[r] = 1;
    for (int r : s.work) in_work[r] = 1;

    while (true) {
      if (s.iters >= max_iters_) return CoreExit::IterLimit;
      if (cfg_.deadline != std::chrono::steady_clock::time_point{} && (s.iters & 7) == 0 &&
          std::chrono::steady_clock::now() > cfg_.deadline)
        return CoreExit::IterLimit;
      ++s.iters;
      const bool bland = degenerate > 25;

      std::vector<int> free_vars;
      for (int j = 0; j < n; ++j)
        if (s.fix[j] == 0) free_vars.push_back(j);
      std::vector<int> rows(s.eq_rows);
      rows.insert(rows.end(), s.work.begin(), s.work.end());
      const int nf = static_cast<int>(free_vars.size());
      const int k = static_cast<int>(rows.size());

      Vec g = p_.q;
      if (p_.P) g.noalias() += (*p_.P) * s.z;
      Vec gF(nf);
      for (int a = 0; a < nf; ++a) gF(a) = g(free_vars[a]);

      Mat Mt(nf, k);
      for (int b = 0; b < k; ++b)
        for (int a = 0; a < nf; ++a) Mt(a, b) = p_.C(rows[b], free_vars[a]);

      Mat Q;
      Mat R;
      if (k > 0) {
        Eigen::HouseholderQR<Mat> qr(Mt);
        Q = qr.householderQ() * Mat::Identity(nf, nf);
        R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
      } else {
        Q = Mat::Identity(nf, nf);
      }
      const int nz = nf - k;
      const double gscale = 1.0 + (g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
      const double small = 1e-12 * gscale;

      Vec dF = Vec::Zero(nf);
      bool ray = false;
      bool stationary = true;
      if (nz > 0) {
        const auto Z = Q.rightCols(nz);
        Vec gz = Z.transpose() * gF;
        if (gz.cwiseAbs().maxCoeff() > small) {
          stationary = false;
          if (!p_.P) {
            dF = -(Z * gz);
            ray = true;
          } else {
            Mat PF(nf, nf);
            for (int a = 0; a < nf; ++a)
              for (int b = 0; b < nf; ++b) PF(a, b) = (*p_.P)(free_vars[a], free_vars[b]);
            Mat H = Z.transpose() * PF * Z;
            H = 0.5 * (H + H.transpose());
            Eigen::LLT<Mat> llt(H);
            bool ok = llt.info() == Eigen::Success;
            if (ok) {
              const Vec dg = llt.matrixL().toDenseMatrix().diagonal();
              ok = dg.minCoeff() > 1e-7 * std::sqrt(std::max(1e-300, H.diagonal().maxCoeff()));
            }
            if (ok) {
              dF = Z * (-llt.solve(gz));
            } else {
              Eigen::SelfAdjointEigenSolver<Mat> es(H);
              const Vec& ev = es.eigenvalues();
              const Mat& V = es.eigenvectors();
              const double thr = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
              Vec coef = V.transpose() * gz;
              Vec zero_part = Vec::Zero(nz);
              Vec range_part = Vec::Zero(nz);
              for (int i = 0; i < nz; ++i) {
                if (ev(i) <= thr)
                  zero_part(i) = coef(i);
                else
                  range_part(i) = coef(i) / ev(i);
              }
              if (zero_part.cwiseAbs().maxCoeff() > small) {
                dF = -(Z * (V * zero_part));
                ray = true;
              } else {
                dF = -(Z * (V * range_part));
              }
            }
          }
          if (dF.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + s.z.cwiseAbs().maxCoeff()))
            stationary = true;
        }
      }

      if (stationary) {
        Vec mu = Vec::Zero(k);
        if (k > 0) {
          Vec rhs = -(Q.leftCols(k).transpose() * gF);
          mu = R.triangularView<Eigen::Upper>().solve(rhs);
        }
        Vec nu = Vec::Zero(n);
        for (int j = 0; j < n; ++j) {
          if (s.fix[j] == 0) continue;
          double rj = g(j);
          for (int b = 0; b < k; ++b) rj += p_.C(rows[b], j) * mu(b);
          nu(j) = -rj;  // signed bound multiplier
        }
        // Candidates with the wrong sign.
        int leave = -1;
        double worst = -0.5 * cfg_.tol_stat;
        const int ne = static_cast<int>(s.eq_rows.size());
        auto consider = [&](int key, double val) {
          if (val >= -0.5 * cfg_.tol_stat) return;
          if (bland) {
            if (leave < 0 || key < leave) {
              leave = key;
              worst = val;
            }
          } else if (val < worst) {
            worst = val;
            leave = key;
          }
        };
        for (int b = ne; b < k; ++b) consider(rows[b], mu(b));
        for (int j = 0; j < n; ++j) {
          if (s.fix[j] == 1) consider(m + j, nu(j));
          if (s.fix[j] == -1) consider(m + j, -nu(j));
        }
        if (leave < 0) {
          s.mu = mu;
          s.nu = nu;
          return CoreExit::Optimal;
        }
        if (leave < m) {
          in_work[leave] = 0;
          s.work.erase(std::find(s.work.begin(), s.work.end(), leave));
        } else {
          s.fix[leave - m] = 0;
        }
        continue;
      }

      Vec d = Vec::Zero(n);
      for (int a = 0; a < nf; ++a) d(free_vars[a]) = dF(a);
      const double dnorm = d.cwiseAbs().maxCoeff();
      Vec Cd = p_.C * d;
      Vec Cz = p_.C * s.z;
      double alpha = ray ? kInf : 1.0;
      int enter = -1;
      auto offer = [&](int key, double a) {
        a = std::max(0.0, a);
        if (a < alpha - 1e-15 * std::max(1.0, alpha == kInf ? 1.0 : alpha) ||
            (enter >= 0 && std::abs(a - alpha) <= 1e-15 && key < enter)) {
          alpha = a;
          enter = key;
        }
      };
      for (int i = p_.me; i < m; ++i) {
        if (in_work[i]) continue;
        if (Cd(i) > 1e-12 * dnorm * p_.row_scale(i)) offer(i, (p_.d(i) - Cz(i)) / Cd(i));
      }
      for (int a = 0; a < nf; ++a) {
        const int j = free_vars[a];
        if (d(j) > 1e-12 * dnorm && p_.hi(j) < kInf) offer(m + j, (p_.hi(j) - s.z(j)) / d(j));
        if (d(j) < -1e-12 * dnorm && p_.lo(j) > -kInf) offer(m + j, (p_.lo(j) - s.z(j)) / d(j));
      }
      if (enter < 0 && ray) return CoreExit::Unbounded;
      if (enter < 0) {
        s.z += d;
        degenerate = 0;
      } else {
        s.z += alpha * d;
        if (enter < m) {
          in_work[enter] = 1;
          s.work.push_back(enter);
        } else {
          const int j = enter - m;
          s.fix[j] = d(j) > 0 ? 1 : -1;
          s.z(j) = d(j) > 0 ? p_.hi(j) : p_.lo(j);
        }
        degenerate = alpha * dnorm <= 1e-14 * (1.0 + s.z.cwiseAbs().maxCoeff()) ? degenerate + 1 : 0;
      }
      if (stop && stop(s.z)) return CoreExit::Stopped;
    }
  }

 private:
  const CoreProblem& p_;
  const SolverConfig& cfg_;
  int max_iters_;
};

// Greedy linear-independence filter over gradient vectors in R^n.
class SpanBasis {
 public:
  explicit SpanBasis(int n) : n_(n) {}
  bool add(const Vec& a) {
    const double an = a.norm();
    if (an == 0.0) return false;
    Vec v = a / an;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis_) v -= b.dot(v) * b;
    const double vn = v.norm();
    if (vn < 1e-9) return false;
    basis_.push_back(v / vn);
    return true;
  }
  bool full() const { return static_cast<int>(basis_.size()) >= n_; }

 private:
  int n_;
  std::vector<Vec> basis_;
};

Vec row_infnorms(const Mat& C) {
  Vec s(C.rows());
  for (int i = 0; i < C.rows(); ++i) s(i) = std::max(1e-300, C.row(i).cwiseAbs().maxCoeff());
  return s;
}

}  // namespace

QuadraticProgram QuadraticProgram::with_size(int n) {
  QuadraticProgram p;
  p.P = Mat::Zero(n, n);
  p.q = Vec::Zero(n);
  p.Aeq = Mat::Zero(0, n);
  p.beq = Vec::Zero(0);
  p.Gin = Mat::Zero(0, n);
  p.hin = Vec::Zero(0);
  p.lo = Vec::Constant(n, -kInf);
  p.hi = Vec::Constant(n, kInf);
  return p;
}

std::string QuadraticProgram::check() const {
  const int nn = n();
  if (P.rows() != nn || P.cols() != nn) return "P dimension mismatch";
  if (Aeq.cols() != nn && Aeq.rows() > 0) return "Aeq column mismatch";
  if (Aeq.rows() != beq.size()) return "beq length mismatch";
  if (Gin.cols() != nn && Gin.rows() > 0) return "Gin column mismatch";
  if (Gin.rows() != hin.size()) return "hin length mismatch";
  if (lo.size() != 0 && lo.size() != nn) return "lo length mismatch";
  if (hi.size() != 0 && hi.size() != nn) return "hi length mismatch";
  if (nn > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10) return "P not symmetric";
  return {};
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

QpSolution solve_qp(const QuadraticProgram& prob, const SolverConfig& cfg, const Vec* warm_z,
                    const QpBasis* warm_basis) {
  const int n = prob.n();
  const int me = static_cast<int>(prob.Aeq.rows());
  const int mi = static_cast<int>(prob.Gin.rows());
  const Vec lo = prob.lo.size() ? prob.lo : Vec::Constant(n, -kInf);
  const Vec hi = prob.hi.size() ? prob.hi : Vec::Constant(n, kInf);
  const int max_iters = cfg.max_iters > 0 ? cfg.max_iters : 100 + 30 * (n + me + mi);

  QpSolution sol;
  sol.z = Vec::Zero(n);
  sol.eq_multipliers = Vec::Zero(me);
  sol.ineq_multipliers = Vec::Zero(mi);
  sol.bound_multipliers = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (lo(j) > hi(j)) {
      sol.status = QpStatus::Infeasible;
      return sol;
    }
  }

  Mat C(me + mi, n);
  Vec dvec(me + mi);
  if (me) {
    C.topRows(me) = prob.Aeq;
    dvec.head(me) = prob.beq;
  }
  if (mi) {
    C.bottomRows(mi) = prob.Gin;
    dvec.tail(mi) = prob.hin;
  }

  // Independent equality subset.
  std::vector<int> eq_rows;
  {
    SpanBasis sb(n);
    for (int r = 0; r < me; ++r)
      if (sb.add(prob.Aeq.row(r).transpose())) eq_rows.push_back(r);
  }

  // Starting point: warm start clipped to bounds, then projected onto the equalities.
  Vec z = (warm_z && warm_z->size() == n) ? *warm_z : Vec::Zero(n);
  for (int j = 0; j < n; ++j) z(j) = std::clamp(z(j), lo(j), hi(j));
  if (!eq_rows.empty()) {
    Mat Ae(eq_rows.size(), n);
    Vec be(eq_rows.size());
    for (size_t i = 0; i < eq_rows.size(); ++i) {
      Ae.row(i) = prob.Aeq.row(eq_rows[i]);
      be(i) = prob.beq(eq_rows[i]);
    }
    Vec res = be - Ae * z;
    if (res.cwiseAbs().maxCoeff() > 0.0) {
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(Ae);
      z += cod.solve(res);
    }
  }
  if (me) {
    const double eqres = (prob.Aeq * z - prob.beq).cwiseAbs().maxCoeff();
    if (eqres > cfg.tol_feas * (1.0 + prob.beq.cwiseAbs().maxCoeff())) {
      sol.status = QpStatus::Infeasible;
      sol.z = z;
      return sol;
    }
  }

  auto violation = [&](const Vec& x) {
    double v = 0.0;
    if (mi) v = std::max(v, (prob.Gin * x - prob.hin).maxCoeff());
    for (int j = 0; j < n; ++j) v = std::max({v, x(j) - hi(j), lo(j) - x(j)});
    return v;
  };

  int iters = 0;
  double viol = violation(z);
  if (viol > 0.0) {
    // Elastic phase 1 over (z, t): min t s.t. each inequality and bound relaxed by t.
    std::vector<int> bound_rows_hi, bound_rows_lo;
    for (int j = 0; j < n; ++j) {
      if (hi(j) < kInf) bound_rows_hi.push_back(j);
      if (lo(j) > -kInf) bound_rows_lo.push_back(j);
    }
    const int m1 = me + mi + static_cast<int>(bound_rows_hi.size() + bound_rows_lo.size());
    CoreProblem p1;
    p1.q = Vec::Zero(n + 1);
    p1.q(n) = 1.0;
    p1.C = Mat::Zero(m1, n + 1);
    p1.d = Vec::Zero(m1);
    p1.me = me;
    if (me) {
      p1.C.topLeftCorner(me, n) = prob.Aeq;
      p1.d.head(me) = prob.beq;
    }
    int r = me;
    for (int i = 0; i < mi; ++i, ++r) {
      p1.C.row(r).head(n) = prob.Gin.row(i);
      p1.C(r, n) = -1.0;
      p1.d(r) = prob.hin(i);
    }
    for (int j : bound_rows_hi) {
      p1.C(r, j) = 1.0;
      p1.C(r, n) = -1.0;
      p1.d(r++) = hi(j);
    }
    for (int j : bound_rows_lo) {
      p1.C(r, j) = -1.0;
      p1.C(r, n) = -1.0;
      p1.d(r++) = -lo(j);
    }
    p1.lo = Vec::Constant(n + 1, -kInf);
    p1.hi = Vec::Constant(n + 1, kInf);
    p1.lo(n) = 0.0;
    p1.row_scale = row_infnorms(p1.C);

    CoreState s1;
    s1.z = Vec(n + 1);
    s1.z.head(n) = z;
    s1.z(n) = viol;
    s1.eq_rows = eq_rows;
    s1.fix.assign(n + 1, 0);
    // Start on the most violated row so the first step is well defined.
    CoreSolver core1(p1, cfg, max_iters);
    const CoreExit e1 = core1.run(s1, [n](const Vec& x) { return x(n) <= 0.0; });
    iters += s1.iters;
    z = s1.z.head(n);
    if (e1 == CoreExit::IterLimit) {
      sol.status = QpStatus::IterLimit;
      sol.z = z;
      sol.iterations = iters;
      return sol;
    }
    if (violation(z) > cfg.tol_feas) {
      sol.status = QpStatus::Infeasible;
      sol.z = z;
      sol.iterations = iters;
      return sol;
    }
  }

  CoreProblem p2;
  p2.P = &prob.P;
  p2.q = prob.q;
  p2.C = std::move(C);
  p2.d = std::move(dvec);
  p2.me = me;
  p2.lo = lo;
  p2.hi = hi;
  p2.row_scale = row_infnorms(p2.C);

  CoreState s;
  s.z = z;
  s.eq_rows = eq_rows;
  s.fix.assign(n, 0);
  {
    // Initial working set: tight constraints, hinted ones first, kept independent.
    SpanBasis sb(n);
    for (int r0 : eq_rows) sb.add(p2.C.row(r0).transpose());
    const double tight = std::max(cfg.tol_feas, 1e-12);
    Vec Cz = mi ? Vec(prob.Gin * z) : Vec(0);
    auto try_row = [&](int i) {
      if (i < 0 || i >= mi) return;
      const int r0 = me + i;
      if (std::find(s.work.begin(), s.work.end(), r0) != s.work.end()) return;
      if (Cz(i) < prob.hin(i) - tight * p2.row_scale(r0)) return;
      if (sb.add(p2.C.row(r0).transpose())) s.work.push_back(r0);
    };
    auto try_var = [&](int j, int side) {
      if (j < 0 || j >= n || s.fix[j] != 0) return;
      const double b = side > 0 ? hi(j) : lo(j);
      if (!std::isfinite(b) || std::abs(z(j) - b) > tight) return;
      Vec e = Vec::Zero(n);
      e(j) = 1.0;
      if (sb.add(e)) {
        s.fix[j] = side;
        s.z(j) = b;
      }
    };
    if (warm_basis) {
      for (int j : warm_basis->at_lo) try_var(j, -1);
      for (int j : warm_basis->at_hi) try_var(j, 1);
      for (int i : warm_basis->rows) try_row(i);
    }
    for (int j = 0; j < n && !sb.full(); ++j) {
      try_var(j, -1);
      try_var(j, 1);
    }
    for (int i = 0; i < mi && !sb.full(); ++i) try_row(i);
  }

  CoreSolver core(p2, cfg, max_iters);
  const CoreExit e2 = core.run(s, nullptr);
  iters += s.iters;
  sol.z = s.z;
  sol.iterations = iters;
  if (e2 == CoreExit::Unbounded) {
    sol.status = QpStatus::Unbounded;
    return sol;
  }
  if (e2 == CoreExit::IterLimit) {
    sol.status = QpStatus::IterLimit;
    return sol;
  }
  sol.status = QpStatus::Optimal;
  sol.objective = prob.objective(s.z);
  const int ne = static_cast<int>(s.eq_rows.size());
  for (int b = 0; b < ne; ++b) sol.eq_multipliers(s.eq_rows[b]) = s.mu(b);
  for (size_t b = 0; b < s.work.size(); ++b) sol.ineq_multipliers(s.work[b] - me) = s.mu(ne + b);
  sol.bound_multipliers = s.nu;
  for (int r0 : s.work) sol.basis.rows.push_back(r0 - me);
  for (int j = 0; j < n; ++j) {
    if (s.fix[j] == -1) sol.basis.at_lo.push_back(j);
    if (s.fix[j] == 1) sol.basis.at_hi.push_back(j);
  }
  return sol;
}

KktResiduals kkt_residuals(const QuadraticProgram& p, const QpSolution& s) {
  KktResiduals r;
  const int n = p.n();
  const Vec lo = p.lo.size() ? p.lo : Vec::Constant(n, -kInf);
  const Vec hi = p.hi.size() ? p.hi : Vec::Constant(n, kInf);
  Vec grad = p.P * s.z + p.q + s.bound_multipliers;
  if (p.Aeq.rows()) {
    grad += p.Aeq.transpose() * s.eq_multipliers;
    r.primal = std::max(r.primal, (p.Aeq * s.z - p.beq).cwiseAbs().maxCoeff());
  }
  if (p.Gin.rows()) {
    grad += p.Gin.transpose() * s.ineq_multipliers;
    const Vec slack = p.Gin * s.z - p.hin;
    r.primal = std::max(r.primal, slack.maxCoeff());
    r.dual = std::max(r.dual, (-s.ineq_multipliers).maxCoeff());
    r.complementarity =
        std::max(r.complementarity, s.ineq_multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  for (int j = 0; j < n; ++j) {
    r.primal = std::max({r.primal, s.z(j) - hi(j), lo(j) - s.z(j)});
    const double nu = s.bound_multipliers(j);
    if (nu > 0.0) {
      r.complementarity = std::max(r.complementarity, std::abs(nu * (hi(j) - s.z(j))));
      if (!std::isfinite(hi(j))) r.dual = std::max(r.dual, nu);
    } else if (nu < 0.0) {
      r.complementarity = std::max(r.complementarity, std::abs(nu * (s.z(j) - lo(j))));
      if (!std::isfinite(lo(j))) r.dual = std::max(r.dual, -nu);
    }
  }
  r.stationarity = n ? grad.cwiseAbs().maxCoeff() : 0.0;
  r.primal = std::max(0.0, r.primal);
  return r;
}

}  // namespace ikkt
